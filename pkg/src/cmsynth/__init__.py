"""Mode-based antenna array analysis and cross-polarization synthesis.

A thin-wire Galerkin solver supplies impedance matrices and far fields;
characteristic modes of each element turn those into compact per-element
scattering models; a modal coupling matrix ties the elements together; and
an iterative synthesis tunes per-element parameters so the coupled array
radiates a clean circular polarization.
"""

__version__ = "0.1.0"

from .errors import (CmsynthError, ConfigError, ConstraintError,
                     DecompositionError, DegenerateTargetError, GeometryError,
                     ResonanceError, SolverError, TerminationError)
from .geometry import (C0, ETA0, GroundPlane, Segment, WireGeometry,
                       BUILTIN_LAYOUTS, build_crossed_dipole, build_dipole,
                       build_dipole_pair, build_dipole_row,
                       build_grid3x3_crossed, load_geometry, save_geometry)
from .kernel import (CutSpec, FarFieldCut, ImpedanceMatrix, assemble_impedance,
                     extract_block, port_drive_solve, radiate, radiated_power,
                     reflected_waves, tested_field)
from .modal import (CharacteristicBasis, compute_characteristic_modes,
                    full_decomposition, mode_farfield, mode_power)
from .gsm import (GAMMA_OPEN, GAMMA_SHORT, Gsm, LosslessnessReport,
                  SyntheticElementParams, assert_lossless, build_synthetic_gsm,
                  eigenvalue_to_scattering, reciprocity_residual,
                  scattering_from_s0_and_t, scattering_to_eigenvalue,
                  scattering_via_termination, synthetic_transmit_phases,
                  transmit_from_ports, wire_element_gsm)
from .coupling import (ModalCouplingMatrix, PlaneWave, assemble_coupling,
                       coupling_block, external_incidence)
from .solver import (ArrayModel, CoupledBlocks, CoupledSolution, CoupledSystem,
                     DirectSolution, array_farfield, build_wire_array_model,
                     circular_components, couple, direct_solve_oracle,
                     element_currents, solve_excitation)
from .synthesis import (SynthesisConfig, SynthesisResult, SynthesisState,
                        U_LEFT, U_RIGHT, all_neighbor_incidences,
                        evaluate_result, incident_from_neighbors, initial_state,
                        iterate_step, synthesize)
