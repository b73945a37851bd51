import numpy as np
import pytest

from cmsynth.geometry import (C0, build_crossed_dipole, build_dipole,
                              build_dipole_pair, build_grid3x3_crossed)
from cmsynth.kernel import assemble_impedance, extract_block
from cmsynth.modal import compute_characteristic_modes
from cmsynth.coupling import assemble_coupling

# Wavelength of exactly one meter everywhere in the suite.
F0 = C0


@pytest.fixture(scope="session")
def f0():
    return F0


@pytest.fixture(scope="session")
def dipole_setup():
    geom = build_dipole(F0, length_wl=0.47, n_segments=10)
    return geom, assemble_impedance(geom, F0)


@pytest.fixture(scope="session")
def pair_setup():
    geom = build_dipole_pair(F0, spacing_wl=0.56, n_segments=20)
    return geom, assemble_impedance(geom, F0)


@pytest.fixture(scope="session")
def crossed_setup():
    geom = build_crossed_dipole(F0)
    return geom, assemble_impedance(geom, F0)


@pytest.fixture(scope="session")
def grid_setup():
    """3x3 crossed grid over its ground plane: geometry, Z, 2-mode bases, G."""
    geom = build_grid3x3_crossed(F0)
    zmat = assemble_impedance(geom, F0)
    bases = [
        compute_characteristic_modes(extract_block(zmat, e, e), 2, element_id=e,
                                     frequency=F0, geometry=geom.sub_geometry(e))
        for e in geom.element_ids
    ]
    coupling = assemble_coupling(bases, zmat)
    return geom, zmat, bases, coupling
