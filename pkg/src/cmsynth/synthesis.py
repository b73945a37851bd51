"""Iterative per-element tuning so every element radiates a target mode mix.

Each element's outgoing coefficients are the sum of what its own port
launches and what it scatters of the neighbors' fields.  Assuming all
neighbors already radiate the target, the incident coefficients are fixed,
and the element's transmit vector, drive amplitude and scatterer phases can
be updated in closed form; iterating couples the phases back through the
scattering model until the launched configurations stop changing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError, DegenerateTargetError
from .coupling import ModalCouplingMatrix
from .gsm import Gsm, SyntheticElementParams
from .kernel import CutSpec
from .modal import CharacteristicBasis
from .solver import (ArrayModel, CoupledSolution, array_farfield,
                     circular_components, solve_excitation)

#: Modal target for left-handed circular radiation.
U_LEFT = np.array([1.0, -1.0j]) / np.sqrt(2.0)
#: Modal target for right-handed circular radiation.
U_RIGHT = np.array([1.0, 1.0j]) / np.sqrt(2.0)


@dataclass
class SynthesisConfig:
    """Targets, orientation constants and loop controls for the synthesis."""

    target: np.ndarray = field(default_factory=lambda: U_LEFT.copy())
    sigma: complex | list | tuple | np.ndarray = 1j
    threshold: float = 0.01
    max_iterations: int = 100
    scatter_convention: str = "net"

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(self.target) - 1.0) > 1e-12:
            raise ConstraintError("synthesis target must be a unit vector")
        if self.threshold <= 0:
            raise ConstraintError("convergence threshold must be positive")
        if self.scatter_convention not in ("net", "total"):
            raise ConstraintError(
                "scatter_convention must be 'net' or 'total'")

    def sigmas(self, n_elements: int) -> np.ndarray:
        sig = np.asarray(self.sigma, dtype=complex).reshape(-1)
        if sig.size == 1:
            sig = np.full(n_elements, sig[0])
        if sig.size != n_elements:
            raise ConstraintError(
                f"{sig.size} orientation constants for {n_elements} elements")
        if np.any(np.abs(np.abs(sig) - 1.0) > 1e-12):
            raise ConstraintError("orientation constants must be unit modulus")
        return sig


def incident_from_neighbors(coupling: ModalCouplingMatrix, target: np.ndarray,
                            k: int) -> np.ndarray:
    """Incident coefficients at element k if all neighbors radiate the target."""
    target = np.asarray(target, dtype=complex)
    ik = coupling.element_ids.index(k)
    alpha = np.zeros(coupling.mode_counts[ik], dtype=complex)
    for l in coupling.element_ids:
        if l == k:
            continue
        alpha += coupling.block(k, l) @ target
    return alpha


def all_neighbor_incidences(coupling: ModalCouplingMatrix,
                            target: np.ndarray) -> np.ndarray:
    return np.stack([incident_from_neighbors(coupling, target, k)
                     for k in coupling.element_ids])


@dataclass
class SynthesisState:
    """One iterate: per-element transmit vectors, drives, and the common scale."""

    t_prime: np.ndarray        # (K, N) complex, unit rows
    s0_diag: np.ndarray        # (K, N) complex, unit modulus
    v: np.ndarray              # (K,) real positive
    q: float
    f_launched: np.ndarray     # (K, N) = t_prime * v
    tau: int = 0
    step_change: float = float("nan")


def initial_state(target: np.ndarray, sigmas: np.ndarray) -> SynthesisState:
    """Uncoupled starting point: every element launches the target directly."""
    k = len(sigmas)
    t0 = np.tile(target, (k, 1))
    s0 = sigmas[:, None] * np.exp(2j * np.angle(t0))
    v0 = np.full(k, 1.0 / np.sqrt(k))
    return SynthesisState(t0, s0, v0, 1.0 / np.sqrt(k), t0 * v0[:, None], 0)


def iterate_step(state: SynthesisState, alphas: np.ndarray, target: np.ndarray,
                 sigmas: np.ndarray, scatter_convention: str = "net") -> SynthesisState:
    """One synthesis update.

    In order: scatterer phases from the previous transmit phases, the
    element scattering matrix, the new transmit direction toward the target,
    then the common scale and the per-element drives from the unit total
    port power.  The 'net' convention subtracts the incident coefficients
    from the scattered ones, matching the outgoing-minus-incoming bookkeeping
    of the coupled solver; 'total' scatters through S alone.
    """
    kk, n = state.t_prime.shape
    s0 = sigmas[:, None] * np.exp(2j * np.angle(state.t_prime))
    d = np.zeros_like(state.t_prime)
    for i in range(kk):
        t_col = state.t_prime[i][:, None]
        s_el = s0[i][:, None] * (np.eye(n) - t_col.conj() @ t_col.T)
        scattered = s_el @ alphas[i]
        if scatter_convention == "net":
            scattered = scattered - alphas[i]
        d[i] = target - scattered
    norms = np.linalg.norm(d, axis=1)
    if np.any(norms < 1e-12):
        bad = int(np.argmin(norms))
        raise DegenerateTargetError(
            f"element {bad} needs no transmit drive; its update is undefined")
    t_new = d / norms[:, None]
    q = 1.0 / np.sqrt(float(np.sum(norms**2)))
    v = q * norms
    f_launched = t_new * v[:, None]
    change = float(np.sum(np.linalg.norm(f_launched - state.f_launched, axis=1)))
    return SynthesisState(t_new, s0, v, q, f_launched, state.tau + 1, change)


@dataclass
class SynthesisResult:
    """Converged (or capped) synthesis output with its full iteration trace."""

    element_ids: list[int]
    t_prime: np.ndarray
    s0_diag: np.ndarray
    v: np.ndarray
    q: float
    sigmas: np.ndarray
    target: np.ndarray
    converged: bool
    iterations: int
    step_changes: list[float]
    trace: list[dict] = field(default_factory=list)
    scatter_convention: str = "net"

    @property
    def params(self) -> list[SyntheticElementParams]:
        out = []
        for i in range(len(self.element_ids)):
            out.append(SyntheticElementParams(
                tuple(np.angle(self.s0_diag[i]).tolist()),
                tuple(np.abs(self.t_prime[i]).tolist()),
                complex(self.sigmas[i])))
        return out

    def element_gsms(self) -> list[Gsm]:
        """Scattering models carrying the exact synthesized transmit vectors."""
        out = []
        n = self.t_prime.shape[1]
        for i in range(len(self.element_ids)):
            t = self.t_prime[i][:, None]
            s = self.s0_diag[i][:, None] * (np.eye(n) - t.conj() @ t.T)
            out.append(Gsm(s, t, t.T, np.zeros((1, 1), dtype=complex),
                           self.s0_diag[i],
                           gamma_l0=np.conj(complex(self.sigmas[i]))))
        return out


def synthesize(coupling: ModalCouplingMatrix,
               config: SynthesisConfig | None = None) -> SynthesisResult:
    """Run the iteration until the launched configurations settle.

    Non-convergence within the iteration cap is reported in the result, not
    raised; the trace always holds every iterate.
    """
    config = config if config is not None else SynthesisConfig()
    n_el = coupling.n_elements
    if any(c != config.target.size for c in coupling.mode_counts):
        raise ConstraintError(
            "synthesis requires every element to carry exactly the target's "
            f"{config.target.size} modes")
    sigmas = config.sigmas(n_el)
    alphas = all_neighbor_incidences(coupling, config.target)
    state = initial_state(config.target, sigmas)
    trace = [_trace_record(state)]
    changes: list[float] = []
    converged = False
    for _ in range(config.max_iterations):
        state = iterate_step(state, alphas, config.target, sigmas,
                             config.scatter_convention)
        trace.append(_trace_record(state))
        changes.append(state.step_change)
        if state.step_change < config.threshold:
            converged = True
            break
    # report the scatterer phases rebuilt from the final transmit phases, so
    # the returned pair is reciprocal to machine precision
    s0_final = sigmas[:, None] * np.exp(2j * np.angle(state.t_prime))
    return SynthesisResult(
        list(coupling.element_ids), state.t_prime.copy(), s0_final,
        state.v.copy(), state.q, sigmas, config.target.copy(), converged,
        state.tau, changes, trace, config.scatter_convention)


def _trace_record(state: SynthesisState) -> dict:
    return {
        "tau": state.tau,
        "step_change": state.step_change,
        "q": state.q,
        "v": state.v.copy(),
        "t_prime": state.t_prime.copy(),
        "s0_diag": state.s0_diag.copy(),
    }


# -- evaluation ------------------------------------------------------------------


@dataclass
class ConfigurationMetrics:
    """Modal and (optional) pattern-level polarization purity of one drive."""

    co_power: float
    cross_power: float
    suppression_db: float
    xpr_db: float | None
    solution: CoupledSolution


@dataclass
class XprEvaluation:
    initial: ConfigurationMetrics
    synthesized: ConfigurationMetrics
    improvement_db: float
    xpr_improvement_db: float | None


def uniform_initial_gsms(result: SynthesisResult) -> list[Gsm]:
    """Reference configuration: every element launches the bare target."""
    n = result.target.size
    out = []
    for i in range(len(result.element_ids)):
        t = result.target[:, None]
        s0 = result.sigmas[i] * np.exp(2j * np.angle(result.target))
        s = s0[:, None] * (np.eye(n) - t.conj() @ t.T)
        out.append(Gsm(s, t, t.T, np.zeros((1, 1), dtype=complex), s0,
                       gamma_l0=np.conj(complex(result.sigmas[i]))))
    return out


def _metrics(model: ArrayModel, v: np.ndarray, target: np.ndarray,
             bases: list[CharacteristicBasis] | None,
             cut: CutSpec | None, co: str) -> ConfigurationMetrics:
    sol = solve_excitation(model, v)
    # the opposite-handedness target is the conjugate mode mix
    cross_target = target.conjugate()
    co_p = 0.0
    cross_p = 0.0
    for ms in model.mode_slices():
        f_k = sol.f[ms]
        co_p += abs(np.vdot(target, f_k)) ** 2
        cross_p += abs(np.vdot(cross_target, f_k)) ** 2
    floor = 1e-30 * max(co_p, 1e-300)
    suppression = 10.0 * np.log10(co_p / max(cross_p, floor))
    xpr = None
    if bases is not None and cut is not None:
        field_cut = array_farfield(sol, bases, cut)
        xpr = circular_components(field_cut).xpr_db(co=co)
    return ConfigurationMetrics(float(co_p), float(cross_p), float(suppression),
                                xpr, sol)


def evaluate_result(result: SynthesisResult, coupling: ModalCouplingMatrix,
                    bases: list[CharacteristicBasis] | None = None,
                    cut: CutSpec | None = None, co: str = "L") -> XprEvaluation:
    """Polarization purity before vs after synthesis, same coupling model.

    'Before' drives every element with the bare target and uniform
    amplitudes; 'after' uses the synthesized transmit vectors and drives.
    """
    k = len(result.element_ids)
    dummy_bases = bases
    if dummy_bases is None:
        dummy_bases = [CharacteristicBasis(np.eye(result.target.size),
                                           np.zeros(result.target.size),
                                           element_id=e)
                       for e in result.element_ids]
    model_init = ArrayModel(uniform_initial_gsms(result), coupling, dummy_bases)
    model_syn = ArrayModel(result.element_gsms(), coupling, dummy_bases)
    v_init = np.full(k, 1.0 / np.sqrt(k), dtype=complex)
    before = _metrics(model_init, v_init, result.target, bases, cut, co)
    after = _metrics(model_syn, result.v.astype(complex), result.target,
                     bases, cut, co)
    xpr_gain = None
    if before.xpr_db is not None and after.xpr_db is not None:
        xpr_gain = after.xpr_db - before.xpr_db
    return XprEvaluation(before, after,
                         after.suppression_db - before.suppression_db, xpr_gain)
