"""Generalized scattering matrices of antenna elements in the mode basis.

The port interface carries incident/reflected power waves; the radiation
interface carries incoming/outgoing mode coefficients.  A reciprocal,
lossless, matched element with decoupled ports is fully determined by the
unit-circle phases of its terminated-scatterer eigenresponse and the
magnitudes of its transmit vector; the relative transmit phases are pinned
by reciprocity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, SolverError, TerminationError
from .kernel import ImpedanceMatrix, port_drive_solve, reflected_waves
from .modal import CharacteristicBasis, full_decomposition

#: Termination tags for the mode-defining element state.
GAMMA_OPEN = 1.0 + 0.0j
GAMMA_SHORT = -1.0 + 0.0j


def eigenvalue_to_scattering(lam):
    """Map a real characteristic eigenvalue onto the unit scattering circle."""
    lam = np.asarray(lam, dtype=float)
    s = -(1.0 - 1j * lam) / (1.0 + 1j * lam)
    return complex(s) if s.ndim == 0 else s


def scattering_to_eigenvalue(s):
    """Inverse of :func:`eigenvalue_to_scattering` on the unit circle."""
    s = np.asarray(s, dtype=complex)
    lam = (-1j * (1.0 + s) / (1.0 - s)).real
    return float(lam) if lam.ndim == 0 else lam


@dataclass
class Gsm:
    """Blocks of one element's generalized scattering matrix.

    ``s`` scatters incoming modes to outgoing modes, ``t`` transmits port
    waves into modes, ``r`` receives modes into port waves, ``gamma`` is the
    port reflection block.  ``s0`` holds the diagonal of the port-terminated
    scatterer response, and ``gamma_l0`` the unit-modulus termination
    reflection that defines it (open +1, short -1).
    """

    s: np.ndarray
    t: np.ndarray
    r: np.ndarray
    gamma: np.ndarray
    s0: np.ndarray
    gamma_l0: complex = GAMMA_SHORT

    def __post_init__(self):
        self.s = np.atleast_2d(np.asarray(self.s, dtype=complex))
        self.t = np.atleast_2d(np.asarray(self.t, dtype=complex))
        self.r = np.atleast_2d(np.asarray(self.r, dtype=complex))
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=complex))
        self.s0 = np.asarray(self.s0, dtype=complex).reshape(-1)
        n, p = self.t.shape
        if self.s.shape != (n, n) or self.r.shape != (p, n) or self.gamma.shape != (p, p):
            raise ConstraintError("inconsistent scattering block shapes")
        if self.s0.shape != (n,):
            raise ConstraintError("terminated-scatterer diagonal has wrong length")
        if abs(abs(complex(self.gamma_l0)) - 1.0) > 1e-12:
            raise ConstraintError("termination reflection must be unit modulus")

    @property
    def n_modes(self) -> int:
        return self.t.shape[0]

    @property
    def n_ports(self) -> int:
        return self.t.shape[1]

    def as_psi(self) -> np.ndarray:
        """Full (modes+ports) x (modes+ports) block matrix."""
        top = np.hstack([self.s, self.t])
        bottom = np.hstack([self.r, self.gamma])
        return np.vstack([top, bottom])

    def truncate(self, n_modes: int) -> "Gsm":
        if not 1 <= n_modes <= self.n_modes:
            raise ConstraintError(
                f"cannot retain {n_modes} of {self.n_modes} modes")
        return Gsm(self.s[:n_modes, :n_modes], self.t[:n_modes, :],
                   self.r[:, :n_modes], self.gamma, self.s0[:n_modes],
                   self.gamma_l0)


@dataclass(frozen=True)
class SyntheticElementParams:
    """Degrees of freedom of a synthetic single-port element.

    Per-mode phases of the terminated-scatterer response (radians), transmit
    magnitudes with unit total power, and the orientation constant sigma
    (+/- j in the reference layouts) that fixes absolute transmit phases.
    """

    s_phases: tuple[float, ...]
    t_magnitudes: tuple[float, ...]
    sigma: complex = 1j

    def __post_init__(self):
        if len(self.s_phases) != len(self.t_magnitudes):
            raise ConstraintError("phase and magnitude lists differ in length")
        if abs(abs(complex(self.sigma)) - 1.0) > 1e-12:
            raise ConstraintError("sigma must be unit modulus")

    @property
    def n_modes(self) -> int:
        return len(self.s_phases)


def transmit_from_ports(basis: CharacteristicBasis, z0: ImpedanceMatrix | np.ndarray,
                        port_solutions: np.ndarray) -> np.ndarray:
    """Transmit block from per-port current solutions.

    Column p holds how strongly each mode is excited when port p is driven
    by a unit incident wave with all ports terminated: the mode-current inner
    product through the unloaded impedance matrix, divided by (1 + j lambda).
    """
    z = z0.entries if isinstance(z0, ImpedanceMatrix) else np.asarray(z0)
    currents = np.atleast_2d(np.asarray(port_solutions, dtype=complex))
    if currents.shape[0] != basis.n_basis:
        currents = currents.T
    if currents.shape[0] != basis.n_basis:
        raise ConstraintError("port solutions do not match the basis size")
    proj = basis.eigencurrents.T @ z @ currents
    return proj / (1.0 + 1j * basis.eigenvalues)[:, None]


def scattering_from_s0_and_t(s0, t, tol: float = 1e-9) -> np.ndarray:
    """Scattering block of a matched lossless element from s0 and transmit."""
    s0 = np.asarray(s0, dtype=complex).reshape(-1)
    t = np.atleast_2d(np.asarray(t, dtype=complex))
    if t.shape[0] != s0.size:
        t = t.T
    gram = t.conj().T @ t
    mismatch = np.linalg.norm(gram - np.eye(t.shape[1]))
    if mismatch > tol:
        raise ConstraintError(
            f"transmit block is not matched/decoupled (||T^H T - I|| = {mismatch:.3e})")
    return s0[:, None] * (np.eye(s0.size) - t.conj() @ t.T)


def reciprocity_residual(s0, t) -> float:
    """Frobenius norm of the symmetry defect of the matched-element scattering."""
    s0 = np.asarray(s0, dtype=complex).reshape(-1)
    t = np.atleast_2d(np.asarray(t, dtype=complex))
    if t.shape[0] != s0.size:
        t = t.T
    lhs = s0[:, None] * (t.conj() @ t.T)
    rhs = (t @ t.conj().T) * s0[None, :]
    return float(np.linalg.norm(lhs - rhs))


def scattering_via_termination(s0, t, r, gamma, gamma_l0) -> np.ndarray:
    """Scattering block from the port-terminated scatterer response.

    ``gamma_l0`` may be a unit-modulus scalar (applied as a multiple of the
    identity) or a diagonal unitary matrix.
    """
    s0 = np.asarray(s0, dtype=complex).reshape(-1)
    t = np.atleast_2d(np.asarray(t, dtype=complex))
    r = np.atleast_2d(np.asarray(r, dtype=complex))
    gamma = np.atleast_2d(np.asarray(gamma, dtype=complex))
    p = t.shape[1]
    gl0 = np.asarray(gamma_l0, dtype=complex)
    gl0 = gl0 * np.eye(p) if gl0.ndim == 0 else gl0
    system = gl0 - gamma
    try:
        correction = t @ np.linalg.solve(system, r)
    except np.linalg.LinAlgError as exc:
        raise TerminationError(
            "termination minus port block is singular") from exc
    return np.diag(s0) - correction


@dataclass(frozen=True)
class LosslessnessReport:
    """Residual norms of the unitarity and reciprocity identities."""

    unitarity: float
    s_symmetry: float
    t_match: float
    s_t_orthogonality: float
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return max(self.unitarity, self.s_symmetry, self.t_match,
                   self.s_t_orthogonality) < self.tolerance

    def as_dict(self) -> dict:
        return {"unitarity": self.unitarity, "s_symmetry": self.s_symmetry,
                "t_match": self.t_match,
                "s_t_orthogonality": self.s_t_orthogonality,
                "tolerance": self.tolerance, "passed": self.passed}


def assert_lossless(psi: Gsm, tolerance: float = 1e-9) -> LosslessnessReport:
    """Diagnostic residuals; never raises, the caller decides."""
    full = psi.as_psi()
    n = psi.n_modes
    unit = np.linalg.norm(full.conj().T @ full - np.eye(full.shape[0]))
    sym = np.linalg.norm(psi.s - psi.s.T)
    tmatch = np.linalg.norm(psi.t.conj().T @ psi.t - np.eye(psi.n_ports))
    ortho = np.linalg.norm(psi.s.conj().T @ psi.t)
    return LosslessnessReport(float(unit), float(sym), float(tmatch),
                              float(ortho), tolerance)


def _wrap_half_turn(angle: float) -> float:
    """Wrap an angle into (-pi/2, pi/2]."""
    a = (angle + 0.5 * np.pi) % np.pi - 0.5 * np.pi
    if a == -0.5 * np.pi:
        a = 0.5 * np.pi
    return a


def synthetic_transmit_phases(params: SyntheticElementParams) -> np.ndarray:
    """Per-mode transmit phases implied by the scatterer phases and sigma.

    Reciprocity ties the relative transmit phase between two modes to half
    the relative scatterer phase (modulo a half turn); sigma fixes the
    absolute reference.  The first mode's phase is wrapped into
    (-90 deg, 90 deg] and relative phases are kept in the same window.
    """
    sig_angle = np.angle(complex(params.sigma))
    theta0 = _wrap_half_turn(0.5 * (params.s_phases[0] - sig_angle))
    thetas = [theta0]
    for phase in params.s_phases[1:]:
        delta = _wrap_half_turn(0.5 * (phase - params.s_phases[0]))
        thetas.append(theta0 + delta)
    return np.array(thetas)


def build_synthetic_gsm(params: SyntheticElementParams,
                        magnitude_tol: float = 1e-9) -> Gsm:
    """Reciprocal lossless matched single-port element from its parameters."""
    mags = np.asarray(params.t_magnitudes, dtype=float)
    if np.any(mags < 0):
        raise ConstraintError("transmit magnitudes must be nonnegative")
    power = float(np.sum(mags**2))
    if abs(power - 1.0) > magnitude_tol:
        raise ConstraintError(
            f"transmit magnitudes must have unit power, got {power:.12f}")
    thetas = synthetic_transmit_phases(params)
    t = (mags * np.exp(1j * thetas))[:, None]
    s0 = np.exp(1j * np.asarray(params.s_phases, dtype=float))
    s = scattering_from_s0_and_t(s0, t)
    gamma = np.zeros((1, 1), dtype=complex)
    return Gsm(s, t, t.T, gamma, s0, gamma_l0=np.conj(complex(params.sigma)))


def wire_element_gsm(z0: ImpedanceMatrix | np.ndarray, port_indices,
                     reference_impedance: float = 50.0,
                     n_modes: int | None = None,
                     element_id: int = 0,
                     frequency: float | None = None,
                     geometry=None) -> tuple[CharacteristicBasis, Gsm]:
    """Element scattering model from its unloaded impedance matrix.

    Works in the full mode space of the element (the loaded impedance matrix
    congruence-transformed by all eigencurrents), then truncates to
    ``n_modes``.  The full-space route stays numerically exact even when
    high-order modes radiate below machine precision, where the idealized
    diagonal forms would amplify round-off.  The short-circuit termination
    tag applies: removing the port loads leaves a continuous wire.
    """
    z = z0.entries if isinstance(z0, ImpedanceMatrix) else np.asarray(z0)
    ports = np.asarray(port_indices, dtype=int)
    if ports.size and (ports.min() < 0 or ports.max() >= z.shape[0]):
        raise SolverError("port index outside the element basis")
    lam, q, eps = full_decomposition(z0)
    nb = z.shape[0]
    zref = float(reference_impedance)

    loaded = z.copy()
    loaded[ports, ports] += zref
    a = q.T @ loaded @ q
    a_inv = np.linalg.inv(a)
    c = q[ports, :].T  # mode values at the port nodes, (nb, P)

    s = np.eye(nb) - 2.0 * a_inv
    t = 2.0 * np.sqrt(zref) * (a_inv @ c)
    gamma = np.eye(ports.size) - 2.0 * zref * (c.T @ a_inv @ c)
    s0 = eigenvalue_to_scattering(lam)

    freq = frequency
    if freq is None:
        freq = z0.frequency if isinstance(z0, ImpedanceMatrix) else 0.0
    basis = CharacteristicBasis(q, lam, element_id, freq, geometry, eps)
    psi = Gsm(s, t, t.T, gamma, s0, gamma_l0=GAMMA_SHORT)
    if n_modes is not None:
        basis = basis.truncate(n_modes)
        psi = psi.truncate(n_modes)
    return basis, psi


def port_gamma_from_solutions(currents: np.ndarray, ports, incident_waves,
                              reference_impedance: float = 50.0) -> np.ndarray:
    """Port reflection column(s) from solved drive currents."""
    currents = np.atleast_2d(np.asarray(currents, dtype=complex))
    v = np.atleast_2d(np.asarray(incident_waves, dtype=complex))
    cols = []
    for col in range(v.shape[0]):
        cols.append(reflected_waves(currents[col], ports, v[col],
                                    reference_impedance))
    return np.stack(cols, axis=1)
