"""Thin-wire Galerkin solver with piecewise-sinusoidal basis functions.

The electric field of a straight filament carrying a sinusoidal current has a
closed form that involves only the endpoint distances, so impedance entries
reduce to a single numerical integral along the testing arm.  Reaction
integrals use graded Gauss panels near the source; an infinite perfectly
conducting plane is handled by mirrored image arms with negated current.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import GeometryError, SolverError
from .geometry import C0, ETA0, Arm, GroundPlane, WireGeometry


@dataclass
class ImpedanceMatrix:
    """Complex impedance matrix over basis functions, in ohms.

    ``basis_elements`` maps rows to element ids for full-array matrices;
    ``block_index`` tags an extracted inter-element sub-block ``(k, l)``.
    """

    entries: np.ndarray
    frequency: float
    block_index: tuple[int, int] | None = None
    basis_elements: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def check_symmetry(self, tol: float = 1e-8) -> float:
        z = self.entries
        rel = np.linalg.norm(z - z.T) / max(np.linalg.norm(z), 1e-300)
        if rel > tol:
            raise SolverError(f"impedance matrix asymmetry {rel:.3e} above {tol:g}")
        return rel


# -- sinusoidal arm profiles ---------------------------------------------------


def _arm_profile(arm: Arm, k: float) -> tuple[float, float]:
    """Coefficients (A, B) of I(s) = A sin(ks) + B cos(ks) along the arm."""
    kl = k * arm.length
    s = np.sin(kl)
    if abs(s) < 1e-9:
        raise GeometryError(
            f"segment of length {arm.length:.4e} m is too close to a half "
            "wavelength for the sinusoidal basis"
        )
    if arm.rising:
        return arm.amplitude / s, 0.0
    return -arm.amplitude * np.cos(kl) / s, arm.amplitude


def _arm_current(arm: Arm, k: float, s: np.ndarray) -> np.ndarray:
    a, b = _arm_profile(arm, k)
    return a * np.sin(k * s) + b * np.cos(k * s)


def arm_field(arm: Arm, k: float, obs: np.ndarray, source_radius: float | None = None) -> np.ndarray:
    """Electric field of one sinusoidal arm at observation points (n, 3).

    The radial coordinate is blended with the wire radius, which places
    on-axis observation points on the wire surface (thin-wire kernel).  The
    radial unit vector is undefined on the axis; there the radial component
    is dropped, which is exact for testing along the same straight wire.
    """
    a, b = _arm_profile(arm, k)
    L = arm.length
    d = arm.direction
    radius = arm.radius if source_radius is None else source_radius

    rel = obs - arm.p0
    z = rel @ d
    rho_vec = rel - np.outer(z, d)
    rho_geo = np.linalg.norm(rho_vec, axis=1)
    rho2 = rho_geo**2 + radius**2
    rho = np.sqrt(rho2)
    rho_hat = np.zeros_like(rho_vec)
    off_axis = rho_geo > 1e-12 * max(L, 1.0)
    rho_hat[off_axis] = rho_vec[off_axis] / rho_geo[off_axis, None]

    e_z = np.zeros(len(obs), dtype=complex)
    w_prime = np.zeros(len(obs), dtype=complex)
    for endpoint, sign in ((L, 1.0), (0.0, -1.0)):
        cur = a * np.sin(k * endpoint) + b * np.cos(k * endpoint)
        cur_p = k * (a * np.cos(k * endpoint) - b * np.sin(k * endpoint))
        dz = z - endpoint
        r_e = np.sqrt(rho2 + dz**2)
        u = np.exp(-1j * k * r_e)
        g = u / r_e
        e_z += sign * (cur * (dz / r_e) * (1j * k + 1.0 / r_e) * g - cur_p * g)
        w_prime += sign * (
            cur * (1j * k * rho2 / r_e**3 + k**2 * dz**2 / r_e**2) * u
            + cur_p * (1j * k * dz / r_e) * u
        )
    e_z *= -1j * ETA0 / (4.0 * np.pi * k)
    e_rho = -(ETA0 / (4.0 * np.pi * k**2)) * w_prime / rho
    return e_z[:, None] * d + e_rho[:, None] * rho_hat


# -- quadrature over testing arms ----------------------------------------------

_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GAUSS_CACHE:
        x, w = leggauss(n)
        _GAUSS_CACHE[n] = (x, w)
    return _GAUSS_CACHE[n]


def _panel_points(breaks: np.ndarray, n_per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gauss(n_per_panel)
    lo = breaks[:-1]
    hi = breaks[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts

# Panel edges graded toward both arm ends, where the field of an adjacent or
# coincident source arm peaks over a width of order the wire radius.
_GRADED_BREAKS = np.array([0.0, 0.004, 0.02, 0.08, 0.25, 0.5, 0.75, 0.92, 0.98, 0.996, 1.0])


def _segment_distance(p0, p1, q0, q1) -> float:
    """Minimum distance between two straight segments."""
    u = p1 - p0
    v = q1 - q0
    w0 = p0 - q0
    a = u @ u
    b = u @ v
    c = v @ v
    d = u @ w0
    e = v @ w0
    den = a * c - b * b
    if den > 1e-14 * max(a * c, 1.0):
        s = np.clip((b * e - c * d) / den, 0.0, 1.0)
    else:
        s = 0.0
    t = np.clip((b * s + e) / c, 0.0, 1.0) if c > 0 else 0.0
    s = np.clip((b * t - d) / a, 0.0, 1.0) if a > 0 else 0.0
    return float(np.linalg.norm(w0 + s * u - t * v))


def _test_points(test: Arm, source: Arm) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights along the testing arm for one source arm."""
    lt = test.length
    dist = _segment_distance(test.p0, test.p1, source.p0, source.p1)
    if dist <= 0.5 * max(lt, source.length):
        rel_breaks = _GRADED_BREAKS
        n = 6
    elif dist <= 2.0 * (lt + source.length):
        rel_breaks = np.array([0.0, 0.5, 1.0])
        n = 8
    else:
        rel_breaks = np.array([0.0, 1.0])
        n = 8
    return _panel_points(rel_breaks * lt, n)


def _reaction(test: Arm, source: Arm, k: float) -> complex:
    """Galerkin reaction integral of the source arm field on the test arm."""
    s, w = _test_points(test, source)
    pts = test.p0[None, :] + np.outer(s, test.direction)
    e = arm_field(source, k, pts)
    cur = _arm_current(test, k, s)
    return complex(np.sum(w * cur * (e @ test.direction)))


# -- impedance assembly ----------------------------------------------------------


def assemble_impedance(geometry: WireGeometry, frequency: float,
                       ground_plane: GroundPlane | None = None) -> ImpedanceMatrix:
    """Full impedance matrix of the structure at one frequency.

    Entries are the negated Galerkin reactions between basis functions; the
    upper triangle is computed and mirrored, so the matrix is symmetric by
    construction.  With a ground plane, mirrored image arms with negated
    current are added on the source side.
    """
    if frequency <= 0.0:
        raise GeometryError("frequency must be positive")
    plane = ground_plane if ground_plane is not None else geometry.ground_plane
    k = 2.0 * np.pi * frequency / C0
    basis = geometry.basis
    n = len(basis)

    source_arms: list[list[Arm]] = []
    for b in basis:
        arms = list(b.arms)
        if plane is not None:
            arms.extend(a.mirrored(plane) for a in b.arms)
        source_arms.append(arms)

    z = np.zeros((n, n), dtype=complex)
    for m in range(n):
        test_arms = basis[m].arms
        for col in range(m, n):
            acc = 0.0 + 0.0j
            for ta in test_arms:
                for sa in source_arms[col]:
                    acc += _reaction(ta, sa, k)
            z[m, col] = -acc
            z[col, m] = -acc
    return ImpedanceMatrix(z, frequency, basis_elements=geometry.basis_elements.copy())


def extract_block(zmat: ImpedanceMatrix, k: int, l: int) -> ImpedanceMatrix:
    """Sub-block coupling basis functions of element ``l`` into tests on ``k``."""
    if zmat.basis_elements is None:
        raise IndexError("impedance matrix carries no element partition")
    rows = np.flatnonzero(zmat.basis_elements == k)
    cols = np.flatnonzero(zmat.basis_elements == l)
    if rows.size == 0:
        raise IndexError(f"unknown element id {k}")
    if cols.size == 0:
        raise IndexError(f"unknown element id {l}")
    block = zmat.entries[np.ix_(rows, cols)].copy()
    return ImpedanceMatrix(block, zmat.frequency, block_index=(k, l))


# -- port excitation --------------------------------------------------------------


def port_drive_solve(zmat: ImpedanceMatrix | np.ndarray, ports, incident_waves,
                     reference_impedance: float = 50.0) -> np.ndarray:
    """Basis currents when ports are driven by incident power waves.

    Every port carries the reference impedance in series; a drive of ``v_p``
    is a Thevenin source of open-circuit voltage ``2 v_p sqrt(Z_ref)`` behind
    that impedance, so ``|v_p|^2`` is twice the available power.
    """
    z = zmat.entries if isinstance(zmat, ImpedanceMatrix) else np.asarray(zmat)
    ports = np.asarray(ports, dtype=int)
    v = np.asarray(incident_waves, dtype=complex)
    if v.shape != (len(ports),):
        raise SolverError(
            f"drive vector has {v.size} entries for {len(ports)} ports"
        )
    if reference_impedance <= 0.0:
        raise SolverError("reference impedance must be positive")
    loaded = z.copy()
    loaded[ports, ports] += reference_impedance
    rhs = np.zeros(z.shape[0], dtype=complex)
    rhs[ports] = 2.0 * np.sqrt(reference_impedance) * v
    try:
        currents = np.linalg.solve(loaded, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError("loaded impedance matrix is singular",
                          condition_estimate=float(np.linalg.cond(loaded))) from exc
    return currents


def reflected_waves(currents: np.ndarray, ports, incident_waves,
                    reference_impedance: float = 50.0) -> np.ndarray:
    """Outgoing power waves at the ports for a solved current distribution."""
    ports = np.asarray(ports, dtype=int)
    v = np.asarray(incident_waves, dtype=complex)
    return v - np.sqrt(reference_impedance) * currents[ports]


# -- radiation ---------------------------------------------------------------------


@dataclass
class FarFieldCut:
    """Far field along one azimuth cut, amplitudes with exp(-jkr)/r removed."""

    phi_deg: float
    theta_deg: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray
    frequency: float
    label: str = ""

    def __post_init__(self):
        self.theta_deg = np.asarray(self.theta_deg, dtype=float)
        self.e_theta = np.asarray(self.e_theta, dtype=complex)
        self.e_phi = np.asarray(self.e_phi, dtype=complex)
        if np.any(np.diff(self.theta_deg) <= 0):
            raise GeometryError("cut theta samples must be strictly increasing")
        if self.e_theta.shape != self.theta_deg.shape or self.e_phi.shape != self.theta_deg.shape:
            raise GeometryError("cut component arrays must match the theta samples")


@dataclass(frozen=True)
class CutSpec:
    """Requested pattern cut: fixed azimuth, sweep in polar angle (degrees)."""

    phi_deg: float = 180.0
    theta_start_deg: float = 0.0
    theta_stop_deg: float = 180.0
    n_theta: int = 181
    label: str = ""

    def theta_deg(self) -> np.ndarray:
        return np.linspace(self.theta_start_deg, self.theta_stop_deg, self.n_theta)


def _radiating_arms(geometry: WireGeometry, currents: np.ndarray) -> list[Arm]:
    currents = np.asarray(currents, dtype=complex)
    if currents.shape != (geometry.n_basis,):
        raise SolverError(
            f"current vector has {currents.size} entries for {geometry.n_basis} basis functions"
        )
    arms: list[tuple[Arm, complex]] = []
    for b, amp in zip(geometry.basis, currents):
        for a in b.arms:
            arms.append((a, amp))
            if geometry.ground_plane is not None:
                arms.append((a.mirrored(geometry.ground_plane), amp))
    return arms


def far_field(geometry: WireGeometry, frequency: float, currents: np.ndarray,
              theta_rad: np.ndarray, phi_rad: np.ndarray,
              n_quad: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Theta/phi far-field components at the given direction samples."""
    k = 2.0 * np.pi * frequency / C0
    theta = np.asarray(theta_rad, dtype=float)
    phi = np.asarray(phi_rad, dtype=float)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    rhat = np.stack([st * cp, st * sp, ct], axis=-1)
    that = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)

    x, w = _gauss(n_quad)
    nvec = np.zeros(rhat.shape, dtype=complex)
    for arm, amp in _radiating_arms(geometry, currents):
        if amp == 0:
            continue
        s = 0.5 * arm.length * (x + 1.0)
        ws = 0.5 * arm.length * w
        pts = arm.p0[None, :] + np.outer(s, arm.direction)
        cur = _arm_current(arm, k, s) * ws
        phase = np.exp(1j * k * (rhat @ pts.T))
        nvec += amp * (phase @ cur)[..., None] * arm.direction
    f = (-1j * k * ETA0 / (4.0 * np.pi)) * nvec
    return np.sum(f * that, axis=-1), np.sum(f * phat, axis=-1)


def radiate(currents: np.ndarray, geometry: WireGeometry, frequency: float,
            cut: CutSpec, label: str = "") -> FarFieldCut:
    """Far-field cut radiated by a basis current vector."""
    theta = cut.theta_deg()
    f_th, f_ph = far_field(geometry, frequency, currents,
                           np.deg2rad(theta), np.full_like(theta, np.deg2rad(cut.phi_deg)))
    return FarFieldCut(cut.phi_deg, theta, f_th, f_ph, frequency,
                       label=label or cut.label)


def radiated_power(currents: np.ndarray, geometry: WireGeometry, frequency: float,
                   n_theta: int = 64, n_phi: int = 128) -> float:
    """Total radiated power by quadrature over the far-field sphere.

    Gauss-Legendre in theta, uniform in phi.  Only meaningful for free-space
    structures; with a ground plane the lower half space is unphysical.
    """
    x, w = _gauss(n_theta)
    theta = 0.5 * np.pi * (x + 1.0)
    w_theta = 0.5 * np.pi * w
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    f_th, f_ph = far_field(geometry, frequency, currents, tt.ravel(), pp.ravel())
    intensity = (np.abs(f_th) ** 2 + np.abs(f_ph) ** 2).reshape(n_theta, n_phi)
    per_theta = intensity.sum(axis=1) * (2.0 * np.pi / n_phi)
    return float(np.sum(per_theta * np.sin(theta) * w_theta) / (2.0 * ETA0))


def tested_field(geometry: WireGeometry, frequency: float, field_fn,
                 n_quad: int = 16) -> np.ndarray:
    """Galerkin tests of an externally supplied incident field.

    ``field_fn`` maps observation points (n, 3) to complex E vectors (n, 3);
    the result holds one inner product per basis function.
    """
    k = 2.0 * np.pi * frequency / C0
    x, w = _gauss(n_quad)
    out = np.zeros(geometry.n_basis, dtype=complex)
    for i, b in enumerate(geometry.basis):
        acc = 0.0 + 0.0j
        for arm in b.arms:
            s = 0.5 * arm.length * (x + 1.0)
            ws = 0.5 * arm.length * w
            pts = arm.p0[None, :] + np.outer(s, arm.direction)
            e = np.asarray(field_fn(pts))
            acc += np.sum(ws * _arm_current(arm, k, s) * (e @ arm.direction))
        out[i] = acc
    return out
