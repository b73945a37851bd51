"""Characteristic-mode decomposition of an element impedance matrix.

Modes are the generalized eigenvectors of the reactance against the
resistance part of the unloaded impedance matrix, scaled so each mode
carries unit resistance norm; under the half-current-squared power
convention one unit of a mode coefficient radiates 0.5 W.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import DecompositionError
from .geometry import WireGeometry
from .kernel import CutSpec, FarFieldCut, ImpedanceMatrix, radiate, radiated_power

# Escalation ladder for the resistance-part regularizer; the starting value
# is 1e-12 * trace / dim and grows until the factorization succeeds.
_REG_START = 1e-12
_REG_CAP = 1e-4


@dataclass
class CharacteristicBasis:
    """Eigencurrents (columns), eigenvalues, and per-mode radiation access."""

    eigencurrents: np.ndarray
    eigenvalues: np.ndarray
    element_id: int = 0
    frequency: float = 0.0
    geometry: WireGeometry | None = None
    regularization: float = 0.0
    _cut_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_modes(self) -> int:
        return self.eigencurrents.shape[1]

    @property
    def n_basis(self) -> int:
        return self.eigencurrents.shape[0]

    def truncate(self, n_modes: int) -> "CharacteristicBasis":
        if not 1 <= n_modes <= self.n_modes:
            raise DecompositionError(
                f"cannot retain {n_modes} of {self.n_modes} modes")
        return CharacteristicBasis(
            self.eigencurrents[:, :n_modes].copy(),
            self.eigenvalues[:n_modes].copy(),
            self.element_id, self.frequency, self.geometry, self.regularization)

    def residuals(self, z0: ImpedanceMatrix | np.ndarray) -> dict[str, float]:
        """Contract residuals against the source impedance matrix.

        Keys: ``orthonormality`` (resistance congruence vs identity,
        Frobenius), ``diagonality`` (max off-diagonal of the reactance
        congruence), ``eigen`` (generalized eigenproblem residual, Frobenius,
        relative).
        """
        z = z0.entries if isinstance(z0, ImpedanceMatrix) else np.asarray(z0)
        q = self.eigencurrents
        lam = self.eigenvalues
        r, x = z.real, z.imag
        orth = np.linalg.norm(q.T @ r @ q - np.eye(self.n_modes))
        xc = q.T @ x @ q
        diag = np.abs(xc - np.diag(np.diag(xc))).max() if self.n_modes > 1 else 0.0
        resid = np.linalg.norm(x @ q - r @ q @ np.diag(lam)) / np.linalg.norm(x)
        return {"orthonormality": float(orth), "diagonality": float(diag),
                "eigen": float(resid)}


def _sorted_sign_fixed(lam: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # magnitude-ascending, ties by signed value; sign pinned by the largest
    # current entry (first occurrence) made positive
    order = np.lexsort((lam, np.abs(lam)))
    lam = lam[order]
    q = q[:, order]
    for j in range(q.shape[1]):
        i = int(np.argmax(np.abs(q[:, j])))
        if q[i, j] < 0:
            q[:, j] = -q[:, j]
    return lam, q


def full_decomposition(z0: ImpedanceMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """All generalized eigenpairs of (reactance, resistance), ordered.

    Returns (eigenvalues, eigencurrents, regularization actually applied).
    The resistance part may be numerically singular: weakly radiating
    current patterns push its spectrum to machine zero, so a small identity
    shift is escalated until the factorization succeeds.
    """
    z = z0.entries if isinstance(z0, ImpedanceMatrix) else np.asarray(z0)
    if z.shape[0] != z.shape[1]:
        raise DecompositionError("impedance matrix must be square")
    r = 0.5 * (z.real + z.real.T)
    x = 0.5 * (z.imag + z.imag.T)
    dim = z.shape[0]
    scale = np.trace(r) / dim
    if scale <= 0:
        raise DecompositionError(
            "resistance part has non-positive trace; not a passive structure")
    # The floor is applied unconditionally: a resistance spectrum that merely
    # grazes machine zero can pass the factorization yet corrupt even the
    # well-radiating eigenpairs, while the tiny shift leaves them intact.
    eps = _REG_START * scale
    while True:
        try:
            lam, q = eigh(x, r + eps * np.eye(dim))
            break
        except np.linalg.LinAlgError:
            eps *= 10.0
            if eps > _REG_CAP * scale:
                smallest = float(np.linalg.eigvalsh(r).min())
                raise DecompositionError(
                    "resistance part is numerically singular beyond the "
                    f"regularization cap (smallest eigenvalue {smallest:.3e})"
                ) from None
    lam, q = _sorted_sign_fixed(lam, q)
    return lam, q, eps


def compute_characteristic_modes(z0: ImpedanceMatrix | np.ndarray, n_modes: int,
                                 element_id: int = 0, frequency: float | None = None,
                                 geometry: WireGeometry | None = None) -> CharacteristicBasis:
    """First ``n_modes`` characteristic modes, magnitude-ordered and sign-fixed."""
    z = z0.entries if isinstance(z0, ImpedanceMatrix) else np.asarray(z0)
    if not 1 <= n_modes <= z.shape[0]:
        raise DecompositionError(
            f"n_modes must be in [1, {z.shape[0]}], got {n_modes}")
    lam, q, eps = full_decomposition(z0)
    freq = frequency
    if freq is None:
        freq = z0.frequency if isinstance(z0, ImpedanceMatrix) else 0.0
    return CharacteristicBasis(q[:, :n_modes], lam[:n_modes], element_id,
                               freq, geometry, eps)


def _cut_key(cut: CutSpec) -> tuple:
    return (cut.phi_deg, cut.theta_start_deg, cut.theta_stop_deg, cut.n_theta)


def mode_farfield(basis: CharacteristicBasis, mode: int, cut: CutSpec) -> FarFieldCut:
    """Far-field cut of one eigencurrent; results are cached per cut."""
    if not 0 <= mode < basis.n_modes:
        raise IndexError(f"mode index {mode} out of range [0, {basis.n_modes})")
    if basis.geometry is None:
        raise DecompositionError("basis carries no geometry; cannot radiate")
    key = (_cut_key(cut), mode)
    if key not in basis._cut_cache:
        cur = basis.eigencurrents[:, mode].astype(complex)
        basis._cut_cache[key] = radiate(cur, basis.geometry, basis.frequency, cut)
    return basis._cut_cache[key]


def mode_power(basis: CharacteristicBasis, mode: int) -> float:
    """Radiated power of one unit-coefficient mode (0.5 W by normalization)."""
    if basis.geometry is None:
        raise DecompositionError("basis carries no geometry; cannot radiate")
    cur = basis.eigencurrents[:, mode].astype(complex)
    return radiated_power(cur, basis.geometry, basis.frequency)
