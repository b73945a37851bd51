"""Inter-element modal coupling and external plane-wave incidence.

The coupling block from element l into element k is half the congruence of
the inter-element impedance block by the two elements' eigencurrents; it
maps outgoing mode coefficients on l to incoming ones on k.  External
incidence coefficients are minus half the tested incident field projected
onto each mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError
from .geometry import C0
from .kernel import ImpedanceMatrix, extract_block, tested_field
from .modal import CharacteristicBasis


@dataclass
class ModalCouplingMatrix:
    """Off-diagonal blocks G(k,l) over an ordered list of element ids."""

    element_ids: list[int]
    mode_counts: list[int]
    blocks: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for (k, l), blk in self.blocks.items():
            if k == l:
                raise ConstraintError("coupling matrix has no diagonal blocks")
            self._check_block(k, l, blk)

    def _check_block(self, k: int, l: int, blk: np.ndarray) -> None:
        ik, il = self.element_ids.index(k), self.element_ids.index(l)
        want = (self.mode_counts[ik], self.mode_counts[il])
        if blk.shape != want:
            raise ConstraintError(
                f"block ({k},{l}) has shape {blk.shape}, expected {want}")

    @property
    def n_elements(self) -> int:
        return len(self.element_ids)

    def block(self, k: int, l: int) -> np.ndarray:
        if k == l:
            return np.zeros((self.mode_counts[self.element_ids.index(k)],) * 2,
                            dtype=complex)
        return self.blocks[(k, l)]

    def dense(self) -> np.ndarray:
        """Stacked coupling matrix with zero diagonal blocks."""
        offsets = np.concatenate([[0], np.cumsum(self.mode_counts)])
        total = offsets[-1]
        g = np.zeros((total, total), dtype=complex)
        for (k, l), blk in self.blocks.items():
            ik, il = self.element_ids.index(k), self.element_ids.index(l)
            g[offsets[ik]:offsets[ik + 1], offsets[il]:offsets[il + 1]] = blk
        return g

    def transpose_residual(self) -> float:
        """Max deviation of G(l,k) from the transpose of G(k,l)."""
        worst = 0.0
        for (k, l), blk in self.blocks.items():
            if (l, k) in self.blocks:
                worst = max(worst, float(np.abs(self.blocks[(l, k)] - blk.T).max()))
        return worst

    def scaled(self, factor: float) -> "ModalCouplingMatrix":
        return ModalCouplingMatrix(
            list(self.element_ids), list(self.mode_counts),
            {key: factor * blk for key, blk in self.blocks.items()})


def coupling_block(basis_k: CharacteristicBasis, basis_l: CharacteristicBasis,
                   z_kl: ImpedanceMatrix | np.ndarray) -> np.ndarray:
    """Half the eigencurrent congruence of the inter-element impedance block."""
    z = z_kl.entries if isinstance(z_kl, ImpedanceMatrix) else np.asarray(z_kl)
    if z.shape != (basis_k.n_basis, basis_l.n_basis):
        raise ConstraintError(
            f"impedance block {z.shape} does not match bases "
            f"({basis_k.n_basis}, {basis_l.n_basis})")
    return 0.5 * basis_k.eigencurrents.T @ z @ basis_l.eigencurrents


def assemble_coupling(bases: list[CharacteristicBasis],
                      zmat: ImpedanceMatrix) -> ModalCouplingMatrix:
    """All off-diagonal coupling blocks from the full-array impedance matrix."""
    if zmat.basis_elements is None:
        raise ConstraintError("full-array impedance matrix lacks its partition")
    ids = [b.element_id for b in bases]
    if len(set(ids)) != len(ids):
        raise ConstraintError("duplicate element ids among bases")
    for b in bases:
        rows = np.flatnonzero(zmat.basis_elements == b.element_id)
        if rows.size != b.n_basis:
            raise ConstraintError(
                f"element {b.element_id}: basis has {b.n_basis} currents but the "
                f"impedance partition holds {rows.size}")
    blocks = {}
    for bk in bases:
        for bl in bases:
            if bk.element_id == bl.element_id:
                continue
            z_kl = extract_block(zmat, bk.element_id, bl.element_id)
            blocks[(bk.element_id, bl.element_id)] = coupling_block(bk, bl, z_kl)
    return ModalCouplingMatrix(ids, [b.n_modes for b in bases], blocks)


@dataclass(frozen=True)
class PlaneWave:
    """Linearly polarized plane wave: direction of travel, E polarization."""

    direction: tuple[float, float, float]
    polarization: tuple[float, float, float]
    amplitude: complex = 1.0 + 0.0j

    def unit_direction(self) -> np.ndarray:
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ConstraintError("plane wave needs a propagation direction")
        return d / n

    def unit_polarization(self) -> np.ndarray:
        p = np.asarray(self.polarization, dtype=float)
        n = np.linalg.norm(p)
        if n == 0:
            raise ConstraintError("plane wave needs a polarization vector")
        p = p / n
        if abs(p @ self.unit_direction()) > 1e-9:
            raise ConstraintError("polarization must be transverse to travel")
        return p

    def field(self, k: float):
        d = self.unit_direction()
        p = self.unit_polarization()
        amp = complex(self.amplitude)

        def efield(points: np.ndarray) -> np.ndarray:
            phase = np.exp(-1j * k * (np.asarray(points) @ d))
            return amp * phase[:, None] * p

        return efield


def external_incidence(basis_k: CharacteristicBasis, incident: PlaneWave) -> np.ndarray:
    """Incoming mode coefficients excited by an external plane wave."""
    if basis_k.geometry is None:
        raise ConstraintError("basis carries no geometry; cannot test a field")
    if complex(incident.amplitude) == 0:
        return np.zeros(basis_k.n_modes, dtype=complex)
    k = 2.0 * np.pi * basis_k.frequency / C0
    tested = tested_field(basis_k.geometry, basis_k.frequency, incident.field(k))
    return -0.5 * (basis_k.eigencurrents.T @ tested)
