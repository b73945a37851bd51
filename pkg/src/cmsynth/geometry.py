"""Thin-wire geometries: segments, chains, piecewise-sinusoidal basis layout, ports.

A structure is a collection of straight wire segments grouped into elements.
Within one element, segments whose endpoints coincide are chained together;
every interior chain node carries one piecewise-sinusoidal basis function
(two sinusoidal arms peaking at the node).  Elements never connect to each
other, which is how crossed dipoles are modelled: two deliberately disjoint
chains under one element id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

#: Speed of light in vacuum, m/s.
C0 = 299792458.0

#: Free-space wave impedance, ohms.
ETA0 = 376.73031366857

# Endpoints closer than this are treated as one chain node (meters).
_NODE_TOL = 1e-9


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite coordinate {p!r}")
    return a


@dataclass(frozen=True)
class GroundPlane:
    """Infinite perfectly conducting plane given by a point and a normal.

    All wires must sit strictly on the positive-normal side; the solver adds
    mirrored image currents for it.
    """

    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    normal: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def unit_normal(self) -> np.ndarray:
        n = _as_point(self.normal)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise GeometryError("ground plane normal must be nonzero")
        return n / norm

    def height(self, point) -> float:
        """Signed distance of a point from the plane (positive = wire side)."""
        return float(np.dot(_as_point(point) - _as_point(self.origin), self.unit_normal()))

    def mirror_point(self, p: np.ndarray) -> np.ndarray:
        n = self.unit_normal()
        return p - 2.0 * np.dot(p - _as_point(self.origin), n) * n


@dataclass(frozen=True)
class Segment:
    """One straight wire piece carrying current from ``start`` to ``end``."""

    start: tuple[float, float, float]
    end: tuple[float, float, float]
    radius: float
    element: int = 0

    @property
    def p0(self) -> np.ndarray:
        return _as_point(self.start)

    @property
    def p1(self) -> np.ndarray:
        return _as_point(self.end)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    @property
    def direction(self) -> np.ndarray:
        return (self.p1 - self.p0) / self.length

    def validate(self) -> None:
        if self.length <= 0.0:
            raise GeometryError("degenerate segment of zero length")
        if self.radius <= 0.0:
            raise GeometryError("wire radius must be positive")
        if self.radius >= self.length:
            raise GeometryError(
                f"thin-wire validity broken: radius {self.radius} not below "
                f"segment length {self.length}"
            )


@dataclass(frozen=True)
class Arm:
    """One sinusoidal half of a basis function on a single segment.

    ``rising`` arms run from zero current at ``p0`` up to unit current at
    ``p1`` (the basis node); ``falling`` arms run from unit current at ``p0``
    down to zero at ``p1``.
    """

    p0: np.ndarray
    p1: np.ndarray
    radius: float
    rising: bool
    amplitude: float = 1.0

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    @property
    def direction(self) -> np.ndarray:
        return (self.p1 - self.p0) / self.length

    def mirrored(self, plane: GroundPlane) -> "Arm":
        """Image arm across a perfectly conducting plane (current negated)."""
        return Arm(
            p0=plane.mirror_point(self.p0),
            p1=plane.mirror_point(self.p1),
            radius=self.radius,
            rising=self.rising,
            amplitude=-self.amplitude,
        )


@dataclass(frozen=True)
class BasisFunction:
    """Piecewise-sinusoidal doublet peaking at one interior chain node."""

    node: np.ndarray
    arm_in: Arm
    arm_out: Arm
    element: int
    index: int

    @property
    def arms(self) -> tuple[Arm, Arm]:
        return (self.arm_in, self.arm_out)


class WireGeometry:
    """Segments plus delta-gap port locations, with derived basis layout.

    Ports are addressed as ``(element_id, segment_index)`` where the segment
    index counts within that element's own segment list; the feed sits at the
    node at the referenced segment's ``end`` point, which must be an interior
    chain node (i.e. carry a basis function).
    """

    def __init__(self, segments, ports=(), ground_plane: GroundPlane | None = None):
        self.segments: list[Segment] = list(segments)
        self.ports: list[tuple[int, int]] = [(int(e), int(s)) for e, s in ports]
        self.ground_plane = ground_plane
        if not self.segments:
            raise GeometryError("geometry needs at least one segment")
        for seg in self.segments:
            seg.validate()
        if ground_plane is not None:
            for seg in self.segments:
                clearance = min(ground_plane.height(seg.p0), ground_plane.height(seg.p1))
                if clearance <= seg.radius:
                    raise GeometryError(
                        "segment touches or crosses the ground plane "
                        f"(clearance {clearance:.3e} m)"
                    )
        self.element_ids: list[int] = sorted({seg.element for seg in self.segments})
        self._build_basis()
        self._resolve_ports()

    # -- basis construction -------------------------------------------------

    def _segments_of(self, element: int) -> list[tuple[int, Segment]]:
        return [(i, s) for i, s in enumerate(self.segments) if s.element == element]

    def _build_basis(self) -> None:
        self.basis: list[BasisFunction] = []
        # (element, local segment idx, which endpoint) -> basis index
        self._node_basis: dict[tuple[int, int, int], int] = {}
        for element in self.element_ids:
            local = self._segments_of(element)
            nodes: dict[tuple, list[tuple[int, int]]] = {}
            for li, (_, seg) in enumerate(local):
                for endi, p in enumerate((seg.p0, seg.p1)):
                    key = tuple(np.round(p / _NODE_TOL).astype(np.int64))
                    nodes.setdefault(key, []).append((li, endi))
            for key, attached in nodes.items():
                if len(attached) > 2:
                    raise GeometryError(
                        f"element {element}: more than two segments meet at one "
                        "node; wire junctions are not supported"
                    )
            for key, attached in nodes.items():
                if len(attached) != 2:
                    continue
                (la, ea), (lb, eb) = attached
                # orient the pair so current flows in -> node -> out
                if ea == 1 and eb == 0:
                    li_in, li_out = la, lb
                elif eb == 1 and ea == 0:
                    li_in, li_out = lb, la
                else:
                    raise GeometryError(
                        f"element {element}: segments at a shared node must be "
                        "oriented head-to-tail (end of one meets start of the next)"
                    )
                seg_in = local[li_in][1]
                seg_out = local[li_out][1]
                idx = len(self.basis)
                self.basis.append(
                    BasisFunction(
                        node=seg_in.p1.copy(),
                        arm_in=Arm(seg_in.p0, seg_in.p1, seg_in.radius, rising=True),
                        arm_out=Arm(seg_out.p0, seg_out.p1, seg_out.radius, rising=False),
                        element=element,
                        index=idx,
                    )
                )
                self._node_basis[(element, li_in, 1)] = idx
                self._node_basis[(element, li_out, 0)] = idx
        if not self.basis:
            raise GeometryError("geometry has no interior nodes, nothing to solve")
        self.basis_elements = np.array([b.element for b in self.basis], dtype=int)

    def _resolve_ports(self) -> None:
        self.port_basis_indices: list[int] = []
        for element, seg_idx in self.ports:
            if element not in self.element_ids:
                raise GeometryError(f"port references unknown element {element}")
            local = self._segments_of(element)
            if not 0 <= seg_idx < len(local):
                raise GeometryError(
                    f"port references segment {seg_idx} of element {element}, "
                    f"which has only {len(local)} segments"
                )
            key = (element, seg_idx, 1)
            if key not in self._node_basis:
                raise GeometryError(
                    f"port node (element {element}, segment {seg_idx}) is not an "
                    "interior node; feeds must sit between two segments"
                )
            self.port_basis_indices.append(self._node_basis[key])

    # -- queries -------------------------------------------------------------

    @property
    def n_basis(self) -> int:
        return len(self.basis)

    @property
    def n_ports(self) -> int:
        return len(self.ports)

    def basis_indices_of(self, element: int) -> np.ndarray:
        if element not in self.element_ids:
            raise GeometryError(f"unknown element id {element}")
        return np.flatnonzero(self.basis_elements == element)

    def sub_geometry(self, element: int) -> "WireGeometry":
        """The named element alone, ports included, as its own geometry."""
        segs = [(i, s) for i, s in enumerate(self.segments) if s.element == element]
        if not segs:
            raise GeometryError(f"unknown element id {element}")
        ports = [(e, s) for e, s in self.ports if e == element]
        return WireGeometry([s for _, s in segs], ports, self.ground_plane)

    def ports_of(self, element: int) -> list[int]:
        """Positions (in the global port list) of the element's ports."""
        return [i for i, (e, _) in enumerate(self.ports) if e == element]


# -- builders ----------------------------------------------------------------


def straight_wire(p0, p1, n_segments: int, radius: float, element: int = 0) -> list[Segment]:
    p0 = _as_point(p0)
    p1 = _as_point(p1)
    if n_segments < 2:
        raise GeometryError("a wire needs at least two segments to carry a basis")
    pts = [p0 + (p1 - p0) * (i / n_segments) for i in range(n_segments + 1)]
    return [
        Segment(tuple(pts[i]), tuple(pts[i + 1]), radius, element)
        for i in range(n_segments)
    ]


def dipole(center, direction, length: float, n_segments: int, radius: float,
           element: int = 0) -> tuple[list[Segment], int]:
    """Center-fed straight dipole; returns segments and the feed segment index.

    ``n_segments`` must be even so the feed node lands exactly at the center.
    """
    if n_segments % 2 != 0:
        raise GeometryError("center-fed dipole needs an even segment count")
    center = _as_point(center)
    d = _as_point(direction)
    d = d / np.linalg.norm(d)
    p0 = center - d * (length / 2.0)
    p1 = center + d * (length / 2.0)
    return straight_wire(p0, p1, n_segments, radius, element), n_segments // 2 - 1


# Builtin layout constants, all in wavelengths.  The crossed element uses two
# dipoles of unequal length so its two lowest modes split cleanly, and a small
# broadside offset keeps the chains disjoint.
WIRE_RADIUS_WL = 1.0e-3
DIPOLE_LENGTH_WL = 0.47
CROSS_VERTICAL_WL = 0.48
CROSS_HORIZONTAL_WL = 0.466
CROSS_OFFSET_WL = 0.01
GRID_SPACING_WL = 0.56


def build_dipole(frequency: float, length_wl: float = DIPOLE_LENGTH_WL,
                 n_segments: int = 20, radius_wl: float = WIRE_RADIUS_WL,
                 direction=(0.0, 0.0, 1.0), center=(0.0, 0.0, 0.0),
                 element: int = 0) -> WireGeometry:
    """Single center-fed dipole."""
    wl = C0 / frequency
    segs, feed = dipole(center, direction, length_wl * wl, n_segments,
                        radius_wl * wl, element)
    return WireGeometry(segs, [(element, feed)])


def build_dipole_pair(frequency: float, spacing_wl: float = 0.5,
                      length_wl: float = DIPOLE_LENGTH_WL, n_segments: int = 20,
                      radius_wl: float = WIRE_RADIUS_WL) -> WireGeometry:
    """Two parallel z-directed dipoles side by side along y."""
    wl = C0 / frequency
    segments: list[Segment] = []
    ports: list[tuple[int, int]] = []
    for k in range(2):
        segs, feed = dipole((0.0, k * spacing_wl * wl, 0.0), (0, 0, 1),
                            length_wl * wl, n_segments, radius_wl * wl, k)
        segments.extend(segs)
        ports.append((k, feed))
    return WireGeometry(segments, ports)


def build_dipole_row(frequency: float, count: int, spacing_wl: float = 0.56,
                     length_wl: float = DIPOLE_LENGTH_WL, n_segments: int = 20,
                     radius_wl: float = WIRE_RADIUS_WL) -> WireGeometry:
    """``count`` parallel z-directed dipoles equally spaced along y."""
    wl = C0 / frequency
    segments: list[Segment] = []
    ports: list[tuple[int, int]] = []
    for k in range(count):
        segs, feed = dipole((0.0, k * spacing_wl * wl, 0.0), (0, 0, 1),
                            length_wl * wl, n_segments, radius_wl * wl, k)
        segments.extend(segs)
        ports.append((k, feed))
    return WireGeometry(segments, ports)


def crossed_element(center, frequency: float, element: int,
                    n_segments: int = 10,
                    vertical_wl: float = CROSS_VERTICAL_WL,
                    horizontal_wl: float = CROSS_HORIZONTAL_WL,
                    offset_wl: float = CROSS_OFFSET_WL,
                    radius_wl: float = WIRE_RADIUS_WL) -> tuple[list[Segment], list[tuple[int, int]]]:
    """One crossed-dipole element: a vertical (z) and a horizontal (y) dipole.

    The horizontal wire is displaced along +x so the two chains stay disjoint;
    both dipoles are center-fed.  Port order is vertical first.  The
    horizontal wire runs toward -y, which makes the left-circular mode target
    (vertical mode leading by 90 degrees) radiate left-circular toward the +x
    broadside.
    """
    wl = C0 / frequency
    center = _as_point(center)
    v_segs, v_feed = dipole(center, (0, 0, 1), vertical_wl * wl, n_segments,
                            radius_wl * wl, element)
    h_center = center + np.array([offset_wl * wl, 0.0, 0.0])
    h_segs, h_feed = dipole(h_center, (0, -1, 0), horizontal_wl * wl, n_segments,
                            radius_wl * wl, element)
    segments = v_segs + h_segs
    ports = [(element, v_feed), (element, n_segments + h_feed)]
    return segments, ports


def build_crossed_dipole(frequency: float, n_segments: int = 10,
                         **kwargs) -> WireGeometry:
    segs, ports = crossed_element((0.0, 0.0, 0.0), frequency, 0, n_segments, **kwargs)
    return WireGeometry(segs, ports)


#: Clearance of the grid layout in front of its ground plane, wavelengths.
GRID_GROUND_CLEARANCE_WL = 0.05


def build_grid3x3_crossed(frequency: float, spacing_wl: float = GRID_SPACING_WL,
                          n_segments: int = 10, ground: bool = True,
                          **kwargs) -> WireGeometry:
    """3 x 3 grid of crossed-dipole elements in the yz-plane.

    Elements are numbered row-major over (z, y); broadside is the +x axis.
    By default the grid sits a twentieth of a wavelength in front of an
    infinite conducting plane parallel to the element plane, which keeps the
    inter-element coupling moderate, as in backed patch arrays.
    """
    wl = C0 / frequency
    segments: list[Segment] = []
    ports: list[tuple[int, int]] = []
    element = 0
    for iz in (1, 0, -1):
        for iy in (-1, 0, 1):
            center = (0.0, iy * spacing_wl * wl, iz * spacing_wl * wl)
            segs, prts = crossed_element(center, frequency, element, n_segments, **kwargs)
            segments.extend(segs)
            ports.extend(prts)
            element += 1
    plane = None
    if ground:
        plane = GroundPlane(origin=(-GRID_GROUND_CLEARANCE_WL * wl, 0.0, 0.0),
                            normal=(1.0, 0.0, 0.0))
    return WireGeometry(segments, ports, plane)


BUILTIN_LAYOUTS = {
    "dipole": build_dipole,
    "dipole-pair": build_dipole_pair,
    "crossed-dipole": build_crossed_dipole,
    "grid3x3-crossed": build_grid3x3_crossed,
}


# -- file format ---------------------------------------------------------------


def geometry_to_dict(geom: WireGeometry) -> dict:
    out = {
        "unit": "m",
        "segments": [
            {
                "start": [float(x) for x in seg.p0],
                "end": [float(x) for x in seg.p1],
                "radius": float(seg.radius),
                "element": int(seg.element),
            }
            for seg in geom.segments
        ],
        "ports": [{"element": e, "segment": s} for e, s in geom.ports],
    }
    if geom.ground_plane is not None:
        out["ground_plane"] = {
            "origin": [float(x) for x in geom.ground_plane.origin],
            "normal": [float(x) for x in geom.ground_plane.normal],
        }
    return out


def geometry_from_dict(data: dict) -> WireGeometry:
    try:
        segments = [
            Segment(tuple(s["start"]), tuple(s["end"]), float(s["radius"]),
                    int(s.get("element", 0)))
            for s in data["segments"]
        ]
        ports = [(int(p["element"]), int(p["segment"])) for p in data.get("ports", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometryError(f"malformed geometry description: {exc}") from exc
    plane = None
    if "ground_plane" in data:
        gp = data["ground_plane"]
        plane = GroundPlane(tuple(gp["origin"]), tuple(gp["normal"]))
    return WireGeometry(segments, ports, plane)


def load_geometry(path) -> WireGeometry:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return geometry_from_dict(data)


def save_geometry(geom: WireGeometry, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(geometry_to_dict(geom), fh, indent=1)
        fh.write("\n")
