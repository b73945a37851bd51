"""Run configuration: one JSON document driving every workbench command.

Schema (all lengths in wavelengths unless suffixed otherwise)::

    {
      "frequency_hz": 299792458.0,            # required, > 0
      "n_modes": 2,                           # modes retained per element
      "reference_impedance_ohm": 50.0,
      "geometry": {"builtin": "grid3x3-crossed", ...builder options...}
                  | {"file": "geometry.json"},
      "cuts": [{"phi_deg": 0.0, "theta_start_deg": 0.0,
                "theta_stop_deg": 180.0, "n_theta": 181, "label": "front"}],
      "synthesis": {"target": "lhcp" | ["re:im", "re:im"],
                    "sigma": "auto" | ["re:im", ...],
                    "threshold": 0.01, "max_iterations": 100,
                    "scatter_convention": "net"},
      "output_dir": "out"
    }

The environment variable ``CMSYNTH_OUT`` overrides ``output_dir``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, GeometryError
from .geometry import BUILTIN_LAYOUTS, WireGeometry, load_geometry
from .kernel import CutSpec
from .serialization import parse_complex
from .synthesis import SynthesisConfig, U_LEFT, U_RIGHT

_BUILDER_OPTIONS = {
    "dipole": {"length_wl", "n_segments", "radius_wl"},
    "dipole-pair": {"spacing_wl", "length_wl", "n_segments", "radius_wl"},
    "crossed-dipole": {"n_segments", "vertical_wl", "horizontal_wl",
                       "offset_wl", "radius_wl"},
    "grid3x3-crossed": {"spacing_wl", "n_segments", "ground", "vertical_wl",
                        "horizontal_wl", "offset_wl", "radius_wl"},
}


def _require(data: dict, key: str, kind, positive: bool = False):
    if key not in data:
        raise ConfigError(f"config misses required key {key!r}")
    value = data[key]
    try:
        value = kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r} is not a {kind.__name__}") from exc
    if positive and value <= 0:
        raise ConfigError(f"config key {key!r} must be positive")
    return value


@dataclass
class RunConfig:
    """Validated run settings plus the raw config text for provenance."""

    frequency_hz: float
    n_modes: int
    reference_impedance_ohm: float
    geometry_spec: dict
    cuts: list[CutSpec]
    synthesis: SynthesisConfig
    sigma_mode: str
    output_dir: Path
    raw_text: str = ""
    config_dir: Path = field(default_factory=Path)

    def build_geometry(self) -> WireGeometry:
        spec = self.geometry_spec
        if "file" in spec:
            path = Path(spec["file"])
            if not path.is_absolute():
                path = self.config_dir / path
            if not path.exists():
                raise ConfigError(f"geometry file {path} does not exist")
            try:
                return load_geometry(path)
            except GeometryError as exc:
                raise ConfigError(f"geometry file {path}: {exc}") from exc
        name = spec["builtin"]
        options = {k: v for k, v in spec.items() if k != "builtin"}
        builder = BUILTIN_LAYOUTS[name]
        return builder(self.frequency_hz, **options)


def _parse_cuts(items) -> list[CutSpec]:
    if items is None:
        return [CutSpec(phi_deg=0.0, label="front")]
    cuts = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError(f"cut {i} must be an object")
        try:
            cut = CutSpec(
                phi_deg=float(item.get("phi_deg", 0.0)),
                theta_start_deg=float(item.get("theta_start_deg", 0.0)),
                theta_stop_deg=float(item.get("theta_stop_deg", 180.0)),
                n_theta=int(item.get("n_theta", 181)),
                label=str(item.get("label", f"cut{i}")),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cut {i}: {exc}") from exc
        if cut.n_theta < 2 or cut.theta_stop_deg <= cut.theta_start_deg:
            raise ConfigError(f"cut {i}: bad theta sampling")
        cuts.append(cut)
    return cuts


def _parse_target(value) -> np.ndarray:
    if value is None or value == "lhcp":
        return U_LEFT.copy()
    if value == "rhcp":
        return U_RIGHT.copy()
    if isinstance(value, list):
        vec = np.array([parse_complex(x) for x in value])
        return vec
    raise ConfigError("synthesis target must be 'lhcp', 'rhcp' or a vector")


def _parse_synthesis(data, n_modes: int) -> tuple[SynthesisConfig, str]:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("synthesis section must be an object")
    target = _parse_target(data.get("target"))
    sigma_raw = data.get("sigma", "auto")
    sigma_mode = "auto"
    sigma: complex | list = 1j
    if isinstance(sigma_raw, str):
        if sigma_raw != "auto":
            raise ConfigError("sigma must be 'auto' or a list of re:im values")
    elif isinstance(sigma_raw, list):
        sigma_mode = "explicit"
        sigma = [parse_complex(x) for x in sigma_raw]
    else:
        raise ConfigError("sigma must be 'auto' or a list of re:im values")
    try:
        cfg = SynthesisConfig(
            target=target,
            sigma=sigma,
            threshold=float(data.get("threshold", 0.01)),
            max_iterations=int(data.get("max_iterations", 100)),
            scatter_convention=str(data.get("scatter_convention", "net")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"synthesis section: {exc}") from exc
    if cfg.max_iterations < 1:
        raise ConfigError("synthesis max_iterations must be at least 1")
    return cfg, sigma_mode


def parse_config(data: dict, raw_text: str = "", config_dir: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    frequency = _require(data, "frequency_hz", float, positive=True)
    n_modes = int(data.get("n_modes", 2))
    if n_modes < 1:
        raise ConfigError("n_modes must be at least 1")
    zref = float(data.get("reference_impedance_ohm", 50.0))
    if zref <= 0:
        raise ConfigError("reference_impedance_ohm must be positive")

    geo = data.get("geometry")
    if not isinstance(geo, dict) or ("builtin" not in geo) == ("file" not in geo):
        raise ConfigError(
            "geometry must name exactly one of 'builtin' or 'file'")
    if "builtin" in geo:
        name = geo["builtin"]
        if name not in BUILTIN_LAYOUTS:
            raise ConfigError(
                f"unknown builtin layout {name!r}; choose from "
                f"{sorted(BUILTIN_LAYOUTS)}")
        extras = set(geo) - {"builtin"} - _BUILDER_OPTIONS[name]
        if extras:
            raise ConfigError(
                f"layout {name!r} does not accept options {sorted(extras)}")

    cuts = _parse_cuts(data.get("cuts"))
    synthesis, sigma_mode = _parse_synthesis(data.get("synthesis"), n_modes)
    out_dir = Path(os.environ.get("CMSYNTH_OUT", data.get("output_dir", "out")))
    return RunConfig(frequency, n_modes, zref, geo, cuts, synthesis, sigma_mode,
                     out_dir, raw_text, config_dir or Path("."))


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(data, raw_text=text, config_dir=path.parent)
