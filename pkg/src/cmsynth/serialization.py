"""Deterministic file formats: matrix text, JSON containers, pattern CSV.

Every float is written with 17 significant digits, which round-trips IEEE
doubles exactly; complex values are ``re:im`` pairs.  The JSON emitter is
hand-rolled so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import ConfigError, ConstraintError
from .gsm import Gsm
from .kernel import FarFieldCut, ImpedanceMatrix
from .modal import CharacteristicBasis
from .coupling import ModalCouplingMatrix
from .solver import circular_components


def fmt_float(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        raise ConstraintError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def fmt_complex(z: complex) -> str:
    z = complex(z)
    return f"{fmt_float(z.real)}:{fmt_float(z.imag)}"


def parse_complex(text: str) -> complex:
    re_s, im_s = text.split(":")
    return complex(float(re_s), float(im_s))


# -- matrix text format ---------------------------------------------------------
# Header line: `rows cols frequency_hz`; then one row per line of
# whitespace-separated re:im pairs.


def save_matrix(path, matrix: np.ndarray, frequency: float) -> None:
    m = np.atleast_2d(np.asarray(matrix, dtype=complex))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]} {fmt_float(frequency)}\n")
        for row in m:
            fh.write(" ".join(fmt_complex(z) for z in row))
            fh.write("\n")


def load_matrix(path) -> tuple[np.ndarray, float]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ConfigError(f"{path}: malformed matrix header")
        rows, cols, freq = int(header[0]), int(header[1]), float(header[2])
        out = np.zeros((rows, cols), dtype=complex)
        for i in range(rows):
            parts = fh.readline().split()
            if len(parts) != cols:
                raise ConfigError(f"{path}: row {i} has {len(parts)} of {cols} entries")
            out[i] = [parse_complex(p) for p in parts]
    return out, freq


def save_impedance(path, zmat: ImpedanceMatrix) -> None:
    save_matrix(path, zmat.entries, zmat.frequency)


def load_impedance(path) -> ImpedanceMatrix:
    entries, freq = load_matrix(path)
    return ImpedanceMatrix(entries, freq)


# -- deterministic JSON ----------------------------------------------------------


def _emit(obj, parts: list, indent: int) -> None:
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        for i, (key, val) in enumerate(obj.items()):
            parts.append(pad + " " + json.dumps(str(key)) + ": ")
            _emit(val, parts, indent + 1)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            parts.append("[]")
            return
        parts.append("[")
        for i, val in enumerate(seq):
            _emit(val, parts, indent + 1)
            if i < len(seq) - 1:
                parts.append(", ")
        parts.append("]")
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, bool) or obj is None:
        parts.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(fmt_float(float(obj)))
    elif isinstance(obj, (complex, np.complexfloating)):
        parts.append(json.dumps(fmt_complex(complex(obj))))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), parts, indent)
    else:
        raise ConstraintError(f"cannot serialize {type(obj).__name__} to JSON")


def dumps_json(obj) -> str:
    parts: list[str] = []
    _emit(obj, parts, 0)
    parts.append("\n")
    return "".join(parts)


def save_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(obj))


def config_digest(config_text: str) -> str:
    return hashlib.sha256(config_text.encode("utf-8")).hexdigest()


def provenance(config_text: str | None = None) -> dict:
    from . import __version__
    out = {"package": "cmsynth", "version": __version__}
    if config_text is not None:
        out["config_sha256"] = config_digest(config_text)
    return out


# -- complex arrays in JSON -------------------------------------------------------


def complex_vector_to_json(vec) -> list[str]:
    return [fmt_complex(z) for z in np.asarray(vec, dtype=complex).reshape(-1)]


def complex_vector_from_json(items) -> np.ndarray:
    return np.array([parse_complex(s) for s in items], dtype=complex)


def complex_matrix_to_json(mat) -> list[list[str]]:
    m = np.atleast_2d(np.asarray(mat, dtype=complex))
    return [[fmt_complex(z) for z in row] for row in m]


def complex_matrix_from_json(rows) -> np.ndarray:
    return np.array([[parse_complex(s) for s in row] for row in rows], dtype=complex)


# -- pattern CSV -------------------------------------------------------------------
# Columns: theta_deg, e_theta_re, e_theta_im, e_phi_re, e_phi_im,
#          e_lhcp_db, e_rhcp_db

_DB_FLOOR = 1e-30


def magnitude_db(values: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.abs(values), _DB_FLOOR))


def save_cut_csv(path, cut: FarFieldCut) -> None:
    circ = circular_components(cut)
    ldb = magnitude_db(circ.e_lhcp)
    rdb = magnitude_db(circ.e_rhcp)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theta_deg,e_theta_re,e_theta_im,e_phi_re,e_phi_im,"
                 "e_lhcp_db,e_rhcp_db\n")
        for i, th in enumerate(cut.theta_deg):
            fields = [th, cut.e_theta[i].real, cut.e_theta[i].imag,
                      cut.e_phi[i].real, cut.e_phi[i].imag, ldb[i], rdb[i]]
            fh.write(",".join(fmt_float(x) for x in fields))
            fh.write("\n")


def load_cut_csv(path, phi_deg: float, frequency: float) -> FarFieldCut:
    theta, e_th, e_ph = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("theta_deg"):
            raise ConfigError(f"{path}: not a pattern CSV")
        for line in fh:
            p = line.strip().split(",")
            theta.append(float(p[0]))
            e_th.append(complex(float(p[1]), float(p[2])))
            e_ph.append(complex(float(p[3]), float(p[4])))
    return FarFieldCut(phi_deg, np.array(theta), np.array(e_th), np.array(e_ph),
                       frequency)


# -- characteristic basis ----------------------------------------------------------


def save_basis(basis: CharacteristicBasis, prefix: str) -> tuple[str, str]:
    """Write ``<prefix>.mat`` (eigencurrents) and ``<prefix>.json`` (sidecar)."""
    mat_path = f"{prefix}.mat"
    meta_path = f"{prefix}.json"
    save_matrix(mat_path, basis.eigencurrents.astype(complex), basis.frequency)
    save_json({
        "element_id": basis.element_id,
        "frequency_hz": basis.frequency,
        "eigenvalues": [fmt_float(x) for x in basis.eigenvalues],
        "ordering": "magnitude ascending, ties by signed value",
        "sign_rule": "largest-magnitude current entry made positive",
        "regularization": basis.regularization,
    }, meta_path)
    return mat_path, meta_path


def load_basis(prefix: str) -> CharacteristicBasis:
    entries, freq = load_matrix(f"{prefix}.mat")
    with open(f"{prefix}.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    lam = np.array([float(x) for x in meta["eigenvalues"]])
    return CharacteristicBasis(entries.real, lam, int(meta["element_id"]),
                               float(meta["frequency_hz"]),
                               regularization=float(meta.get("regularization", 0.0)))


# -- scattering model containers -----------------------------------------------------


def gsm_to_dict(gsm: Gsm) -> dict:
    return {
        "convention": {"gamma_l0": fmt_complex(gsm.gamma_l0)},
        "s": complex_matrix_to_json(gsm.s),
        "t": complex_matrix_to_json(gsm.t),
        "r": complex_matrix_to_json(gsm.r),
        "gamma": complex_matrix_to_json(gsm.gamma),
        "s0": complex_vector_to_json(gsm.s0),
    }


def gsm_from_dict(data: dict) -> Gsm:
    if "convention" not in data or "gamma_l0" not in data["convention"]:
        raise ConfigError("scattering container lacks its termination convention")
    return Gsm(
        complex_matrix_from_json(data["s"]),
        complex_matrix_from_json(data["t"]),
        complex_matrix_from_json(data["r"]),
        complex_matrix_from_json(data["gamma"]),
        complex_vector_from_json(data["s0"]),
        gamma_l0=parse_complex(data["convention"]["gamma_l0"]),
    )


def coupling_to_dict(g: ModalCouplingMatrix) -> dict:
    return {
        "element_ids": list(g.element_ids),
        "mode_counts": list(g.mode_counts),
        "blocks": [
            {"from": int(l), "to": int(k), "entries": complex_matrix_to_json(blk)}
            for (k, l), blk in sorted(g.blocks.items())
        ],
    }


def coupling_from_dict(data: dict) -> ModalCouplingMatrix:
    blocks = {}
    for item in data["blocks"]:
        blocks[(int(item["to"]), int(item["from"]))] = complex_matrix_from_json(
            item["entries"])
    return ModalCouplingMatrix([int(x) for x in data["element_ids"]],
                               [int(x) for x in data["mode_counts"]], blocks)


# -- synthesis result ---------------------------------------------------------------
# Field names below are stable; regression tooling keys on them.


def synthesis_result_to_dict(result) -> dict:
    elements = []
    for i, element in enumerate(result.element_ids):
        elements.append({
            "element": int(element),
            "s_phase_deg": [fmt_float(x) for x in
                            np.degrees(np.angle(result.s0_diag[i]))],
            "t_magnitude": [fmt_float(x) for x in np.abs(result.t_prime[i])],
            "t_prime": complex_vector_to_json(result.t_prime[i]),
            "s0": complex_vector_to_json(result.s0_diag[i]),
            "sigma": fmt_complex(result.sigmas[i]),
            "v": result.v[i],
        })
    return {
        "target": complex_vector_to_json(result.target),
        "scatter_convention": result.scatter_convention,
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "q": result.q,
        "step_changes": [fmt_float(x) for x in result.step_changes],
        "elements": elements,
    }


def synthesis_result_from_dict(data: dict):
    from .synthesis import SynthesisResult
    elements = data["elements"]
    t_prime = np.stack([complex_vector_from_json(e["t_prime"]) for e in elements])
    s0 = np.stack([complex_vector_from_json(e["s0"]) for e in elements])
    return SynthesisResult(
        element_ids=[int(e["element"]) for e in elements],
        t_prime=t_prime,
        s0_diag=s0,
        v=np.array([float(e["v"]) for e in elements]),
        q=float(data["q"]),
        sigmas=np.array([parse_complex(e["sigma"]) for e in elements]),
        target=complex_vector_from_json(data["target"]),
        converged=bool(data["converged"]),
        iterations=int(data["iterations"]),
        step_changes=[float(x) for x in data["step_changes"]],
        trace=[],
        scatter_convention=str(data["scatter_convention"]),
    )
