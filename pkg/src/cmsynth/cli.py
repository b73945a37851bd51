"""Command-line workbench tying the pipeline together.

Subcommands: ``modes``, ``assemble``, ``couple``, ``solve``, ``synth``,
``oracle``.  Every command reads one JSON config, writes deterministic
artifacts under the output directory, and exits 0 on success, 2 on
configuration errors, 3 on numerical errors.  Machine-readable error
descriptions go to stderr as JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .coupling import assemble_coupling
from .errors import CmsynthError, ConfigError, GeometryError
from .gsm import wire_element_gsm
from .kernel import assemble_impedance, extract_block
from .modal import compute_characteristic_modes
from .serialization import (complex_vector_from_json, complex_vector_to_json,
                            coupling_to_dict, fmt_float, provenance,
                            save_basis, save_cut_csv, save_impedance, save_json,
                            synthesis_result_to_dict)
from .solver import (ArrayModel, array_farfield, build_wire_array_model,
                     circular_components, couple, direct_solve_oracle,
                     solve_excitation)
from .synthesis import evaluate_result, synthesize


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_drive(path: str | None, n_ports: int, seed: int) -> np.ndarray:
    if path is None:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(n_ports) + 1j * rng.standard_normal(n_ports)
        return v / np.linalg.norm(v)
    drive_path = Path(path)
    if not drive_path.exists():
        raise ConfigError(f"drive file {drive_path} does not exist")
    try:
        data = json.loads(drive_path.read_text(encoding="utf-8"))
        v = complex_vector_from_json(data["v"])
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"drive file {drive_path} is malformed: {exc}") from exc
    if v.size != n_ports:
        raise ConfigError(
            f"drive file holds {v.size} waves but the layout has {n_ports} ports")
    return v


def _element_bases(cfg: RunConfig, geometry, zmat, n_modes: int):
    bases = []
    for element in geometry.element_ids:
        z_kk = extract_block(zmat, element, element)
        bases.append(compute_characteristic_modes(
            z_kk, min(n_modes, z_kk.n), element_id=element,
            frequency=cfg.frequency_hz, geometry=geometry.sub_geometry(element)))
    return bases


def cmd_modes(cfg: RunConfig, args) -> int:
    n_modes = args.n_modes if args.n_modes is not None else cfg.n_modes
    if n_modes < 1:
        raise ConfigError("n_modes must be at least 1")
    out = _out_dir(cfg, args.out)
    geometry = cfg.build_geometry()
    zmat = assemble_impedance(geometry, cfg.frequency_hz)
    bases = _element_bases(cfg, geometry, zmat, n_modes)
    table = []
    for basis in bases:
        save_basis(basis, str(out / f"basis_elem{basis.element_id}"))
        table.append({"element": basis.element_id,
                      "eigenvalues": [fmt_float(x) for x in basis.eigenvalues],
                      "magnitudes": [fmt_float(abs(x)) for x in basis.eigenvalues]})
    save_json({"frequency_hz": cfg.frequency_hz, "n_modes": n_modes,
               "elements": table, "provenance": provenance(cfg.raw_text)},
              out / "modes.json")
    for row in table:
        mags = ", ".join(f"{float(m):.4g}" for m in row["magnitudes"])
        print(f"element {row['element']}: |lambda| = {mags}")
    return 0


def cmd_assemble(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args.out)
    geometry = cfg.build_geometry()
    zmat = assemble_impedance(geometry, cfg.frequency_hz)
    save_impedance(out / "impedance.mat", zmat)
    sym = float(np.linalg.norm(zmat.entries - zmat.entries.T)
                / np.linalg.norm(zmat.entries))
    save_json({"n_basis": zmat.n, "frequency_hz": cfg.frequency_hz,
               "symmetry_residual": sym,
               "elements": [int(e) for e in geometry.element_ids],
               "provenance": provenance(cfg.raw_text)}, out / "assemble.json")
    print(f"assembled {zmat.n} x {zmat.n} impedance matrix -> {out/'impedance.mat'}")
    return 0


def cmd_couple(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args.out)
    geometry = cfg.build_geometry()
    zmat = assemble_impedance(geometry, cfg.frequency_hz)
    bases = _element_bases(cfg, geometry, zmat, cfg.n_modes)
    g = assemble_coupling(bases, zmat)
    payload = coupling_to_dict(g)
    payload["frequency_hz"] = cfg.frequency_hz
    payload["provenance"] = provenance(cfg.raw_text)
    save_json(payload, out / "coupling.json")
    print(f"coupling matrix for {g.n_elements} elements -> {out/'coupling.json'}")
    return 0


def cmd_solve(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args.out)
    geometry = cfg.build_geometry()
    if geometry.n_ports == 0:
        raise ConfigError("layout has no ports to drive")
    zmat = assemble_impedance(geometry, cfg.frequency_hz)
    model, _ = build_wire_array_model(geometry, cfg.frequency_hz, cfg.n_modes,
                                      cfg.reference_impedance_ohm, zmat=zmat)
    if args.no_coupling:
        model = ArrayModel(model.elements, model.coupling.scaled(0.0),
                           model.bases, model.layout)
    v = _load_drive(args.drive, geometry.n_ports, args.seed)
    blocks = couple(model)
    solution = solve_excitation(model, v)

    report = {
        "frequency_hz": cfg.frequency_hz,
        "n_modes": cfg.n_modes,
        "coupling_disabled": bool(args.no_coupling),
        "drive": complex_vector_to_json(v),
        "reflected": complex_vector_to_json(solution.w),
        "mode_coefficients": [
            complex_vector_to_json(solution.f_element(i))
            for i in range(model.n_elements)
        ],
        "residual_modes": solution.residual_modes,
        "interaction_spectral_radius": blocks.spectral_radius,
        "cuts": [],
    }
    for cut in cfg.cuts:
        field_cut = array_farfield(solution, model.bases, cut)
        csv_path = out / f"pattern_{cut.label}.csv"
        save_cut_csv(csv_path, field_cut)
        circ = circular_components(field_cut)
        report["cuts"].append({
            "label": cut.label, "phi_deg": cut.phi_deg,
            "csv": csv_path.name,
            "xpr_lhcp_db": circ.xpr_db("L"),
            "xpr_rhcp_db": circ.xpr_db("R"),
        })
    if args.oracle:
        direct = direct_solve_oracle(geometry, cfg.frequency_hz, v,
                                     cfg.reference_impedance_ohm, zmat=zmat)
        from .solver import element_currents
        modal_currents = np.concatenate(element_currents(solution))
        stack = np.zeros(geometry.n_basis, dtype=complex)
        offset = 0
        for element in geometry.element_ids:
            idx = geometry.basis_indices_of(element)
            stack[idx] = modal_currents[offset:offset + idx.size]
            offset += idx.size
        w_err = (np.linalg.norm(solution.w - direct.w)
                 / max(np.linalg.norm(direct.w), 1e-300))
        i_err = (np.linalg.norm(stack - direct.currents)
                 / max(np.linalg.norm(direct.currents), 1e-300))
        report["oracle"] = {
            "reflected": complex_vector_to_json(direct.w),
            "w_relative_error": float(w_err),
            "current_relative_error": float(i_err),
        }
    report["provenance"] = provenance(cfg.raw_text)
    save_json(report, out / "solve.json")
    print(f"solved {model.n_elements} elements, {geometry.n_ports} ports "
          f"-> {out/'solve.json'}")
    return 0


def cmd_synth(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args.out)
    if cfg.synthesis.target.size != 2:
        raise ConfigError("synthesis needs a two-mode target")
    geometry = cfg.build_geometry()
    zmat = assemble_impedance(geometry, cfg.frequency_hz)
    bases = _element_bases(cfg, geometry, zmat, cfg.synthesis.target.size)
    g = assemble_coupling(bases, zmat)
    syn_cfg = cfg.synthesis
    if args.max_iter is not None:
        if args.max_iter < 1:
            raise ConfigError("--max-iter must be at least 1")
        from .synthesis import SynthesisConfig
        syn_cfg = SynthesisConfig(syn_cfg.target, syn_cfg.sigma,
                                  syn_cfg.threshold, args.max_iter,
                                  syn_cfg.scatter_convention)
    result = synthesize(g, syn_cfg)
    payload = synthesis_result_to_dict(result)
    payload["provenance"] = provenance(cfg.raw_text)
    save_json(payload, out / "synthesis.json")

    evaluation = evaluate_result(result, g, bases,
                                 cfg.cuts[0] if cfg.cuts else None)
    for cut in cfg.cuts:
        sol_init = evaluation.initial.solution
        sol_syn = evaluation.synthesized.solution
        save_cut_csv(out / f"pattern_initial_{cut.label}.csv",
                     array_farfield(sol_init, bases, cut))
        save_cut_csv(out / f"pattern_synthesized_{cut.label}.csv",
                     array_farfield(sol_syn, bases, cut))
    summary = {
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "modal_suppression_initial_db": evaluation.initial.suppression_db,
        "modal_suppression_synthesized_db": evaluation.synthesized.suppression_db,
        "modal_improvement_db": evaluation.improvement_db,
        "xpr_initial_db": evaluation.initial.xpr_db,
        "xpr_synthesized_db": evaluation.synthesized.xpr_db,
        "provenance": provenance(cfg.raw_text),
    }
    save_json(summary, out / "xpr_summary.json")
    state = "converged" if result.converged else "not converged"
    print(f"synthesis {state} after {result.iterations} iterations; "
          f"modal suppression {evaluation.initial.suppression_db:.1f} dB -> "
          f"{evaluation.synthesized.suppression_db:.1f} dB")
    return 0


def cmd_oracle(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args.out)
    geometry = cfg.build_geometry()
    if geometry.n_ports == 0:
        raise ConfigError("layout has no ports to drive")
    v = _load_drive(args.drive, geometry.n_ports, args.seed)
    direct = direct_solve_oracle(geometry, cfg.frequency_hz, v,
                                 cfg.reference_impedance_ohm)
    save_json({
        "frequency_hz": cfg.frequency_hz,
        "drive": complex_vector_to_json(v),
        "reflected": complex_vector_to_json(direct.w),
        "currents": complex_vector_to_json(direct.currents),
        "provenance": provenance(cfg.raw_text),
    }, out / "oracle.json")
    print(f"dense reference solve of {geometry.n_ports} ports -> {out/'oracle.json'}")
    return 0


_COMMANDS = {
    "modes": cmd_modes,
    "assemble": cmd_assemble,
    "couple": cmd_couple,
    "solve": cmd_solve,
    "synth": cmd_synth,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmsynth",
        description="Mode-based array analysis and cross-polarization synthesis")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for generated test drives")
        if name in ("solve", "oracle"):
            p.add_argument("--drive", default=None,
                           help="JSON file with incident port waves")
        if name == "solve":
            p.add_argument("--no-coupling", action="store_true",
                           help="zero the coupling matrix")
            p.add_argument("--oracle", action="store_true",
                           help="also run the dense reference solve")
        if name == "synth":
            p.add_argument("--max-iter", type=int, default=None)
        if name == "modes":
            p.add_argument("--n-modes", type=int, default=None)
    return parser


def _error_json(kind: str, message: str) -> str:
    return json.dumps({"error": {"kind": kind, "message": message}})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(_error_json("config", str(exc)), file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(_error_json("geometry", str(exc)), file=sys.stderr)
        return 2
    except CmsynthError as exc:
        print(_error_json("numerical", str(exc)), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
