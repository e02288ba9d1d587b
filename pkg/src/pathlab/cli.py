"""Command-line interface.

Subcommands: propagate, sample, coherence, prune, select, relax,
double-slit, compare. Every subcommand takes --config, --out, --seed,
--format. Exit codes: 0 success, 1 validation/usage error, 2 numeric
failure, 3 failed acceptance check in compare.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, load_config
from .ensemble import decoherence_measure, select_coherent_ensemble
from .errors import NumericFailureError, ValidationError
from .experiments import (histogram_gof, propagate_by_method, run_double_slit,
                          run_oracle_comparison)
from .propagators import pathsum_propagate
from .pruning import prune_cancelling_pairs
from .relaxation import relax_coherence
from .sampling import EndpointSpec, sample_paths

_FORMATS = {
    "propagate": ("csv", "json"),
    "sample": ("jsonl",),
    "coherence": ("json",),
    "prune": ("json",),
    "select": ("jsonl",),
    "relax": ("jsonl",),
    "double-slit": ("csv",),
    "compare": ("json",),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise ValidationError(f"{message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pathlab",
                     description="Lattice path-sum and trajectory-ensemble runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("propagate", "evolve the configured packet and write the field"),
        ("sample", "sample a trajectory ensemble"),
        ("coherence", "intersection/decoherence report for an ensemble"),
        ("prune", "drop cancelling contribution pairs per arrival cell"),
        ("select", "keep members coherent with the propagated target"),
        ("relax", "gradient-descent phase relaxation of an ensemble"),
        ("double-slit", "windowed two-slit run: screen, histogram, fringes"),
        ("compare", "oracle triangle plus selection pipeline, pass/fail"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config (INI)")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed from the config")
        p.add_argument("--format", default=None, choices=("csv", "json", "jsonl"),
                       help="output format where the subcommand supports it")
        if name == "propagate":
            p.add_argument("--method", default=None,
                           choices=("pathsum", "cn", "free-kernel", "imaginary"))
        if name in ("coherence", "prune", "select", "relax"):
            p.add_argument("--in", dest="input", default=None,
                           help="trajectory JSONL input (default: sample fresh)")
        if name == "coherence":
            p.add_argument("--full-events", action="store_true",
                           help="do not cap the per-event list in the report")
    return parser


def _resolve_format(args) -> str:
    allowed = _FORMATS[args.command]
    fmt = args.format or allowed[0]
    if fmt not in allowed:
        raise ValidationError(
            f"--format {fmt} is not supported by {args.command} "
            f"(allowed: {', '.join(allowed)})")
    return fmt


def _load_cfg(args) -> ExperimentConfig:
    path = Path(args.config)
    if not path.exists():
        raise ValidationError(f"--config path does not exist: {path}")
    cfg = load_config(path)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _meta(cfg: ExperimentConfig, command: str) -> dict:
    return {"command": command, "config_sha256": cfg.sha256, "seed": cfg.seed}


def _emit(text: str, out, cfg, command) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
        io.write_meta_sidecar(out, _meta(cfg, command))


def _ensemble_for(cfg: ExperimentConfig, args, grid, lag):
    if getattr(args, "input", None):
        return io.read_ensemble_jsonl(args.input, grid)
    end = None
    if cfg.endpoints == "bridge":
        end = pathsum_propagate(cfg.packet(grid), lag, grid)
    return sample_paths(cfg.packet(grid), cfg.n_paths, cfg.seed, lag=lag,
                        grid=grid, endpoints=EndpointSpec(end=end),
                        step_scale=cfg.step_scale, max_hop=cfg.max_hop,
                        n_workers=cfg.workers)


def _field_text(field, fmt) -> str:
    if fmt == "csv":
        return io.field_to_csv(field)
    x = field.grid.cell_centers()
    return io.report_to_json({
        "x": x, "re": field.amplitudes.real, "im": field.amplitudes.imag,
        "time_index": field.time_index,
    })


def _cmd_propagate(cfg, args, fmt) -> int:
    grid = cfg.grid()
    lag = cfg.lagrangian(grid)
    method = getattr(args, "method", None) or cfg.method
    field = propagate_by_method(cfg.packet(grid), lag, grid, method)
    _emit(_field_text(field, fmt), args.out, cfg, "propagate")
    return 0


def _cmd_sample(cfg, args, fmt) -> int:
    grid = cfg.grid()
    ens = _ensemble_for(cfg, args, grid, cfg.lagrangian(grid))
    _emit(io.ensemble_to_jsonl(ens), args.out, cfg, "sample")
    return 0


def _cmd_coherence(cfg, args, fmt) -> int:
    grid = cfg.grid()
    ens = _ensemble_for(cfg, args, grid, cfg.lagrangian(grid))
    report = decoherence_measure(ens)
    cap = None if args.full_events else 100
    events = [{"time_index": ev.time_index, "cell": ev.cell,
               "n_participants": len(ev.participants),
               "raw": report.per_event_raw[i],
               "smooth": report.per_event_smooth[i]}
              for i, ev in enumerate(report.events[:cap])]
    _emit(io.report_to_json({
        "config_sha256": cfg.sha256, "seed": cfg.seed,
        "raw_measure": report.raw_measure,
        "smooth_measure": report.smooth_measure,
        "n_events": report.n_events,
        "events_capped": not args.full_events and report.n_events > 100,
        "events": events,
    }), args.out, cfg, "coherence")
    return 0


def _cmd_prune(cfg, args, fmt) -> int:
    grid = cfg.grid()
    ens = _ensemble_for(cfg, args, grid, cfg.lagrangian(grid))
    arrivals = ens.position_matrix[:, -1]
    phases = ens.phase_matrix[:, -1]
    weights = np.array([abs(m.amplitude_weight) for m in ens.members])
    cells = []
    total_removed = 0
    total_bound = 0.0
    for cell in np.unique(arrivals):
        idx = np.flatnonzero(arrivals == cell)
        contributions = list(zip(phases[idx], weights[idx]))
        result = prune_cancelling_pairs(contributions, cfg.eps_phase, cfg.eps_mag)
        total_removed += result.n_removed
        total_bound += result.residual_bound
        cells.append({"cell": int(cell), "n": len(idx),
                      "removed": result.n_removed,
                      "residual_bound": result.residual_bound})
    _emit(io.report_to_json({
        "config_sha256": cfg.sha256, "seed": cfg.seed,
        "eps_phase": cfg.eps_phase, "eps_mag": cfg.eps_mag,
        "total_removed": total_removed, "total_residual_bound": total_bound,
        "cells": cells,
    }), args.out, cfg, "prune")
    return 0


def _cmd_select(cfg, args, fmt) -> int:
    grid = cfg.grid()
    lag = cfg.lagrangian(grid)
    ens = _ensemble_for(cfg, args, grid, lag)
    target = pathsum_propagate(cfg.packet(grid), lag, grid)
    kept = select_coherent_ensemble(target, ens, cfg.epsilon, cfg.mag_floor_rel)
    _emit(io.ensemble_to_jsonl(kept), args.out, cfg, "select")
    return 0


def _cmd_relax(cfg, args, fmt) -> int:
    grid = cfg.grid()
    ens = _ensemble_for(cfg, args, grid, cfg.lagrangian(grid))
    result = relax_coherence(ens, max_steps=cfg.relax_max_steps)
    _emit(io.ensemble_to_jsonl(result.ensemble), args.out, cfg, "relax")
    if args.out is not None:
        io.write_json_report({
            "history": result.history, "converged": result.converged,
            "n_steps": result.n_steps, "grad_inf_norm": result.grad_inf_norm,
            "config_sha256": cfg.sha256, "seed": cfg.seed,
        }, str(args.out) + ".history.json")
    return 0


def _cmd_double_slit(cfg, args, fmt) -> int:
    if args.out is None:
        raise ValidationError("double-slit writes several files; pass --out")
    result = run_double_slit(cfg)
    out = Path(args.out)
    io.write_field_csv(result.psi_screen, out)
    io.write_meta_sidecar(out, _meta(cfg, "double-slit"))
    stem = out.with_suffix("")
    x = result.psi_screen.grid.cell_centers()
    io.write_histogram_csv(x, result.histogram.counts,
                           Path(str(stem) + "_histogram.csv"))
    chi2, dof, pvalue = histogram_gof(result.histogram, result.psi_screen)
    f = result.fringes
    io.write_json_report({
        "config_sha256": cfg.sha256, "seed": cfg.seed, "shots": cfg.shots,
        "visibility": f.visibility, "centroid": f.centroid,
        "region": list(f.region), "peaks": list(f.peaks),
        "spacing_measured": f.spacing_measured,
        "spacing_predicted": f.spacing_predicted,
        "histogram_gof": {"chi2": chi2, "dof": dof, "pvalue": pvalue},
    }, Path(str(stem) + "_fringes.json"))
    return 0


def _cmd_compare(cfg, args, fmt) -> int:
    report = run_oracle_comparison(cfg)
    _emit(io.report_to_json(report), args.out, cfg, "compare")
    return 0 if report["pass"] else 3


_COMMANDS = {
    "propagate": _cmd_propagate,
    "sample": _cmd_sample,
    "coherence": _cmd_coherence,
    "prune": _cmd_prune,
    "select": _cmd_select,
    "relax": _cmd_relax,
    "double-slit": _cmd_double_slit,
    "compare": _cmd_compare,
}


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        fmt = _resolve_format(args)
        cfg = _load_cfg(args)
        return _COMMANDS[args.command](cfg, args, fmt)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericFailureError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
