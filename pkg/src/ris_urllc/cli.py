"""Command-line experiment runner.

Subcommands map to the report families:

- ``nmse``: estimation error versus pilot power and element count,
- ``bound``: closed-form rate bound against the Monte-Carlo estimate,
- ``converge``: weighted-sum-rate trace of the alternating optimizer,
- ``optimize``: one full optimization with solution and trace artifacts,
- ``sweep``: rate distribution over random drops for three methods,
- ``gradcheck``: analytic gradients against finite differences,
- ``lemmacheck``: Gaussian matrix-moment identities against Monte Carlo.

Every run writes CSVs with a provenance comment (seed and config hash) plus a
rendered PNG next to each report unless ``--no-plot`` is given. Exit codes:
0 success (an infeasible scenario is a valid result), 1 configuration error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments, plotting
from .config import (
    ConfigError,
    ExperimentConfig,
    config_digest,
    full_scale,
    load_config,
    serialize_config,
)
from .gp import GpStallError
from .scenario import noise_power  # re-exported for interface stability

__all__ = ["main", "noise_power"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-urllc",
        description="Simulator and optimizer for RIS-aided massive-MIMO short-packet downlink",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="INI config path")
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    common.add_argument("--trials", type=int, default=None, help="Monte-Carlo trials (overrides config)")
    common.add_argument("--out", type=str, default="out", help="output directory")
    common.add_argument("--dump", action="store_true", help="dump matrices/realization binaries")
    common.add_argument("--full-scale", action="store_true", help="reference scale: 100 antennas, 1e4 trials")
    common.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("nmse", parents=[common], help="estimation error vs pilot power")
    sub.add_parser("bound", parents=[common], help="rate bound vs Monte Carlo")
    sub.add_parser("converge", parents=[common], help="optimizer convergence trace")
    sub.add_parser("optimize", parents=[common], help="run the alternating optimizer once")
    sweep = sub.add_parser("sweep", parents=[common], help="rate CDF over random drops")
    sweep.add_argument("--drops", type=int, default=None, help="number of drops (overrides config)")
    sweep.add_argument(
        "--jobs",
        type=int,
        default=None,
        help="parallel workers over drops (default: up to 8, one per core)",
    )
    sub.add_parser("gradcheck", parents=[common], help="gradients vs finite differences")
    sub.add_parser("lemmacheck", parents=[common], help="matrix-moment identities vs Monte Carlo")
    return parser


def _load(args) -> tuple[ExperimentConfig, int, int]:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.full_scale:
        cfg = full_scale(cfg)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    return cfg, cfg.seed, cfg.trials


def _provenance(command: str, cfg: ExperimentConfig, seed: int) -> dict:
    return {"tool": "ris-urllc", "command": command, "seed": seed, "config": config_digest(cfg)}


def _write(
    outdir: Path, name: str, rows: list[dict], provenance: dict, header: list[str] | None = None
) -> Path:
    from .reporting import write_csv

    if header is None:
        header = list(rows[0].keys()) if rows else []
    return write_csv(
        outdir / name, header, [[r[h] for h in header] for r in rows], provenance
    )


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, seed, trials = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    provenance = _provenance(args.command, cfg, seed)
    try:
        if args.command == "nmse":
            rows = experiments.run_nmse(cfg, seed, trials)
            _write(outdir, "nmse.csv", rows, provenance)
            if not args.no_plot:
                plotting.plot_nmse(rows, outdir / "nmse.png")
        elif args.command == "bound":
            rows = experiments.run_bound(cfg, seed, trials)
            _write(outdir, "bound.csv", rows, provenance)
            if not args.no_plot:
                plotting.plot_bound(rows, outdir / "bound.png")
        elif args.command == "converge":
            result, _, trace = experiments.run_optimize(cfg, seed)
            _write(outdir, "trace.csv", trace, provenance,
                   header=experiments.trace_header(cfg.users))
            if not result.feasible:
                print("scenario infeasible: feasibility scaling "
                      f"{result.feasibility.gamma_scale:.4f} < 1")
            if not args.no_plot and trace:
                plotting.plot_convergence(trace, outdir / "converge.png")
        elif args.command == "optimize":
            result, solution_rows, trace = experiments.run_optimize(cfg, seed)
            _write(outdir, "result.csv", solution_rows, provenance)
            _write(outdir, "trace.csv", trace, provenance,
                   header=experiments.trace_header(cfg.users))
            theta_rows = [
                {"element": i, "theta_rad": float(t)} for i, t in enumerate(result.theta)
            ]
            _write(outdir, "theta.csv", theta_rows, provenance)
            if not result.feasible:
                print("scenario infeasible: feasibility scaling "
                      f"{result.feasibility.gamma_scale:.4f} < 1; rates reported as zero")
            if not args.no_plot and trace:
                plotting.plot_convergence(trace, outdir / "converge.png")
        elif args.command == "sweep":
            rows = experiments.run_sweep(cfg, seed, drops=args.drops, jobs=args.jobs)
            _write(outdir, "sweep.csv", rows, provenance)
            if not args.no_plot:
                plotting.plot_wsr_cdf(rows, outdir / "sweep.png")
        elif args.command == "gradcheck":
            rows = experiments.run_gradcheck(seed)
            _write(outdir, "gradcheck.csv", rows, provenance)
            worst = max(row["rel_err"] for row in rows)
            print(f"worst relative gradient error: {worst:.3e}")
        elif args.command == "lemmacheck":
            rows = experiments.run_lemmacheck(seed, max(trials, 100_000))
            _write(outdir, "lemmacheck.csv", rows, provenance)
            if not all(row["pass"] for row in rows):
                print("identity check failed", file=sys.stderr)
                return 2
        if args.dump:
            experiments.dump_scenario(cfg, seed, outdir / "dump")
        with open(outdir / "config.ini", "w", encoding="utf-8") as handle:
            handle.write(serialize_config(cfg))
    except GpStallError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
