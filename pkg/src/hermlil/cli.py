"""Command-line entry point: ``hermlil <subcommand> [--config FILE] [--seed N] ...``.

Exit codes: 0 when every audit passes, 2 when an audit fails, 1 on a usage or
runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import experiments as ex
from .covariance import LagOutOfRangeError, RegimeError
from .hermite import CostCapError
from .distances import CostGuardError
from .sampler import EmbeddingError, build_plan, sample_ensemble, write_paths_csv

EXIT_OK, EXIT_ERROR, EXIT_AUDIT_FAILED = 0, 1, 2

RUNNERS = {
    "variance-table": ex.run_variance_table,
    "cross-cov": ex.run_cross_covariance_audit,
    "distance-decay": ex.run_distance_decay,
    "comparison": ex.run_comparison_check,
    "lil-trajectory": ex.run_lil_trajectory,
    "audit": ex.run_assumption_audit,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file (see README for keys)")
    common.add_argument("--seed", type=int, help="u64 seed (overrides the config)")
    common.add_argument("--out", help="output directory; stdout when omitted")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, help="FFT worker threads")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser = _Parser(prog="hermlil", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(RUNNERS) + ["simulate"]:
        sub.add_parser(name, parents=[common])
    return parser


def load_config(args) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.from_file(args.config) if args.config else ex.ExperimentConfig()
    raw = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v
    if raw:
        merged = {**{k: v for k, v in cfg.__dict__.items()}, **raw}
        cfg = ex.ExperimentConfig.from_mapping(merged)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return cfg.with_overrides(seed=args.seed, threads=args.threads)


def _emit(text: str, out_dir, filename: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, filename), "w", newline="") as fh:
        fh.write(text)


def _write_report(report: ex.AuditReport, fmt: str, out_dir, stem: str) -> None:
    if fmt == "json":
        _emit(report.to_json(), out_dir, f"{stem}.json")
        return
    _emit(report.to_csv(), out_dir, f"{stem}.csv")
    for comp in report.components:
        if out_dir is None:
            sys.stdout.write(f"# {comp.name}\n")
        _write_report(comp, fmt, out_dir, f"{stem}_{comp.name}")


def _simulate(cfg: ex.ExperimentConfig, fmt: str, out_dir) -> None:
    plan = build_plan(cfg.covariance_model(), cfg.simulate_n)
    ens = sample_ensemble(plan, cfg.seed, cfg.simulate_M, workers=cfg.threads)
    if fmt == "csv":
        if out_dir is None:
            write_paths_csv(sys.stdout, ens)
        else:
            os.makedirs(out_dir, exist_ok=True)
            write_paths_csv(os.path.join(out_dir, "simulate.csv"), ens)
        return
    payload = {
        "model": ens.model_name,
        "seed": ens.seed,
        "n": ens.n,
        "embedding_size": plan.embedding_size,
        "paths": [{"replicate": p.replicate, "values": p.values.tolist()} for p in ens],
    }
    _emit(json.dumps(payload, indent=2) + "\n", out_dir, "simulate.json")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args)
    except UsageError as exc:
        print(f"hermlil: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, KeyError, ValueError) as exc:
        print(f"hermlil: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        if args.command == "simulate":
            _simulate(cfg, args.format, args.out)
            return EXIT_OK
        report = RUNNERS[args.command](cfg)
        _write_report(report, args.format, args.out, args.command)
    except (RegimeError, EmbeddingError, CostCapError, CostGuardError, LagOutOfRangeError,
            OverflowError, ValueError, OSError) as exc:
        print(f"hermlil: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print("\n".join(report.lines()), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_AUDIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
