"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.
Every invocation writes ``manifest.json`` next to its outputs.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import __version__
from .agents import Placement, PlacementMode
from .engine import SimConfig, run_replications, write_states_csv, write_trajectories_csv
from .errors import InvalidParameterError
from .experiments import (
    EXPERIMENTS,
    bench_heterogeneity,
    bench_perturbation,
    bench_stability,
    bench_topology,
)
from .ingest import build_binned_series, empirical_p1_p2, empirical_p3, empirical_p4, load_log

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3
BENCHMARKS = ("stability", "perturbation", "heterogeneity", "topology")
BENCH_KEYS = {"inject_count", "inject_bias", "at_step", "compositions", "topologies"}

log = logging.getLogger("mass_sim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def load_config(path, seed: int | None = None) -> tuple[SimConfig, dict]:
    """Parse a YAML config into a :class:`SimConfig` plus the optional
    ``benchmark`` section."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"{p}: top level must be a mapping")
    bench = raw.pop("benchmark", None) or {}
    if not isinstance(bench, dict):
        raise UsageError("benchmark section must be a mapping")
    extra = set(bench) - BENCH_KEYS
    if extra:
        raise UsageError(f"unknown benchmark keys: {sorted(extra)}")
    if seed is not None:
        raw["master_seed"] = seed
    try:
        cfg = SimConfig.from_dict(raw)
    except (InvalidParameterError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc
    return cfg, bench


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _write_manifest(out: Path, argv: list[str], resolved: dict, seed, paths: list[Path]) -> Path:
    manifest = {
        "command": argv,
        "config_hash": _hash(resolved),
        "master_seed": seed,
        "output_paths": sorted(str(p.relative_to(out)) for p in paths),
        "tool_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args, argv) -> int:
    cfg, _ = load_config(args.config, args.seed)
    out = _out_dir(args.out)
    trajs = run_replications(cfg, workers=args.workers)
    paths = []
    for tr in trajs:
        p = out / f"trajectory_rep{tr.replication_index:03d}.csv"
        write_trajectories_csv([tr], p)
        paths.append(p)
    if args.states:
        p = out / "states.csv"
        write_states_csv(trajs, p)
        paths.append(p)
    summary = {
        "config": cfg.to_dict(),
        "replications": [
            {
                "replication": tr.replication_index,
                "final_phi_mean": tr.snapshots[-1].phi_mean,
                "final_phi_var": tr.snapshots[-1].phi_var,
                "final_edge_count": tr.snapshots[-1].edge_count,
            }
            for tr in trajs
        ],
    }
    p = out / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    paths.append(p)
    _write_manifest(out, argv, cfg.to_dict(), cfg.master_seed, paths)
    return EXIT_OK


def cmd_experiment(args, argv) -> int:
    which = args.which.lower()
    if which not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {args.which!r}; choose from {sorted(EXPERIMENTS)}")
    cfg, _ = load_config(args.config, args.seed)
    out = _out_dir(args.out)
    report = EXPERIMENTS[which](cfg)
    paths = report.write(out, which)
    _write_manifest(out, argv, cfg.to_dict(), cfg.master_seed, paths)
    return EXIT_OK


def _compositions(raw) -> list[Placement]:
    if raw is None:
        return [Placement(), Placement(PlacementMode.HUBS, 10)]
    try:
        return [Placement(PlacementMode(c.get("mode", "none")), int(c.get("count", 0))) for c in raw]
    except (AttributeError, ValueError, InvalidParameterError) as exc:
        raise UsageError(f"invalid compositions: {exc}") from exc


def cmd_benchmark(args, argv) -> int:
    which = args.which.lower()
    if which not in BENCHMARKS:
        raise UsageError(f"unknown benchmark {args.which!r}; choose from {list(BENCHMARKS)}")
    cfg, bench = load_config(args.config, args.seed)
    out = _out_dir(args.out)
    try:
        if which == "stability":
            report = bench_stability(cfg)
        elif which == "perturbation":
            report = bench_perturbation(
                cfg,
                inject_count=int(bench.get("inject_count", 10)),
                inject_bias=float(bench.get("inject_bias", 1.0)),
                at_step=int(bench.get("at_step", min(10, cfg.T - 1))),
            )
        elif which == "heterogeneity":
            report = bench_heterogeneity(cfg, _compositions(bench.get("compositions")))
        else:
            topos = bench.get("topologies") or [{"kind": "BA", "m": 3}, {"kind": "WS", "k": 6, "p": 0.08}]
            report = bench_topology(cfg, topos)
    except InvalidParameterError as exc:
        raise UsageError(str(exc)) from exc
    paths = report.write(out, which)
    resolved = {**cfg.to_dict(), "benchmark": bench}
    _write_manifest(out, argv, resolved, cfg.master_seed, paths)
    return EXIT_OK


def cmd_analyze(args, argv) -> int:
    lp = Path(args.log)
    if not lp.is_file():
        raise UsageError(f"log file not found: {lp}")
    if args.bin_seconds <= 0:
        raise UsageError("--bin-seconds must be positive")
    try:
        records = load_log(lp)
    except InvalidParameterError as exc:
        raise UsageError(str(exc)) from exc
    if not records:
        raise UsageError("no records")
    series = build_binned_series(records, args.bin_seconds)
    if series.dangling:
        print(f"warning: {series.dangling} repl(y/ies) reference parents missing from the log", file=sys.stderr)
    out = _out_dir(args.out)
    p1, p2 = empirical_p1_p2(series)
    reports = [("p1", p1), ("p2", p2)]
    if len(series.bins) >= 2:
        reports += [("p3", empirical_p3(series)), ("p4", empirical_p4(series))]
    else:
        print("warning: single bin; P3 and P4 need at least two bins", file=sys.stderr)
    paths = []
    for stem, rep in reports:
        paths += rep.write(out, stem)
    resolved = {
        "log_sha256": hashlib.sha256(lp.read_bytes()).hexdigest(),
        "bin_seconds": args.bin_seconds,
        "records": len(records),
        "malformed": records.malformed,
    }
    _write_manifest(out, argv, resolved, None, paths)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mass-sim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="YAML configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")

    p = sub.add_parser("simulate", help="run all replications and dump trajectories")
    common(p)
    p.add_argument("--states", action="store_true", help="also write every agent's stance per step")
    p.add_argument("--workers", type=int, default=None, help="process-pool size for replications")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run a structural-prior experiment")
    p.add_argument("which", help="p1 | p2 | p3 | p4")
    common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("benchmark", help="run a benchmark scenario")
    p.add_argument("which", help=" | ".join(BENCHMARKS))
    common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("analyze", help="analyze an interaction log")
    p.add_argument("--log", required=True, help=".jsonl or .csv interaction log")
    p.add_argument("--bin-seconds", type=int, default=86400)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
