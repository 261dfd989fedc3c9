"""Command line entry point: ``shelab run | run-all | report | plot``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config, load_manifest
from .records import atomic_write, read_summaries, table_csv, write_record

log = logging.getLogger("shelab")

OUTPUT_ENV = "SHELAB_OUTPUT_ROOT"
DEFAULT_OUTPUT = "shelab-results"


def default_outdir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def default_manifest() -> Path:
    return Path(str(resources.files("artifact.cli_harness") / "configs" / "manifest.yaml"))


def _execute(cfg: ExperimentConfig, outdir: str) -> dict:
    from .experiments import run_experiment

    rec = run_experiment(cfg)
    path = write_record(outdir, cfg, rec)
    failed = sorted(k for k, v in rec.checks.items() if not v)
    return {"experiment": cfg.experiment, "name": cfg.name, "config_hash": cfg.config_hash, "verdict": rec.verdict,
            "failed_checks": ";".join(failed), "path": str(path), "wall_time": rec.wall_time}


def run_configs(configs, outdir, jobs: int = 1) -> list:
    """Run configs (concurrently up to ``jobs`` processes) and write the run summary table."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_execute, configs, [str(outdir)] * len(configs)))
    else:
        rows = []
        for cfg in configs:
            log.info("running %s (%s)", cfg.experiment, cfg.config_hash)
            rows.append(_execute(cfg, str(outdir)))
    # wall times stay out of the CSV so reruns give identical bytes
    table = [{k: r[k] for k in ("experiment", "name", "config_hash", "verdict", "failed_checks")} for r in rows]
    atomic_write(outdir / "run_summary.csv", table_csv(table) or "experiment,name,config_hash,verdict,failed_checks\n")
    return rows


def _print_rows(rows, out=None):
    out = out or sys.stdout
    for r in rows:
        extra = f"  [{r['failed_checks']}]" if r.get("failed_checks") else ""
        t = f"  {r['wall_time']:.1f}s" if "wall_time" in r else ""
        print(f"{r['verdict']:<13}{r['experiment']:<16}{r['config_hash']}{t}{extra}", file=out)


def exit_code(rows) -> int:
    return 1 if any(r["verdict"] == "fail" for r in rows) else 0


def _overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    return cfg.with_overrides(args.seed, args.replicas, args.threads)


def cmd_run(args) -> int:
    cfg = _overrides(load_config(args.config), args)
    rows = run_configs([cfg], args.outdir)
    _print_rows(rows)
    return exit_code(rows)


def cmd_run_all(args) -> int:
    manifest = Path(args.manifest) if args.manifest else default_manifest()
    configs = [_overrides(c, args) for c in load_manifest(manifest)]
    rows = run_configs(configs, args.outdir, args.jobs)
    _print_rows(rows)
    print(f"{len(rows)} experiments, {sum(r['verdict'] == 'fail' for r in rows)} failed")
    return exit_code(rows)


def cmd_report(args) -> int:
    summaries = read_summaries(args.outdir)
    rows = []
    for s in summaries:
        failed = sorted(k for k, v in s["checks"].items() if not v)
        rows.append({"experiment": s["experiment"], "config_hash": s["config_hash"], "verdict": s["verdict"],
                     "failed_checks": ";".join(failed), "wall_time": s["wall_time"]})
        if args.verbose:
            for k, v in sorted(s["metrics"].items()):
                print(f"    {s['experiment']}.{k} = {v}")
    _print_rows(rows)
    return exit_code(rows)


def cmd_plot(args) -> int:
    from .plots import plot_outdir

    for p in plot_outdir(args.outdir):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shelab", description="Stochastic heat equation lab")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, run=True):
        p.add_argument("--outdir", type=Path, default=None,
                       help=f"output root (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
        if run:
            p.add_argument("--seed", type=int, default=None, help="override the master seed")
            p.add_argument("--replicas", type=int, default=None, help="override the replica count")
            p.add_argument("--threads", type=int, default=None, help="replica-level worker threads")

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("run-all", help="run every config in a manifest")
    p.add_argument("manifest", nargs="?", default=None, help="manifest YAML (default: the shipped desk-scale one)")
    p.add_argument("--jobs", type=int, default=1, help="experiments run concurrently")
    common(p)
    p.set_defaults(func=cmd_run_all)
    p = sub.add_parser("report", help="summarize stored results")
    p.add_argument("outdir", nargs="?", type=Path, default=None)
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("plot", help="write SVG plots from stored CSVs")
    p.add_argument("outdir", nargs="?", type=Path, default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "outdir", None) is None:
        args.outdir = default_outdir()
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
