"""Command-line driver: ``digrad train|matrix|eval|plots``.

``DIGRAD_OUTPUT_ROOT`` overrides the config's ``output_dir``. Exit status is
0 on success, 2 for configuration or usage errors and 1 for anything else;
diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .matrix import SETTINGS, aggregate_logs, collect_logs, discover_runs, run_matrix, write_aggregate
from .train import evaluate, run_training

OUTPUT_ROOT_ENV = "DIGRAD_OUTPUT_ROOT"

log = logging.getLogger("digrad")


def _load(path):
    config = load_config(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        config = config.replace(output_dir=root)
    return config


def _parse_list(text, cast=str):
    return [cast(x) for x in text.split(",") if x.strip()] if text else None


def cmd_train(args) -> int:
    config = _load(args.config)
    if args.seeds:
        config = config.replace(seeds=_parse_list(args.seeds, int))
    logs = run_training(config)
    for seed, lg in logs.items():
        last = lg.evals[-1] if lg.evals else None
        summary = "no evaluation" if last is None else f"final success rate {last['success_rate']:.2f}"
        print(f"{config.algorithm} seed {seed}: {len(lg.records)} episodes, {lg.status}, {summary}")
    aborted = [s for s, lg in logs.items() if lg.status != "ok"]
    return 1 if aborted else 0


def cmd_matrix(args) -> int:
    config = _load(args.config)
    settings = _parse_list(args.settings) or list(SETTINGS)
    seeds = _parse_list(args.seeds, int) or config.seeds
    agg = run_matrix(config, settings, seeds, train=not args.aggregate_only)
    out = Path(config.output_dir) / "matrix"
    print(f"aggregated {len(agg.settings)} settings over seeds {seeds} into {out}")
    if agg.missing:
        print(f"{len(agg.missing)} runs missing, see {out / 'missing_runs.csv'}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    stats = evaluate(args.checkpoint, args.env, episodes=args.episodes, seed=args.seed,
                     max_steps=args.max_steps)
    print("task,mean_error,median_error,mean_score")
    for i in range(len(stats.mean_error)):
        print(f"{i},{stats.mean_error[i]:.6g},{stats.median_error[i]:.6g},{stats.mean_score[i]:.6g}")
    print(f"success_rate,{stats.success_rate:.6g}")
    return 0


def cmd_plots(args) -> int:
    root = Path(args.run_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"run directory {str(root)!r} does not exist")
    settings, seeds = discover_runs(root)
    if not settings:
        raise FileNotFoundError(f"no setting directories under {str(root)!r}")
    agg = aggregate_logs(collect_logs(root, settings, seeds))
    out = write_aggregate(agg, Path(args.out) if args.out else root / "matrix")
    print(f"wrote plot data for {len(settings)} settings to {out / 'plots'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="digrad", description="Train and evaluate DiGrad and DDPG agents.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)

    t = sub.add_parser("train", help="train one setting over the config's seeds")
    t.add_argument("config")
    t.add_argument("--seeds", help="comma-separated seeds overriding the config")
    t.set_defaults(func=cmd_train)

    m = sub.add_parser("matrix", help="train and aggregate several settings")
    m.add_argument("config")
    m.add_argument("--settings", help="comma-separated algorithm tags (default: all five)")
    m.add_argument("--seeds", help="comma-separated seeds overriding the config")
    m.add_argument("--aggregate-only", action="store_true", help="skip training, aggregate existing runs")
    m.set_defaults(func=cmd_matrix)

    e = sub.add_parser("eval", help="noiseless evaluation of a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("env", help="built-in tree name or tree file")
    e.add_argument("--episodes", type=int, default=20)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--max-steps", type=int, default=200)
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plots", help="aggregate the runs under a directory and emit plot data")
    pl.add_argument("run_dir")
    pl.add_argument("--out", help="output directory (default: <run_dir>/matrix)")
    pl.set_defaults(func=cmd_plots)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"digrad: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"digrad: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
