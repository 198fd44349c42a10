"""Multi-seed aggregation of run logs and plot-data emission.

Runs live at ``<root>/<setting>/seed<k>/runlog.csv``. Aggregation aligns them
by episode and reports the mean and (population) standard deviation across
seeds. Absent runs are listed in ``missing`` and, where no seed covers an
episode, the emitted value is the gap marker ``GAP``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agent import ALGORITHMS
from .config import TrainConfig
from .train import RunLog, run_seed

log = logging.getLogger(__name__)

GAP = "GAP"
SETTINGS = tuple(ALGORITHMS)  # the five compared settings, in the canonical order


@dataclass
class SettingCurves:
    """Episode-aligned statistics for one setting."""

    episodes: np.ndarray
    n_seeds: np.ndarray
    mean: dict  # metric -> array
    std: dict


@dataclass
class Aggregate:
    metrics: list
    curves: dict = field(default_factory=dict)    # setting -> SettingCurves
    missing: list = field(default_factory=list)   # (setting, seed, reason)

    @property
    def settings(self) -> list:
        return list(self.curves)


def metric_names(n_tasks: int) -> list:
    return ["avg_reward"] + [f"score_{i}" for i in range(n_tasks)]


def aggregate_logs(logs: dict, n_tasks: int | None = None) -> Aggregate:
    """Aggregate ``{setting: {seed: RunLog | None}}``; ``None`` marks a missing run."""
    if n_tasks is None:
        found = [lg.n_tasks for runs in logs.values() for lg in runs.values() if lg is not None]
        n_tasks = found[0] if found else 0
    metrics = metric_names(n_tasks)
    agg = Aggregate(metrics)
    for setting, runs in logs.items():
        present = {}
        for seed, lg in runs.items():
            if lg is None:
                agg.missing.append((setting, seed, "no run log"))
            else:
                present[seed] = {int(r["episode"]): r for r in lg.records}
        episodes = sorted({e for recs in present.values() for e in recs})
        n = np.zeros(len(episodes), dtype=int)
        mean = {m: np.full(len(episodes), np.nan) for m in metrics}
        std = {m: np.full(len(episodes), np.nan) for m in metrics}
        for k, ep in enumerate(episodes):
            rows = [recs[ep] for recs in present.values() if ep in recs]
            n[k] = len(rows)
            for m in metrics:
                values = np.array([r[m] for r in rows], dtype=np.float64)
                # shifted by the first sample so identical runs give exactly that value and zero spread
                d = values - values[0]
                mean[m][k] = values[0] + d.mean()
                std[m][k] = d.std()
        agg.curves[setting] = SettingCurves(np.array(episodes, dtype=int), n, mean, std)
    return agg


def collect_logs(root, settings, seeds) -> dict:
    """Read every ``(setting, seed)`` run log under ``root``; unreadable runs become ``None``."""
    out = {}
    for setting in settings:
        out[setting] = {}
        for seed in seeds:
            d = Path(root) / setting / f"seed{seed}"
            try:
                out[setting][seed] = RunLog.read(d)
            except (OSError, ValueError, KeyError) as exc:
                log.warning("run %s seed %s unavailable: %s", setting, seed, exc)
                out[setting][seed] = None
    return out


def discover_runs(root) -> tuple[list, list]:
    """Settings and seeds present under ``root`` (directories named like runs)."""
    root = Path(root)
    settings = sorted(p.name for p in root.iterdir() if p.is_dir() and p.name in ALGORITHMS)
    settings = [s for s in SETTINGS if s in settings]
    seeds = set()
    for s in settings:
        for p in (root / s).iterdir():
            if p.is_dir() and p.name.startswith("seed") and p.name[4:].lstrip("-").isdigit():
                seeds.add(int(p.name[4:]))
    return settings, sorted(seeds)


def run_matrix(config: TrainConfig, settings=None, seeds=None, train: bool = True) -> Aggregate:
    """Train every (setting, seed) pair, then aggregate whatever logs exist on disk."""
    settings = list(settings or SETTINGS)
    seeds = list(seeds if seeds is not None else config.seeds)
    if not settings or not seeds:
        raise ValueError("run_matrix needs at least one setting and one seed")
    for s in settings:
        if s not in ALGORITHMS:
            raise ValueError(f"unknown setting {s!r}")
    if train:
        for setting in settings:
            cfg = config.replace(algorithm=setting)
            for seed in seeds:
                run_seed(cfg, seed, write=True)
    agg = aggregate_logs(collect_logs(config.output_dir, settings, seeds))
    write_aggregate(agg, Path(config.output_dir) / "matrix")
    return agg


# -- files --------------------------------------------------------------------------------

def _cell(x) -> str:
    return GAP if math.isnan(x) else repr(float(x))


def _parse(x: str) -> float:
    return math.nan if x == GAP else float(x)


def aggregate_columns(metrics) -> list:
    cols = ["setting", "episode", "n_seeds"]
    for m in metrics:
        cols += [f"{m}_mean", f"{m}_std"]
    return cols


def write_aggregate(agg: Aggregate, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(aggregate_columns(agg.metrics))
        for setting, c in agg.curves.items():
            for k, ep in enumerate(c.episodes):
                row = [setting, int(ep), int(c.n_seeds[k])]
                for m in agg.metrics:
                    row += [_cell(c.mean[m][k]), _cell(c.std[m][k])]
                w.writerow(row)
    with open(d / "missing_runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["setting", "seed", "reason"])
        w.writerows(agg.missing)
    emit_plots(agg, d / "plots")
    return d


def read_aggregate(directory) -> Aggregate:
    d = Path(directory)
    with open(d / "aggregate.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    metrics = [c[:-5] for c in header[3::2]]
    agg = Aggregate(metrics)
    by_setting: dict = {}
    for row in rows:
        by_setting.setdefault(row[0], []).append(row)
    for setting, rs in by_setting.items():
        mean = {m: np.array([_parse(r[3 + 2 * j]) for r in rs]) for j, m in enumerate(metrics)}
        std = {m: np.array([_parse(r[4 + 2 * j]) for r in rs]) for j, m in enumerate(metrics)}
        agg.curves[setting] = SettingCurves(np.array([int(r[1]) for r in rs]),
                                            np.array([int(r[2]) for r in rs]), mean, std)
    missing = d / "missing_runs.csv"
    if missing.exists():
        with open(missing, newline="") as fh:
            agg.missing = [(r["setting"], int(r["seed"]), r["reason"]) for r in csv.DictReader(fh)]
    return agg


def emit_plots(agg: Aggregate, directory) -> list:
    """One CSV per panel: ``episode`` then ``<setting>_mean, <setting>_std`` for each setting."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    settings = agg.settings
    all_eps = sorted({int(e) for c in agg.curves.values() for e in c.episodes})
    paths = []
    for m in agg.metrics or ["avg_reward"]:
        path = d / f"{m}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode"] + [f"{s}_{stat}" for s in settings for stat in ("mean", "std")])
            index = {s: {int(e): k for k, e in enumerate(agg.curves[s].episodes)} for s in settings}
            for ep in all_eps:
                row = [ep]
                for s in settings:
                    k = index[s].get(ep)
                    c = agg.curves[s]
                    if k is None or m not in c.mean:
                        row += [GAP, GAP]
                    else:
                        row += [_cell(c.mean[m][k]), _cell(c.std[m][k])]
                w.writerow(row)
        paths.append(path)
    return paths


def read_panel(path) -> dict:
    """Parse a panel file back into ``{column: array}`` (gaps become NaN)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {h: np.array([_parse(r[j]) for r in rows], dtype=np.float64) for j, h in enumerate(header)}
    return out
