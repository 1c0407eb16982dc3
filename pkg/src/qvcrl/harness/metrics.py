"""Episode CSVs, moving averages, and cross-seed confidence intervals."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from qvcrl.agent import EpisodeRecord
from qvcrl.errors import ConfigError

RUN_HEADER = ["run_id", "seed", "episode", "reward", "epsilon", "loss"]
AGG_HEADER = ["episode", "mean_ma50", "ci95_half"]
WINDOW = 50
Z95 = 1.96


def _fmt(x: float) -> str:
    return "" if x is None or math.isnan(x) else repr(float(x))


def write_run_csv(path, run_id: str, seed: int, records: Sequence[EpisodeRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_HEADER)
        for r in records:
            w.writerow([run_id, seed, r.episode, _fmt(r.reward), _fmt(r.epsilon), _fmt(r.loss)])


def read_run_csv(path) -> tuple[str, int, np.ndarray]:
    """Returns ``(run_id, seed, rewards)`` with rewards ordered by episode."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path} has no episode rows")
    rows.sort(key=lambda r: int(r["episode"]))
    episodes = [int(r["episode"]) for r in rows]
    if episodes != list(range(1, len(rows) + 1)):
        raise ConfigError(f"{path}: episode indices must be contiguous from 1")
    return rows[0]["run_id"], int(rows[0]["seed"]), np.array([float(r["reward"]) for r in rows])


def moving_average(series: Sequence[float], window: int = WINDOW) -> np.ndarray:
    """Trailing mean; entry ``j`` covers episodes ``j+1 .. j+window`` (only complete windows)."""
    if window < 1:
        raise ConfigError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    if len(x) < window:
        return np.zeros(0)
    return np.lib.stride_tricks.sliding_window_view(x, window).mean(axis=1)


@dataclass
class AggregateStats:
    episodes: np.ndarray  # 1-based episode index of each entry
    mean: np.ndarray
    ci95_half: np.ndarray  # nan when fewer than 2 seeds


def aggregate_ci95(per_seed: Sequence[Sequence[float]], window: int = WINDOW) -> AggregateStats:
    """Moving-average each seed's series, then mean and 95% CI half-width across seeds."""
    if not per_seed:
        raise ConfigError("need at least one series")
    length = min(len(s) for s in per_seed)
    ma = np.stack([moving_average(np.asarray(s)[:length], window) for s in per_seed])
    k = ma.shape[0]
    mean = ma.mean(axis=0)
    if k < 2:
        warnings.warn("confidence interval undefined for a single seed; emitting the mean only", stacklevel=2)
        half = np.full_like(mean, np.nan)
    else:
        half = Z95 * ma.std(axis=0, ddof=1) / math.sqrt(k)
    return AggregateStats(np.arange(window, window + ma.shape[1]), mean, half)


def write_aggregate_csv(path, stats: AggregateStats) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for e, m, h in zip(stats.episodes, stats.mean, stats.ci95_half):
            w.writerow([int(e), _fmt(m), _fmt(h)])


def read_aggregate_csv(path) -> AggregateStats:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or list(rows[0].keys()) != AGG_HEADER:
        raise ConfigError(f"{path} is not an aggregate CSV ({','.join(AGG_HEADER)})")
    return AggregateStats(
        np.array([int(r["episode"]) for r in rows]),
        np.array([float(r["mean_ma50"]) for r in rows]),
        np.array([float(r["ci95_half"]) if r["ci95_half"] else math.nan for r in rows]),
    )


def aggregate_files(run_csvs: Sequence, out_path) -> AggregateStats:
    """Recompute the aggregate from per-seed CSVs on disk (idempotent)."""
    series = [read_run_csv(p)[2] for p in run_csvs]
    stats = aggregate_ci95(series)
    write_aggregate_csv(out_path, stats)
    return stats


def final_moving_averages(run_csvs: Sequence, window: int = WINDOW) -> list[float]:
    """Last complete ``window``-episode mean of each per-seed CSV."""
    return [float(moving_average(read_run_csv(p)[2], window)[-1]) for p in run_csvs]
