"""Multi-seed experiment execution.

Each seed is independent: its ``SeedSequence`` is split into environment,
model-initialisation and agent (exploration + replay sampling) streams. Seeds
may run in worker processes (``QRL_THREADS``); every seed writes its own CSV,
so output is identical for any worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from qvcrl import envs
from qvcrl.agent import EpisodeRecord, train
from qvcrl.errors import ConfigError
from qvcrl.harness.config import RunConfig
from qvcrl.harness.metrics import aggregate_files, write_run_csv
from qvcrl.models import ObsEncoder, QModel, TargetPair
from qvcrl.nn import baseline_sizes

log = logging.getLogger(__name__)


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    env_ss, init_ss, agent_ss = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(s)) for s in (env_ss, init_ss, agent_ss))


def build_model(config: RunConfig, env, rng: np.random.Generator) -> QModel:
    encoder = ObsEncoder(config.resolved_encoder(), config.range_spec())
    if config.model == "pure":
        return QModel.pure(env.obs_len, env.action_count, encoder, rng, config.n_layers,
                           config.resolved_output_scale(), config.ring)
    if config.model == "hybrid":
        return QModel.hybrid(env.obs_len, env.action_count, encoder, rng, config.n_layers, config.ring)
    if config.model.startswith("mlp"):
        return QModel.baseline(baseline_sizes(config.env, int(config.model[3:])), encoder, rng)
    raise ConfigError(f"model {config.model!r} is not trainable")


def run_seed(config: RunConfig, seed: int, out_dir: Path) -> Path:
    env_rng, init_rng, agent_rng = seed_streams(seed)
    env = envs.make_env(config.env, env_rng, config.max_steps)
    if config.model == "random":
        rewards = envs.random_episode_rewards(env, config.episodes, agent_rng)
        records = [EpisodeRecord(i, r, 1.0, float("nan")) for i, r in enumerate(rewards, 1)]
    else:
        model = build_model(config, env, init_rng)
        pair = TargetPair.from_online(model)
        records = train(env, pair, config.trainer_config(), config.schedule(), config.episodes, agent_rng)
        model.save(out_dir / f"{config.run_id}_seed{seed}.model")
    path = out_dir / f"{config.run_id}_seed{seed}.csv"
    write_run_csv(path, config.run_id, seed, records)
    return path


def _run_seed_job(args):
    return run_seed(*args)


def worker_count(default: Optional[int] = None) -> int:
    raw = os.environ.get("QRL_THREADS")
    if raw is None:
        return default or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"QRL_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"QRL_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass
class ExperimentResult:
    run_csvs: list[Path]
    aggregate_csv: Path


def run_experiment(config: RunConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Train (or run the random agent) for every seed; write per-seed and aggregate CSVs."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{config.run_id}.conf").write_text(config.dumps())
    workers = min(threads or worker_count(), len(config.seeds))
    jobs = [(config, seed, out_dir) for seed in config.seeds]
    if workers <= 1:
        paths = []
        for job in jobs:
            log.info("run %s seed %d", config.run_id, job[1])
            paths.append(_run_seed_job(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(_run_seed_job, jobs))
    agg = out_dir / f"{config.run_id}_aggregate.csv"
    if config.episodes >= 50:
        aggregate_files(paths, agg)
    else:
        log.warning("fewer than 50 episodes: no moving-average aggregate written")
        agg.write_text("episode,mean_ma50,ci95_half\n")
    return ExperimentResult(paths, agg)
