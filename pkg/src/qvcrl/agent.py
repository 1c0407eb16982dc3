"""Replay buffer, epsilon-greedy acting, and the DQN / Q-DDQN training loop.

Training loop, per episode::

    reset, encode s_1
    until the episode ends:
        act epsilon-greedily, observe (r, s'), encode s', store the transition
        [per_step] one minibatch update
    [per_episode] one minibatch update
    if episode % C == 0: target <- online      (hard copy)
    else:                target <- tau*target + (1-tau)*online
    epsilon <- max(eps_min, epsilon * decay)

Minibatch targets:

``qddqn``           ``y = r + gamma * max_a Q_target(s', a)``
``dqn``             ``y = r + gamma * max_a Q_online(s', a)`` (no target network)
``canonical_ddqn``  ``y = r + gamma * Q_target(s', argmax_a Q_online(s', a))``

With terminal masking enabled (default) ``y = r`` on the last transition of an
episode.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from qvcrl.errors import ConfigError, UsageError
from qvcrl.models import QModel, TargetPair, hard_copy, soft_update
from qvcrl.nn import AdamState, adam_step

ALGOS = ("dqn", "qddqn", "canonical_ddqn")
UPDATE_TIMINGS = ("per_episode", "per_step")


@dataclass(frozen=True, eq=False)
class Transition:
    enc_state: np.ndarray
    raw_obs: np.ndarray
    action: int
    reward: float
    enc_next: np.ndarray
    raw_next: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring; the oldest transition is evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items: deque = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def push(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        size = len(self._items)
        if size == 0:
            raise UsageError("cannot sample from an empty replay buffer")
        if size < batch_size:
            return rng.integers(size, size=batch_size)
        return rng.choice(size, size=batch_size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform minibatch: with replacement only while the buffer holds fewer than ``batch_size``."""
        return [self._items[i] for i in self.sample_indices(batch_size, rng)]


@dataclass
class EpsilonSchedule:
    start: float = 1.0
    decay: float = 0.9
    minimum: float = 0.01
    value: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.minimum <= self.start <= 1.0:
            raise ConfigError("epsilon schedule needs 0 <= minimum <= start <= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ConfigError("epsilon decay must lie in (0, 1]")
        self.value = self.start

    def step(self) -> float:
        self.value = max(self.minimum, self.value * self.decay)
        return self.value


@dataclass
class TrainerConfig:
    gamma: float = 0.95
    batch_size: int = 32
    buffer_capacity: int = 10_000
    target_period: int = 10
    tau: float = 0.99
    algo: str = "qddqn"
    update_timing: str = "per_episode"
    terminal_masking: bool = True
    lr_circuit: float = 1e-2
    lr_dense: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.target_period < 1:
            raise ConfigError("target_period (C) must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; expected one of {ALGOS}")
        if self.update_timing not in UPDATE_TIMINGS:
            raise ConfigError(f"unknown update_timing {self.update_timing!r}")


@dataclass
class EpisodeRecord:
    episode: int
    reward: float
    epsilon: float  # value used for action selection during the episode
    loss: float  # mean minibatch loss over the episode's updates, nan if none


def select_action(model: QModel, obs, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest action index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(model.n_actions))
    return int(np.argmax(model.q_values(obs)))


def compute_targets(batch: list[Transition], pair: TargetPair, gamma: float, algo: str,
                    terminal_masking: bool = True) -> np.ndarray:
    rewards = np.array([t.reward for t in batch])
    done = np.array([t.done for t in batch])
    nxt = np.stack([t.raw_next for t in batch])
    if algo == "qddqn":
        bootstrap = pair.target.q_values_batch(nxt).max(axis=1)
    elif algo == "dqn":
        bootstrap = pair.online.q_values_batch(nxt).max(axis=1)
    elif algo == "canonical_ddqn":
        greedy = np.argmax(pair.online.q_values_batch(nxt), axis=1)
        bootstrap = pair.target.q_values_batch(nxt)[np.arange(len(batch)), greedy]
    else:
        raise ConfigError(f"unknown algo {algo!r}")
    y = rewards + gamma * bootstrap
    if terminal_masking:
        y = np.where(done, rewards, y)
    return y


def compute_target(transition: Transition, pair: TargetPair, gamma: float, algo: str,
                   terminal_masking: bool = True) -> float:
    return float(compute_targets([transition], pair, gamma, algo, terminal_masking)[0])


class Trainer:
    """Owns the online/target pair, the replay buffer and one ADAM state per parameter group."""

    def __init__(self, pair: TargetPair, config: TrainerConfig):
        self.pair = pair
        self.config = config
        self.buffer = ReplayBuffer(config.buffer_capacity)
        lrs = {"circuit": config.lr_circuit, "dense": config.lr_dense}
        self.optimizers = {
            name: AdamState(values.size, lr=lrs[name]) for name, values in pair.online.param_groups().items()
        }

    def update(self, rng: np.random.Generator) -> float:
        """Sample a minibatch and take one ADAM step on the mean squared TD error."""
        cfg = self.config
        batch = self.buffer.sample(cfg.batch_size, rng)
        y = compute_targets(batch, self.pair, cfg.gamma, cfg.algo, cfg.terminal_masking)
        online = self.pair.online
        loss, grads = online.loss_and_gradients(
            np.stack([t.raw_obs for t in batch]), [t.action for t in batch], y
        )
        params = online.param_groups()
        online.set_param_groups({
            name: adam_step(self.optimizers[name], params[name], grads[name]) for name in params
        })
        return loss

    def end_episode(self, episode: int) -> None:
        if self.config.algo == "dqn":
            return
        if episode % self.config.target_period == 0:
            hard_copy(self.pair)
        else:
            soft_update(self.pair, self.config.tau)


def train(env, pair: TargetPair, config: TrainerConfig, schedule: EpsilonSchedule, episodes: int,
          rng: np.random.Generator, on_episode: Optional[Callable[[EpisodeRecord], None]] = None
          ) -> list[EpisodeRecord]:
    """Run ``episodes`` episodes of training; episode indices start at 1."""
    trainer = Trainer(pair, config)
    encoder = pair.online.encoder
    records = []
    for episode in range(1, episodes + 1):
        eps = schedule.value
        obs = env.reset()
        enc = encoder.angles(obs)
        total = 0.0
        losses = []
        done = False
        while not done:
            action = select_action(pair.online, obs, eps, rng)
            step = env.step(action)
            enc_next = encoder.angles(step.obs)
            trainer.buffer.push(Transition(enc, obs, action, step.reward, enc_next, step.obs, step.done))
            total += step.reward
            obs, enc, done = step.obs, enc_next, step.done
            if config.update_timing == "per_step":
                losses.append(trainer.update(rng))
        if config.update_timing == "per_episode":
            losses.append(trainer.update(rng))
        trainer.end_episode(episode)
        schedule.step()
        record = EpisodeRecord(episode, total, eps, float(np.mean(losses)) if losses else math.nan)
        records.append(record)
        if on_episode is not None:
            on_episode(record)
    return records


def greedy_rollout(env, model: QModel, episodes: int) -> list[float]:
    """Total reward per episode acting greedily (no exploration)."""
    totals = []
    for _ in range(episodes):
        obs = env.reset()
        total = 0.0
        done = False
        while not done:
            step = env.step(int(np.argmax(model.q_values(obs))))
            total += step.reward
            obs, done = step.obs, step.done
        totals.append(total)
    return totals
