"""CartPole and Blackjack with a shared seeded interface.

All randomness goes through :class:`numpy.random.Generator` backed by PCG64,
whose streams are specified bit-for-bit and portable across platforms, so a
given seed reproduces the same episodes everywhere.

Interface: ``reset() -> obs``, ``step(action) -> EnvStep``, ``action_count``,
``obs_len``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qvcrl.errors import ConfigError, UsageError


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class EnvStep:
    obs: np.ndarray
    reward: float
    done: bool


# -- CartPole ----------------------------------------------------------------

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
TOTAL_MASS = MASS_CART + MASS_POLE
HALF_LENGTH = 0.5
POLEMASS_LENGTH = MASS_POLE * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
X_THRESHOLD = 2.4
THETA_THRESHOLD = 12 * 2 * math.pi / 360


def cartpole_dynamics(state: np.ndarray, action: int) -> np.ndarray:
    """One explicit-Euler step of the cart-pole equations; ``action`` 1 pushes right."""
    x, x_dot, theta, theta_dot = state
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + POLEMASS_LENGTH * theta_dot ** 2 * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t ** 2 / TOTAL_MASS)
    )
    x_acc = temp - POLEMASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    return np.array([
        x + TAU * x_dot,
        x_dot + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
    ])


class CartPole:
    action_count = 2
    obs_len = 4

    def __init__(self, rng: np.random.Generator, max_steps: int = 200):
        if max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        self.rng = rng
        self.max_steps = max_steps
        self.state = np.zeros(4)
        self.steps = 0
        self.done = True

    def reset(self) -> np.ndarray:
        self.state = self.rng.uniform(-0.05, 0.05, size=4)
        self.steps = 0
        self.done = False
        return self.state.copy()

    def step(self, action: int) -> EnvStep:
        if self.done:
            raise UsageError("episode is finished; call reset()")
        if action not in (0, 1):
            raise ConfigError(f"CartPole action must be 0 or 1, got {action}")
        self.state = cartpole_dynamics(self.state, action)
        self.steps += 1
        x, _, theta, _ = self.state
        self.done = bool(
            abs(x) > X_THRESHOLD or abs(theta) > THETA_THRESHOLD or self.steps >= self.max_steps
        )
        return EnvStep(self.state.copy(), 1.0, self.done)


# -- Blackjack ---------------------------------------------------------------

# infinite deck: ace=1, 2..9, and four ten-valued ranks
DECK = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 10, 10, 10)
STICK, HIT = 0, 1


def hand_value(cards) -> tuple[int, bool]:
    """Best value of a hand and whether an ace is counted as 11."""
    total = sum(cards)
    if 1 in cards and total + 10 <= 21:
        return total + 10, True
    return total, False


@dataclass
class Blackjack:
    """Hit/stick Blackjack from an infinite deck; dealer stands on every 17, no natural bonus."""

    rng: np.random.Generator
    player: list = field(default_factory=list)
    dealer: list = field(default_factory=list)
    done: bool = True

    action_count = 2
    obs_len = 3

    def draw(self) -> int:
        return DECK[int(self.rng.integers(len(DECK)))]

    def obs(self) -> np.ndarray:
        total, usable = hand_value(self.player)
        return np.array([total, self.dealer[0], float(usable)], dtype=np.float64)

    def reset(self) -> np.ndarray:
        self.player = [self.draw(), self.draw()]
        self.dealer = [self.draw(), self.draw()]
        self.done = False
        return self.obs()

    def step(self, action: int) -> EnvStep:
        if self.done:
            raise UsageError("hand is finished; call reset()")
        if action == HIT:
            self.player.append(self.draw())
            if hand_value(self.player)[0] > 21:
                self.done = True
                return EnvStep(self.obs(), -1.0, True)
            return EnvStep(self.obs(), 0.0, False)
        if action != STICK:
            raise ConfigError(f"Blackjack action must be 0 (stick) or 1 (hit), got {action}")
        while hand_value(self.dealer)[0] < 17:
            self.dealer.append(self.draw())
        player = hand_value(self.player)[0]
        dealer = hand_value(self.dealer)[0]
        self.done = True
        if dealer > 21 or player > dealer:
            reward = 1.0
        elif player < dealer:
            reward = -1.0
        else:
            reward = 0.0
        return EnvStep(self.obs(), reward, True)


def make_env(name: str, rng: np.random.Generator, max_steps: int = 200):
    if name == "cartpole":
        return CartPole(rng, max_steps)
    if name == "blackjack":
        return Blackjack(rng)
    raise ConfigError(f"unknown environment {name!r}; expected 'cartpole' or 'blackjack'")


def random_episode_rewards(env, episodes: int, rng: np.random.Generator) -> list[float]:
    """Total reward of each episode under uniformly random actions."""
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    totals = []
    for _ in range(episodes):
        env.reset()
        total = 0.0
        done = False
        while not done:
            step = env.step(int(rng.integers(env.action_count)))
            total += step.reward
            done = step.done
        totals.append(total)
    return totals


def run_random_agent(env, episodes: int, rng: np.random.Generator) -> float:
    return float(np.mean(random_episode_rewards(env, episodes, rng)))
