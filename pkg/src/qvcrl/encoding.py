"""Observation -> rotation-angle encoders.

Both schemes produce two angles per input (one for RX, one for RZ on the
input's qubit), laid out ``[rx0, rz0, rx1, rz1, ...]`` to match
:func:`qvcrl.circuit.build_encoder`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qvcrl.errors import ConfigError, InputError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RangeSpec:
    """Per-input ``(lo, hi)`` bounds in native units."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ConfigError(f"range lower bound must be < upper bound, got ({lo}, {hi})")

    def __len__(self) -> int:
        return len(self.bounds)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds], dtype=np.float64)

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds], dtype=np.float64)

    @classmethod
    def parse(cls, text: str) -> "RangeSpec":
        """Parse ``"lo:hi,lo:hi,..."``."""
        try:
            pairs = [tuple(float(x) for x in part.split(":")) for part in text.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad range spec {text!r}") from exc
        if any(len(p) != 2 for p in pairs):
            raise ConfigError(f"bad range spec {text!r}, expected lo:hi pairs")
        return cls(tuple(pairs))

    def format(self) -> str:
        return ",".join(f"{lo:g}:{hi:g}" for lo, hi in self.bounds)


# player sum, dealer showing card, usable ace
BLACKJACK_RANGES = RangeSpec(((0.0, 32.0), (1.0, 11.0), (0.0, 1.0)))


def _finite(obs: Sequence[float]) -> np.ndarray:
    arr = np.asarray(obs, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"observation contains non-finite values: {arr}")
    return arr


def scaled_angles(obs: Sequence[float], ranges: RangeSpec) -> np.ndarray:
    """One angle per input: ``2*pi*(clip(v) - lo)/(hi - lo)``."""
    v = _finite(obs)
    if len(v) != len(ranges):
        raise ConfigError(f"observation has {len(v)} values but range spec has {len(ranges)}")
    lo, hi = ranges.lo, ranges.hi
    return TWO_PI * (np.clip(v, lo, hi) - lo) / (hi - lo)


def scaled_encode(obs: Sequence[float], ranges: RangeSpec) -> np.ndarray:
    """Scaled encoding; out-of-range values are clamped to the nearest bound."""
    return np.repeat(scaled_angles(obs, ranges), 2)


def directional_encode(obs: Sequence[float]) -> np.ndarray:
    """Angle ``pi`` for strictly positive inputs, ``0`` otherwise."""
    v = _finite(obs)
    return np.repeat(np.where(v > 0, math.pi, 0.0), 2)


def binary_obs_for_baseline(obs: Sequence[float]) -> np.ndarray:
    """The classical counterpart of :func:`directional_encode`: 1 where ``v > 0``."""
    v = _finite(obs)
    return (v > 0).astype(np.float64)


def minmax_obs_for_baseline(obs: Sequence[float], ranges: RangeSpec) -> np.ndarray:
    """Clamp and normalize to ``[0, 1]`` with the same ranges the scaled encoder uses."""
    return scaled_angles(obs, ranges) / TWO_PI
