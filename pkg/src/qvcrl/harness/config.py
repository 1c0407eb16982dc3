"""Run configuration: flat ``key = value`` files, every key overridable from the CLI."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from qvcrl.agent import ALGOS, UPDATE_TIMINGS, EpsilonSchedule, TrainerConfig
from qvcrl.encoding import BLACKJACK_RANGES, RangeSpec
from qvcrl.errors import ConfigError

ENVS = ("cartpole", "blackjack")
MODELS = ("pure", "hybrid", "mlp1", "mlp2", "mlp3", "random")
DEFAULT_SEEDS = (1, 2, 3, 4, 5, 6)
# Discounted CartPole returns at gamma 0.95 sit near 20, so Q = 20 * <Z> spans them.
CARTPOLE_PURE_SCALE = 20.0


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"1,2,5"`` or ``"1-6"`` (or a mix, ``"1-3,7"``)."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError as exc:
            raise ConfigError(f"bad seed list {text!r}") from exc
    return tuple(seeds)


def parse_bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass
class RunConfig:
    env: str = "cartpole"
    model: str = "pure"
    algo: str = "qddqn"
    episodes: int = 500
    seeds: tuple = DEFAULT_SEEDS
    out_dir: str = "runs"
    label: str = ""
    # trainer
    gamma: float = 0.95
    batch_size: int = 32
    buffer_capacity: int = 10_000
    target_period: int = 10
    tau: float = 0.99
    update_timing: str = "per_episode"
    terminal_masking: bool = True
    lr_circuit: float = 1e-2
    lr_dense: float = 1e-3
    eps_start: float = 1.0
    eps_decay: float = 0.9
    eps_min: float = 0.01
    # model / encoding; empty or negative means "environment default"
    n_layers: int = 3
    ring: bool = False
    encoder: str = ""
    ranges: str = ""
    output_scale: float = -1.0
    # environment
    max_steps: int = 200

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.env not in ENVS:
            raise ConfigError(f"unknown env {self.env!r}; expected one of {ENVS}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; expected one of {ALGOS}")
        if self.update_timing not in UPDATE_TIMINGS:
            raise ConfigError(f"unknown update_timing {self.update_timing!r}")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {self.seeds}")
        if self.encoder not in ("", "scaled", "directional"):
            raise ConfigError(f"unknown encoder {self.encoder!r}")
        if self.resolved_encoder() == "scaled" and self.env == "cartpole" and not self.ranges:
            raise ConfigError("scaled encoding on cartpole needs explicit ranges")
        self.range_spec()
        self.trainer_config()
        self.schedule()

    @property
    def run_id(self) -> str:
        return self.label or f"{self.env}-{self.model}-{self.algo}"

    def resolved_encoder(self) -> str:
        if self.encoder:
            return self.encoder
        return "directional" if self.env == "cartpole" else "scaled"

    def range_spec(self) -> Optional[RangeSpec]:
        if self.ranges:
            return RangeSpec.parse(self.ranges)
        return BLACKJACK_RANGES if self.env == "blackjack" else None

    def resolved_output_scale(self) -> float:
        if self.output_scale > 0:
            return self.output_scale
        return CARTPOLE_PURE_SCALE if (self.env == "cartpole" and self.model == "pure") else 1.0

    def trainer_config(self) -> TrainerConfig:
        return TrainerConfig(
            gamma=self.gamma, batch_size=self.batch_size, buffer_capacity=self.buffer_capacity,
            target_period=self.target_period, tau=self.tau, algo=self.algo,
            update_timing=self.update_timing, terminal_masking=self.terminal_masking,
            lr_circuit=self.lr_circuit, lr_dense=self.lr_dense,
        )

    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_start, self.eps_decay, self.eps_min)

    def dumps(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "seeds":
                value = ",".join(map(str, value))
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_CONVERTERS = {int: int, float: float, bool: parse_bool, str: str, tuple: parse_seeds}
FIELD_TYPES = {
    f.name: type(f.default) if f.default is not dataclasses.MISSING else tuple
    for f in dataclasses.fields(RunConfig)
}


def convert(key: str, raw: str):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return _CONVERTERS[FIELD_TYPES[key]](raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        values[key] = convert(key, raw.strip())
    return values


def build_config(config_path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the config file, then CLI overrides (raw strings or typed values)."""
    values = read_config_file(config_path) if config_path else {}
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        values[key] = convert(key, raw) if isinstance(raw, str) else raw
    return RunConfig(**values)
