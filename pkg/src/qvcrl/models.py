"""Q-functions over pure QVCs, hybrid QVCs and MLP baselines.

All three kinds share one interface: :meth:`QModel.q_values_batch`,
:meth:`QModel.loss_and_gradients`, and named flat parameter groups
(``"circuit"`` and/or ``"dense"``) that the trainer optimizes and that
target-network updates copy or blend.

Checkpoint format (plain text, one token or value per line after the header)::

    qvcrl-model 1
    kind pure|hybrid|mlp
    n_inputs <int>
    n_actions <int>
    n_layers <int>
    ring 0|1
    encoder scaled|directional
    ranges lo:hi,lo:hi,...|-
    output_scale <float>
    sizes <int,int,...>|-
    group <name> <count>
    <value>
    ...

Values are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from qvcrl import circuit as qc
from qvcrl import diffgrad, encoding
from qvcrl.encoding import RangeSpec
from qvcrl.errors import ConfigError
from qvcrl.nn import MLP, DenseLayer

KINDS = ("pure", "hybrid", "mlp")
FORMAT_TAG = "qvcrl-model 1"


@dataclass(frozen=True)
class ObsEncoder:
    """Maps raw observations to circuit angles (quantum kinds) or network inputs (MLP)."""

    kind: str
    ranges: Optional[RangeSpec] = None

    def __post_init__(self):
        if self.kind not in ("scaled", "directional"):
            raise ConfigError(f"unknown encoder {self.kind!r}")
        if self.kind == "scaled" and self.ranges is None:
            raise ConfigError("scaled encoding needs a RangeSpec")

    def angles(self, obs) -> np.ndarray:
        if self.kind == "scaled":
            return encoding.scaled_encode(obs, self.ranges)
        return encoding.directional_encode(obs)

    def network_input(self, obs) -> np.ndarray:
        if self.kind == "scaled":
            return encoding.minmax_obs_for_baseline(obs, self.ranges)
        return encoding.binary_obs_for_baseline(obs)


class QModel:
    def __init__(
        self,
        kind: str,
        n_inputs: int,
        n_actions: int,
        encoder: ObsEncoder,
        *,
        circuit: Optional[qc.CircuitDef] = None,
        circuit_params: Optional[np.ndarray] = None,
        head: Optional[DenseLayer] = None,
        mlp: Optional[MLP] = None,
        output_scale: float = 1.0,
        n_layers: int = 3,
        ring: bool = False,
    ):
        if kind not in KINDS:
            raise ConfigError(f"unknown model kind {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.encoder = encoder
        self.circuit = circuit
        self.circuit_params = None if circuit_params is None else np.asarray(circuit_params, dtype=np.float64)
        self.head = head
        self.mlp = mlp
        self.output_scale = float(output_scale)
        self.n_layers = n_layers
        self.ring = bool(ring)
        self._tail_key = None
        self._tail = None
        self._check()

    def _check(self) -> None:
        if self.kind in ("pure", "hybrid"):
            if self.circuit is None or self.circuit_params is None:
                raise ConfigError(f"{self.kind} model needs a circuit and parameters")
            if self.circuit_params.shape != (self.circuit.param_count,):
                raise ConfigError("circuit parameter vector does not match the circuit")
            if self.circuit.n_qubits != self.n_inputs:
                raise ConfigError("circuit width must equal the observation length")
        if self.kind == "pure" and self.circuit.n_readouts != self.n_actions:
            raise ConfigError("pure model needs one readout qubit per action")
        if self.kind == "hybrid":
            if self.head is None or self.head.n_in != self.circuit.n_readouts or self.head.n_out != self.n_actions:
                raise ConfigError("hybrid head must map all readouts to the action count")
        if self.kind == "mlp":
            if self.mlp is None or self.mlp.sizes[0] != self.n_inputs or self.mlp.sizes[-1] != self.n_actions:
                raise ConfigError("MLP sizes must start at the observation length and end at the action count")

    # -- construction ------------------------------------------------------

    @classmethod
    def pure(cls, n_inputs, n_actions, encoder, rng, n_layers=3, output_scale=1.0, ring=False) -> "QModel":
        circuit = qc.assemble_pure_qvc(n_inputs, n_actions, n_layers, ring)
        params = rng.uniform(0.0, 2.0 * math.pi, size=circuit.param_count)
        return cls("pure", n_inputs, n_actions, encoder, circuit=circuit, circuit_params=params,
                   output_scale=output_scale, n_layers=n_layers, ring=ring)

    @classmethod
    def hybrid(cls, n_inputs, n_actions, encoder, rng, n_layers=3, ring=False) -> "QModel":
        circuit = qc.assemble_hybrid_qvc(n_inputs, n_layers, ring)
        params = rng.uniform(0.0, 2.0 * math.pi, size=circuit.param_count)
        head = DenseLayer.init(circuit.n_readouts, n_actions, rng)
        return cls("hybrid", n_inputs, n_actions, encoder, circuit=circuit, circuit_params=params,
                   head=head, n_layers=n_layers, ring=ring)

    @classmethod
    def baseline(cls, sizes, encoder, rng) -> "QModel":
        return cls("mlp", sizes[0], sizes[-1], encoder, mlp=MLP.init(sizes, rng))

    # -- evaluation --------------------------------------------------------

    @property
    def total_trainable_count(self) -> int:
        return sum(v.size for v in self.param_groups().values())

    def _readouts(self, obs_batch: np.ndarray) -> np.ndarray:
        key = self.circuit_params.tobytes()
        if key != self._tail_key:
            self._tail = qc.compose_tail(self.circuit, self.circuit_params)
            self._tail_key = key
        enc = np.stack([self.encoder.angles(o) for o in obs_batch])
        return qc.evaluate_many(self.circuit, self.circuit_params, enc, self._tail)

    def _check_obs(self, obs_batch) -> np.ndarray:
        obs_batch = np.atleast_2d(np.asarray(obs_batch, dtype=np.float64))
        if obs_batch.shape[1] != self.n_inputs:
            raise ConfigError(f"model expects observations of length {self.n_inputs}, got {obs_batch.shape[1]}")
        return obs_batch

    def q_values_batch(self, obs_batch) -> np.ndarray:
        obs_batch = self._check_obs(obs_batch)
        if self.kind == "pure":
            return self.output_scale * self._readouts(obs_batch)
        if self.kind == "hybrid":
            return self.head.forward(self._readouts(obs_batch))
        x = np.stack([self.encoder.network_input(o) for o in obs_batch])
        return self.mlp.forward(x)

    def q_values(self, obs) -> np.ndarray:
        return self.q_values_batch(np.asarray(obs, dtype=np.float64)[np.newaxis])[0]

    def loss_and_gradients(self, obs_batch, actions, targets) -> tuple[float, dict]:
        """Mean of ``(target_b - Q(obs_b, action_b))^2`` and its gradient per parameter group."""
        obs_batch = self._check_obs(obs_batch)
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.float64)
        b = obs_batch.shape[0]
        if actions.shape != (b,) or targets.shape != (b,):
            raise ConfigError("actions and targets must have one entry per observation")
        if np.any((actions < 0) | (actions >= self.n_actions)):
            raise ConfigError(f"action index out of range 0..{self.n_actions - 1}")
        rows = np.arange(b)

        if self.kind == "mlp":
            x = np.stack([self.encoder.network_input(o) for o in obs_batch])
            q = self.mlp.forward(x)
            resid = q[rows, actions] - targets
            dq = np.zeros_like(q)
            dq[rows, actions] = 2.0 * resid / b
            grad, _ = self.mlp.backward(x, dq)
            return float(np.mean(resid ** 2)), {"dense": grad}

        enc = np.stack([self.encoder.angles(o) for o in obs_batch])
        z = self._readouts(obs_batch)
        if self.kind == "pure":
            q = self.output_scale * z
        else:
            q = self.head.forward(z)
        resid = q[rows, actions] - targets
        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * resid / b
        grads = {}
        if self.kind == "pure":
            dz = self.output_scale * dq
        else:
            dw, db, dz = self.head.backward(z, dq)
            grads["dense"] = np.concatenate([dw.ravel(), db])
        # chain rule across the circuit boundary: dz holds per-sample readout weights
        jac = diffgrad.readout_jacobian(self.circuit, self.circuit_params, enc)
        grads["circuit"] = np.einsum("bpk,bk->p", jac, dz)
        return float(np.mean(resid ** 2)), grads

    # -- parameters --------------------------------------------------------

    def param_groups(self) -> dict[str, np.ndarray]:
        groups = {}
        if self.kind in ("pure", "hybrid"):
            groups["circuit"] = self.circuit_params.copy()
        if self.kind == "hybrid":
            groups["dense"] = self.head.get_flat()
        if self.kind == "mlp":
            groups["dense"] = self.mlp.get_flat()
        return groups

    def set_param_groups(self, groups: dict[str, np.ndarray]) -> None:
        for name, values in groups.items():
            values = np.asarray(values, dtype=np.float64)
            if name == "circuit" and self.kind in ("pure", "hybrid"):
                if values.shape != self.circuit_params.shape:
                    raise ConfigError("circuit parameter shape mismatch")
                self.circuit_params = values.copy()
            elif name == "dense" and self.kind == "hybrid":
                self.head.set_flat(values)
            elif name == "dense" and self.kind == "mlp":
                self.mlp.set_flat(values)
            else:
                raise ConfigError(f"model kind {self.kind} has no parameter group {name!r}")

    def clone(self) -> "QModel":
        return copy.deepcopy(self)

    # -- checkpoint --------------------------------------------------------

    def dumps(self) -> str:
        lines = [
            FORMAT_TAG,
            f"kind {self.kind}",
            f"n_inputs {self.n_inputs}",
            f"n_actions {self.n_actions}",
            f"n_layers {self.n_layers}",
            f"ring {int(self.ring)}",
            f"encoder {self.encoder.kind}",
            f"ranges {self.encoder.ranges.format() if self.encoder.ranges else '-'}",
            f"output_scale {self.output_scale!r}",
            f"sizes {','.join(map(str, self.mlp.sizes)) if self.mlp else '-'}",
        ]
        for name, values in self.param_groups().items():
            lines.append(f"group {name} {values.size}")
            lines += [repr(float(v)) for v in values]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "QModel":
        lines = text.splitlines()
        if not lines or lines[0].strip() != FORMAT_TAG:
            raise ConfigError("not a qvcrl model checkpoint")
        header = {}
        pos = 1
        while pos < len(lines) and not lines[pos].startswith("group "):
            key, _, value = lines[pos].partition(" ")
            header[key] = value.strip()
            pos += 1
        groups = {}
        while pos < len(lines):
            _, name, count = lines[pos].split()
            count = int(count)
            groups[name] = np.array([float(v) for v in lines[pos + 1:pos + 1 + count]])
            pos += 1 + count
        try:
            kind = header["kind"]
            n_in, n_act = int(header["n_inputs"]), int(header["n_actions"])
            n_layers = int(header["n_layers"])
            ring = header.get("ring", "0") == "1"
            ranges = None if header["ranges"] == "-" else RangeSpec.parse(header["ranges"])
            encoder = ObsEncoder(header["encoder"], ranges)
            scale = float(header["output_scale"])
        except KeyError as exc:
            raise ConfigError(f"checkpoint header missing {exc}") from exc
        rng = np.random.default_rng(0)
        if kind == "pure":
            model = cls.pure(n_in, n_act, encoder, rng, n_layers, scale, ring)
        elif kind == "hybrid":
            model = cls.hybrid(n_in, n_act, encoder, rng, n_layers, ring)
        elif kind == "mlp":
            model = cls.baseline([int(s) for s in header["sizes"].split(",")], encoder, rng)
        else:
            raise ConfigError(f"unknown model kind {kind!r} in checkpoint")
        model.set_param_groups(groups)
        return model

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "QModel":
        return cls.loads(Path(path).read_text())


def model_gradients(model: QModel, obs, action: int, td_target: float) -> dict:
    """Gradient of ``(td_target - Q(obs, action))^2`` for a single transition."""
    _, grads = model.loss_and_gradients(np.asarray(obs)[np.newaxis], [action], [td_target])
    return grads


@dataclass
class TargetPair:
    online: QModel
    target: QModel

    @classmethod
    def from_online(cls, online: QModel) -> "TargetPair":
        return cls(online, online.clone())


def hard_copy(pair: TargetPair) -> None:
    pair.target.set_param_groups(pair.online.param_groups())


def soft_update(pair: TargetPair, tau: float) -> None:
    """``target = tau * target + (1 - tau) * online``; ``tau`` weights the old target."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must lie in [0, 1], got {tau}")
    online = pair.online.param_groups()
    old = pair.target.param_groups()
    pair.target.set_param_groups({k: tau * old[k] + (1.0 - tau) * online[k] for k in old})
