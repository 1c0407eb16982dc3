"""Random circuits and models for checking gradients against finite differences."""

from __future__ import annotations

import math

import numpy as np

from qvcrl import qcore
from qvcrl.circuit import CircuitDef, Const, Encoder, Op, Param
from qvcrl.diffgrad import finite_diff_oracle, shift_gradient
from qvcrl.models import ObsEncoder, QModel
from qvcrl.encoding import RangeSpec


def random_gates(rng: np.random.Generator, n_qubits: int, count: int) -> list[qcore.GateAction]:
    gates = []
    for _ in range(count):
        if n_qubits >= 2 and rng.random() < 0.3:
            control, target = rng.choice(n_qubits, size=2, replace=False)
            gates.append(qcore.GateAction("CNOT", int(target), int(control)))
        else:
            kind = qcore.ROTATIONS[rng.integers(3)]
            gates.append(qcore.GateAction(kind, int(rng.integers(n_qubits)), angle=float(rng.uniform(-2 * math.pi, 2 * math.pi))))
    return gates


def random_circuit(rng: np.random.Generator, max_qubits: int = 5, max_params: int = 30) -> CircuitDef:
    """Random mix of parametrized (+/-), encoder, constant and CNOT ops.

    Encoder ops land anywhere, so both gradient code paths get exercised.
    """
    n = int(rng.integers(1, max_qubits + 1))
    n_params = int(rng.integers(1, max_params + 1))
    n_enc = int(rng.integers(0, 2 * n + 1))
    n_const = int(rng.integers(0, 4))
    n_cnot = int(rng.integers(0, 2 * n)) if n >= 2 else 0

    def rot(source):
        return Op(qcore.ROTATIONS[rng.integers(3)], int(rng.integers(n)), source=source)

    index = rng.permutation(n_params)
    ops = [rot(Param(int(index[i]), int(rng.choice([1, -1])))) for i in range(n_params)]
    ops += [rot(Encoder(i)) for i in range(n_enc)]
    ops += [rot(Const(float(rng.uniform(0, 2 * math.pi)))) for _ in range(n_const)]
    for _ in range(n_cnot):
        c, t = rng.choice(n, size=2, replace=False)
        ops.append(Op("CNOT", int(t), control=int(c)))
    ops = [ops[i] for i in rng.permutation(len(ops))]
    n_read = int(rng.integers(1, n + 1))
    readout = tuple(int(q) for q in rng.choice(n, size=n_read, replace=False))
    return CircuitDef(n, tuple(ops), n_enc, readout, n_params)


def random_circuit_deviations(rng: np.random.Generator, count: int, h: float = 1e-6) -> list[float]:
    """Max |shift - finite difference| per random circuit (random params, encodings, weights)."""
    out = []
    for _ in range(count):
        c = random_circuit(rng)
        params = rng.uniform(-math.pi, math.pi, c.param_count)
        enc = rng.uniform(0, 2 * math.pi, (int(rng.integers(1, 4)), c.encoder_slots))
        w = rng.normal(size=c.n_readouts)
        diff = shift_gradient(c, params, enc, w) - finite_diff_oracle(c, params, enc, w, h)
        out.append(float(np.max(np.abs(diff))))
    return out


def _flat_loss(model: QModel, flat: np.ndarray, obs, actions, targets) -> float:
    groups = model.param_groups()
    start = 0
    for name, values in groups.items():
        groups[name] = flat[start:start + values.size]
        start += values.size
    probe = model.clone()
    probe.set_param_groups(groups)
    q = probe.q_values_batch(obs)
    return float(np.mean((q[np.arange(len(actions)), actions] - targets) ** 2))


def model_gradient_deviation(model: QModel, obs, actions, targets, h: float = 1e-6) -> float:
    """End-to-end check of ``loss_and_gradients`` against central differences over every trainable."""
    _, grads = model.loss_and_gradients(obs, actions, targets)
    analytic = np.concatenate(list(grads[k] for k in model.param_groups()))
    flat = np.concatenate(list(model.param_groups().values()))
    numeric = np.zeros_like(flat)
    for j in range(flat.size):
        up = flat.copy()
        down = flat.copy()
        up[j] += h
        down[j] -= h
        numeric[j] = (_flat_loss(model, up, obs, actions, targets) - _flat_loss(model, down, obs, actions, targets)) / (2 * h)
    return float(np.max(np.abs(analytic - numeric)))


def hybrid_model_deviations(rng: np.random.Generator, count: int, h: float = 1e-6) -> list[float]:
    out = []
    for _ in range(count):
        n_in = int(rng.integers(2, 5))
        n_act = int(rng.integers(1, 4))
        encoder = ObsEncoder("scaled", RangeSpec(tuple((-1.0, 1.0) for _ in range(n_in))))
        model = QModel.hybrid(n_in, n_act, encoder, rng, n_layers=int(rng.integers(1, 3)))
        model.head.bias = rng.normal(size=n_act)
        b = int(rng.integers(1, 5))
        obs = rng.uniform(-1, 1, (b, n_in))
        actions = rng.integers(n_act, size=b)
        targets = rng.normal(size=b)
        out.append(model_gradient_deviation(model, obs, actions, targets, h))
    return out
