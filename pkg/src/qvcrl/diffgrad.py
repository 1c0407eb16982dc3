"""Parameter-shift gradients of circuit readouts, and a finite-difference oracle.

For a gate ``exp(-i a G theta)`` whose generator ``G`` has eigenvalues
``e0, e1`` the derivative of any expectation is exactly

    df/dtheta = r * [f(theta + pi/(4r)) - f(theta - pi/(4r))],  r = a/2 * (e1 - e0).

With half-angle Pauli rotations ``a = 1/2`` and ``(e0, e1) = (-1, 1)`` so
``r = 1/2`` and the shift is ``pi/2``. Each parameter drives exactly one gate
(a :class:`~qvcrl.circuit.CircuitDef` invariant), so shifting the parameter
itself is exact. For negated bindings ``theta_gate = -p`` the readout is still
a sinusoid of period ``2*pi`` in ``p``, which is all the rule needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from qvcrl import qcore
from qvcrl.circuit import CircuitDef, Param, _encoder_split, _resolve, evaluate, evaluate_batch
from qvcrl.errors import ConfigError


@dataclass(frozen=True)
class ShiftConstants:
    r: float
    shift: float

    @classmethod
    def for_generator(cls, scale: float, eigenvalues: tuple[float, float]) -> "ShiftConstants":
        e0, e1 = eigenvalues
        r = scale / 2.0 * (e1 - e0)
        if r <= 0:
            raise ConfigError(f"shift constant must be positive, got r={r}")
        return cls(r, math.pi / (4.0 * r))


PAULI_SHIFT = ShiftConstants.for_generator(qcore.GENERATOR_SCALE, qcore.GENERATOR_EIGENVALUES)


def _as_batch(circuit: CircuitDef, params, enc):
    params = np.asarray(params, dtype=np.float64)
    enc = np.asarray(enc, dtype=np.float64)
    if params.shape != (circuit.param_count,):
        raise ConfigError(f"expected {circuit.param_count} params, got shape {params.shape}")
    if enc.ndim == 1:
        enc = enc[np.newaxis]
    if enc.ndim != 2 or enc.shape[1] != circuit.encoder_slots:
        raise ConfigError(f"encoder angles must have {circuit.encoder_slots} columns, got shape {enc.shape}")
    return params, enc


CACHED_MAX_QUBITS = 8


def _shifted_readouts(circuit: CircuitDef, params: np.ndarray, enc: np.ndarray, step: float) -> tuple:
    """Readouts with each parameter moved by ``+step`` and ``-step`` in turn.

    Returns two arrays of shape ``(samples, param_count, n_readouts)``.
    """
    if circuit.n_qubits <= CACHED_MAX_QUBITS and _encoder_split(circuit) is not None:
        return _shifted_readouts_cached(circuit, params, enc, step)
    return _shifted_readouts_rows(circuit, params, enc, step)


def _shifted_readouts_rows(circuit: CircuitDef, params: np.ndarray, enc: np.ndarray, step: float) -> tuple:
    """One independent full-circuit evaluation per (sample, parameter, sign)."""
    p = circuit.param_count
    b = enc.shape[0]
    deltas = np.eye(p) * step
    # row layout: sample-major, then [+shift for every param, -shift for every param]
    shifted = np.concatenate([params + deltas, params - deltas])
    rows_params = np.tile(shifted, (b, 1))
    rows_enc = np.repeat(enc, 2 * p, axis=0)
    out = evaluate_batch(circuit, rows_params, rows_enc).reshape(b, 2, p, circuit.n_readouts)
    return out[:, 0], out[:, 1]


def _shifted_readouts_cached(circuit: CircuitDef, params: np.ndarray, enc: np.ndarray, step: float) -> tuple:
    """Same values as :func:`_shifted_readouts_rows`, reusing the unshifted work.

    Every shifted evaluation shares the state just before its gate with the
    unshifted run, and shares everything after its gate with every sample
    (no encoder ops follow a parametrized op). So each ``f(p +/- step)`` is
    ``<phi| S^dag Z S |phi>`` with ``phi`` the pre-gate state after the shifted
    gate and ``S`` the precomposed remainder of the circuit.
    """
    n = circuit.n_qubits
    b = enc.shape[0]
    first = next(i for i, op in enumerate(circuit.ops) if isinstance(op.source, Param))
    head = circuit.ops[:first]
    tail = circuit.ops[first:]

    states = qcore.init_batch(n, b)
    rows_params = np.broadcast_to(params, (b, circuit.param_count))
    for op in head:
        if op.kind == "CNOT":
            states = qcore.cnot_batch(states, n, op.control, op.target)
        else:
            states = qcore.rotate_batch(states, n, op.kind, op.target, _resolve(op.source, rows_params, enc))

    def angle(op, delta=0.0):
        src = op.source
        if isinstance(src, Param):
            return src.sign * (params[src.index] + delta)
        return src.value

    mats = [
        qcore.lifted_matrix("CNOT", n, op.target, op.control)
        if op.kind == "CNOT"
        else qcore.lifted_matrix(op.kind, n, op.target, angle=angle(op))
        for op in tail
    ]
    obs = np.stack([qcore.z_observable(n, q) for q in circuit.readout_qubits])
    after = [None] * len(tail)
    for i in range(len(tail) - 1, -1, -1):
        after[i] = obs
        obs = mats[i].conj().T @ obs @ mats[i]

    plus = np.empty((b, circuit.param_count, circuit.n_readouts))
    minus = np.empty_like(plus)
    psi = states
    for i, op in enumerate(tail):
        psi = psi @ mats[i].T
        if isinstance(op.source, Param):
            # R(theta + d) = R(d) R(theta) for rotations about one axis
            sign = op.source.sign
            for delta, out in ((step, plus), (-step, minus)):
                phi = psi @ _shift_matrix(op.kind, n, op.target, sign * delta).T
                out[:, op.source.index, :] = _expectations(phi, after[i])
    return plus, minus


@lru_cache(maxsize=None)
def _shift_matrix(kind: str, n_qubits: int, target: int, angle: float) -> np.ndarray:
    m = qcore.lifted_matrix(kind, n_qubits, target, angle=angle)
    m.setflags(write=False)
    return m


def _expectations(phi: np.ndarray, observables: np.ndarray) -> np.ndarray:
    """``<phi_b| O_k |phi_b>`` for every row ``b`` and observable ``k``."""
    left = np.matmul(phi.conj()[np.newaxis], observables)
    return np.sum(left * phi[np.newaxis], axis=2).real.T


def readout_jacobian(circuit: CircuitDef, params, enc, constants: ShiftConstants = PAULI_SHIFT) -> np.ndarray:
    """d readout_k / d param_j for every sample: ``(samples, param_count, n_readouts)``.

    ``enc`` may be a single encoder vector or a ``(samples, encoder_slots)`` batch.
    Uses ``2 * param_count`` circuit evaluations per sample.
    """
    params, enc = _as_batch(circuit, params, enc)
    if circuit.param_count == 0:
        return np.zeros((enc.shape[0], 0, circuit.n_readouts))
    plus, minus = _shifted_readouts(circuit, params, enc, constants.shift)
    return constants.r * (plus - minus)


def _weights(circuit: CircuitDef, readout_weights, samples: int) -> np.ndarray:
    w = np.asarray(readout_weights, dtype=np.float64)
    if w.ndim == 1:
        w = np.broadcast_to(w, (samples, w.shape[0]))
    if w.shape != (samples, circuit.n_readouts):
        raise ConfigError(f"readout weights must have {circuit.n_readouts} entries per sample, got shape {w.shape}")
    return w


def shift_gradient(circuit: CircuitDef, params, enc, readout_weights) -> np.ndarray:
    """Gradient of ``f = sum_k w_k * readout_k`` with respect to the circuit parameters.

    With a batch of encodings (and optionally per-sample weights) the result is
    the mean of the per-sample gradients.
    """
    params, enc = _as_batch(circuit, params, enc)
    w = _weights(circuit, readout_weights, enc.shape[0])
    jac = readout_jacobian(circuit, params, enc)
    return np.einsum("bpk,bk->bp", jac, w).mean(axis=0)


def finite_diff_oracle(circuit: CircuitDef, params, enc, readout_weights, h: float = 1e-6) -> np.ndarray:
    """Central differences ``[f(p+h) - f(p-h)] / 2h`` of the same weighted objective."""
    if h <= 0:
        raise ConfigError("finite-difference step must be positive")
    params, enc = _as_batch(circuit, params, enc)
    w = _weights(circuit, readout_weights, enc.shape[0])
    grad = np.zeros(circuit.param_count)
    # plain per-sample, per-parameter loop; deliberately not shared with the shift path
    for b in range(enc.shape[0]):
        for j in range(circuit.param_count):
            up = params.copy()
            down = params.copy()
            up[j] += h
            down[j] -= h
            f_up = float(np.dot(w[b], evaluate(circuit, up, enc[b])))
            f_down = float(np.dot(w[b], evaluate(circuit, down, enc[b])))
            grad[j] += (f_up - f_down) / (2.0 * h)
    return grad / enc.shape[0]
