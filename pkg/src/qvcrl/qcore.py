"""Exact statevector simulation for registers of up to 20 qubits.

Bit ordering: qubit 0 is the most significant bit of the basis index, so for
``n`` qubits the bit of qubit ``q`` in index ``i`` is ``(i >> (n - 1 - q)) & 1``.
``|10>`` on two qubits (qubit 0 set) is therefore index 2.

Rotations use the half-angle convention ``R_P(theta) = exp(-i theta P / 2)``.

Besides the single-state API (:func:`init_state`, :func:`apply_gate`,
:func:`expectation_z`) the module exposes batched kernels operating on a
``(rows, 2**n)`` complex array where every row carries its own angle. The
circuit evaluator and the parameter-shift differentiator run through these.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from qvcrl.errors import ConfigError

MAX_QUBITS = 20
ORACLE_MAX_QUBITS = 6

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CNOT",)

# Pauli generators: exp(-i a G theta) with a = 1/2, eigenvalues of G are -1, +1.
GENERATOR_SCALE = 0.5
GENERATOR_EIGENVALUES = (-1.0, 1.0)


@dataclass(frozen=True)
class GateAction:
    """A single gate: a Pauli rotation on ``target`` or a CNOT from ``control``."""

    kind: str
    target: int
    control: Optional[int] = None
    angle: float = 0.0

    generator_scale = GENERATOR_SCALE
    generator_eigenvalues = GENERATOR_EIGENVALUES

    def validate(self, n_qubits: int) -> None:
        if self.kind not in GATE_KINDS:
            raise ConfigError(f"unknown gate kind {self.kind!r}")
        if not 0 <= self.target < n_qubits:
            raise ConfigError(f"target qubit {self.target} out of range for {n_qubits} qubits")
        if self.kind == "CNOT":
            if self.control is None or not 0 <= self.control < n_qubits:
                raise ConfigError(f"CNOT control {self.control} out of range for {n_qubits} qubits")
            if self.control == self.target:
                raise ConfigError("CNOT control and target must differ")
        else:
            if self.control is not None:
                raise ConfigError(f"{self.kind} takes no control qubit")
            if not np.isfinite(self.angle):
                raise ConfigError(f"non-finite rotation angle {self.angle}")


@dataclass
class StateVector:
    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if len(self.amps) != 1 << self.n_qubits:
            raise ConfigError(f"expected {1 << self.n_qubits} amplitudes, got {len(self.amps)}")

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))


def _check_n(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def init_state(n_qubits: int) -> StateVector:
    """Return ``|0...0>`` on ``n_qubits`` qubits."""
    _check_n(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(int(n_qubits), amps)


def apply_gate(state: StateVector, gate: GateAction) -> StateVector:
    """Return a new state equal to ``U_gate @ state``; the input is not modified."""
    n = state.n_qubits
    gate.validate(n)
    rows = state.amps[np.newaxis, :]
    if gate.kind == "CNOT":
        out = cnot_batch(rows, n, gate.control, gate.target)
    else:
        out = rotate_batch(rows, n, gate.kind, gate.target, np.array([gate.angle], dtype=np.float64))
    return StateVector(n, out[0])


def expectation_z(state: StateVector, qubit: int) -> float:
    """<Z> on ``qubit``: probability mass with the bit clear minus mass with it set."""
    if not 0 <= qubit < state.n_qubits:
        raise ConfigError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    return float(expectation_z_batch(state.amps[np.newaxis, :], state.n_qubits, (qubit,))[0, 0])


# -- batched kernels ---------------------------------------------------------


def init_batch(n_qubits: int, rows: int) -> np.ndarray:
    _check_n(n_qubits)
    states = np.zeros((rows, 1 << n_qubits), dtype=np.complex128)
    states[:, 0] = 1.0
    return states


def rotate_batch(states: np.ndarray, n_qubits: int, kind: str, target: int, angles: np.ndarray) -> np.ndarray:
    """Apply ``R_kind(angles[r])`` on ``target`` to every row ``r`` of ``states``."""
    rows = states.shape[0]
    view = states.reshape(rows, 1 << target, 2, 1 << (n_qubits - target - 1))
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    half = (np.asarray(angles, dtype=np.float64) * 0.5).reshape(rows, 1, 1)
    c = np.cos(half)
    s = np.sin(half)
    out = np.empty_like(view)
    if kind == "RX":
        out[:, :, 0, :] = c * a0 - 1j * s * a1
        out[:, :, 1, :] = c * a1 - 1j * s * a0
    elif kind == "RY":
        out[:, :, 0, :] = c * a0 - s * a1
        out[:, :, 1, :] = s * a0 + c * a1
    elif kind == "RZ":
        phase = c - 1j * s
        out[:, :, 0, :] = phase * a0
        out[:, :, 1, :] = np.conj(phase) * a1
    else:
        raise ConfigError(f"not a rotation gate: {kind!r}")
    return out.reshape(rows, -1)


@lru_cache(maxsize=None)
def _cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    cbit = (idx >> (n_qubits - 1 - control)) & 1
    perm = np.where(cbit == 1, idx ^ (1 << (n_qubits - 1 - target)), idx)
    perm.setflags(write=False)
    return perm


def cnot_batch(states: np.ndarray, n_qubits: int, control: int, target: int) -> np.ndarray:
    return states[:, _cnot_permutation(n_qubits, control, target)]


@lru_cache(maxsize=None)
def _z_signs(n_qubits: int, qubits: tuple[int, ...]) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    signs = np.stack([1.0 - 2.0 * ((idx >> (n_qubits - 1 - q)) & 1) for q in qubits])
    signs.setflags(write=False)
    return signs


def expectation_z_batch(states: np.ndarray, n_qubits: int, qubits: Sequence[int]) -> np.ndarray:
    """Return ``(rows, len(qubits))`` Z expectations."""
    probs = states.real ** 2 + states.imag ** 2
    signs = _z_signs(n_qubits, tuple(qubits))
    # elementwise multiply + pairwise sum keeps results independent of BLAS threading
    return np.stack([np.sum(probs * sg, axis=1) for sg in signs], axis=1)


def lifted_matrix(kind: str, n_qubits: int, target: int, control: Optional[int] = None, angle: float = 0.0) -> np.ndarray:
    """Closed-form ``2**n x 2**n`` gate matrix, for precomposing shared circuit segments."""
    dim = 1 << n_qubits
    if kind == "CNOT":
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[np.arange(dim), _cnot_permutation(n_qubits, control, target)] = 1.0
        return m
    c = np.cos(angle / 2.0)
    s = np.sin(angle / 2.0)
    if kind == "RX":
        local = np.array([[c, -1j * s], [-1j * s, c]])
    elif kind == "RY":
        local = np.array([[c, -s], [s, c]], dtype=np.complex128)
    elif kind == "RZ":
        local = np.array([[c - 1j * s, 0], [0, c + 1j * s]])
    else:
        raise ConfigError(f"unknown gate kind {kind!r}")
    rows, cols, bit_r, bit_c = _local_pattern(n_qubits, target)
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[rows, cols] = local[bit_r, bit_c]
    return m


@lru_cache(maxsize=None)
def _local_pattern(n_qubits: int, target: int):
    """Nonzero (row, col) pairs of a single-qubit gate lifted onto ``target``."""
    shift = n_qubits - 1 - target
    idx = np.arange(1 << n_qubits)
    rows = np.concatenate([idx, idx])
    cols = np.concatenate([idx, idx ^ (1 << shift)])
    return rows, cols, (rows >> shift) & 1, (cols >> shift) & 1


def z_observable(n_qubits: int, qubit: int) -> np.ndarray:
    return np.diag(_z_signs(n_qubits, (qubit,))[0]).astype(np.complex128)


# -- dense oracle ------------------------------------------------------------

_PAULI = {
    "RX": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "RY": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "RZ": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
_P0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)
_P1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)
_I2 = np.eye(2, dtype=np.complex128)


def _kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for f in factors:
        out = np.kron(out, f)
    return out


def dense_gate_matrix(gate: GateAction, n_qubits: int) -> np.ndarray:
    """Full ``2**n x 2**n`` matrix of one gate, built by matrix exponential and Kronecker lifting."""
    from scipy.linalg import expm

    gate.validate(n_qubits)
    if gate.kind == "CNOT":
        on = [_I2] * n_qubits
        off = [_I2] * n_qubits
        off[gate.control] = _P0
        on[gate.control] = _P1
        on[gate.target] = _PAULI["RX"]
        return _kron_all(off) + _kron_all(on)
    local = expm(-0.5j * gate.angle * _PAULI[gate.kind])
    factors = [_I2] * n_qubits
    factors[gate.target] = local
    return _kron_all(factors)


def dense_unitary_oracle(gates: Sequence[GateAction], n_qubits: int) -> np.ndarray:
    """Product of the lifted gate matrices (last gate leftmost). Desk-scale only."""
    _check_n(n_qubits)
    if n_qubits > ORACLE_MAX_QUBITS:
        raise ConfigError(f"dense oracle limited to {ORACLE_MAX_QUBITS} qubits, got {n_qubits}")
    u = np.eye(1 << n_qubits, dtype=np.complex128)
    for g in gates:
        u = dense_gate_matrix(g, n_qubits) @ u
    return u
