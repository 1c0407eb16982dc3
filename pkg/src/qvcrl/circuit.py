"""Parametrized circuit programs: encoder, variational layers, pooling, evaluation.

A :class:`CircuitDef` is an immutable gate program whose rotation angles come
from one of three sources: a constant, a trainable parameter (optionally
negated, used by the inverse rotations of pooling), or an encoder slot filled
per evaluation from the observation.

Layouts
-------
encoder
    ``RX(enc[2i]) RZ(enc[2i+1])`` on every qubit ``i``.
variational layer
    CNOT chain ``q0->q1->...->q_{n-1}`` (no ring closure), then
    ``RX RY RZ`` with fresh parameters on every qubit.
pooling (source -> sink)
    ``RX RY RZ`` (fresh, +1) on source, ``CNOT(source, sink)``,
    ``RX^-1 RY^-1 RZ^-1`` (fresh, -1) on sink. Six parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from qvcrl import qcore
from qvcrl.errors import ConfigError
from qvcrl.qcore import GateAction


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Param:
    index: int
    sign: int = 1


@dataclass(frozen=True)
class Encoder:
    slot: int


AngleSource = Union[Const, Param, Encoder]


@dataclass(frozen=True)
class Op:
    kind: str
    target: int
    control: Optional[int] = None
    source: Optional[AngleSource] = None

    def __str__(self) -> str:
        if self.kind == "CNOT":
            return f"CNOT q{self.control}->q{self.target}"
        src = self.source
        if isinstance(src, Param):
            label = f"p{src.index}" if src.sign > 0 else f"-p{src.index}"
        elif isinstance(src, Encoder):
            label = f"enc{src.slot}"
        else:
            label = f"{src.value:g}"
        return f"{self.kind}({label}) q{self.target}"


class ParamAllocator:
    """Hands out consecutive parameter indices."""

    def __init__(self, start: int = 0):
        self.count = start

    def new(self, sign: int = 1) -> Param:
        p = Param(self.count, sign)
        self.count += 1
        return p


@dataclass(frozen=True)
class CircuitDef:
    n_qubits: int
    ops: tuple[Op, ...]
    encoder_slots: int
    readout_qubits: tuple[int, ...]
    param_count: int

    def __post_init__(self):
        n = self.n_qubits
        if not self.readout_qubits:
            raise ConfigError("readout_qubits must be nonempty")
        if len(set(self.readout_qubits)) != len(self.readout_qubits):
            raise ConfigError(f"duplicate readout qubits {self.readout_qubits}")
        if any(not 0 <= q < n for q in self.readout_qubits):
            raise ConfigError(f"readout qubit out of range in {self.readout_qubits}")
        seen = []
        for op in self.ops:
            if op.kind not in qcore.GATE_KINDS:
                raise ConfigError(f"unknown gate kind {op.kind!r}")
            if not 0 <= op.target < n or (op.control is not None and not 0 <= op.control < n):
                raise ConfigError(f"op {op} addresses a qubit outside 0..{n - 1}")
            if op.kind == "CNOT":
                if op.control is None or op.control == op.target:
                    raise ConfigError(f"bad CNOT {op}")
                continue
            if isinstance(op.source, Param):
                if op.source.sign not in (1, -1):
                    raise ConfigError(f"parameter sign must be +1 or -1, got {op.source.sign}")
                seen.append(op.source.index)
            elif isinstance(op.source, Encoder):
                if not 0 <= op.source.slot < self.encoder_slots:
                    raise ConfigError(f"encoder slot {op.source.slot} out of range")
            elif not isinstance(op.source, Const):
                raise ConfigError(f"rotation {op.kind} on q{op.target} has no angle source")
        # one gate per parameter, indices dense in 0..P-1
        if sorted(seen) != list(range(self.param_count)):
            raise ConfigError("each parameter must be bound to exactly one gate, indices 0..param_count-1")

    @property
    def n_readouts(self) -> int:
        return len(self.readout_qubits)

    def diagram(self) -> str:
        lines = [
            f"CircuitDef: {self.n_qubits} qubits, {self.param_count} params, "
            f"{self.encoder_slots} encoder slots, readout {list(self.readout_qubits)}"
        ]
        lines += [f"  {i:3d}  {op}" for i, op in enumerate(self.ops)]
        return "\n".join(lines)


def build_encoder(n_qubits: int) -> list[Op]:
    if n_qubits < 1:
        raise ConfigError("encoder needs at least one qubit")
    ops = []
    for q in range(n_qubits):
        ops.append(Op("RX", q, source=Encoder(2 * q)))
        ops.append(Op("RZ", q, source=Encoder(2 * q + 1)))
    return ops


def build_variational_layer(n_qubits: int, alloc: ParamAllocator, ring: bool = False) -> list[Op]:
    """CNOT chain q -> q+1 (plus q_last -> q_0 when ``ring`` and n > 2), then RX, RY, RZ per qubit."""
    if n_qubits < 2:
        raise ConfigError("a variational layer needs at least 2 qubits for its CNOT chain")
    ops = [Op("CNOT", q + 1, control=q) for q in range(n_qubits - 1)]
    if ring and n_qubits > 2:
        ops.append(Op("CNOT", 0, control=n_qubits - 1))
    for q in range(n_qubits):
        for kind in qcore.ROTATIONS:
            ops.append(Op(kind, q, source=alloc.new()))
    return ops


def build_pooling(source: int, sink: int, alloc: ParamAllocator) -> list[Op]:
    if source == sink:
        raise ConfigError("pooling source and sink must differ")
    ops = [Op(kind, source, source=alloc.new(+1)) for kind in qcore.ROTATIONS]
    ops.append(Op("CNOT", sink, control=source))
    ops += [Op(kind, sink, source=alloc.new(-1)) for kind in qcore.ROTATIONS]
    return ops


def assemble_pure_qvc(n_inputs: int, n_actions: int, n_layers: int = 3, ring: bool = False) -> CircuitDef:
    """Encoder, ``n_layers`` layers, then pooling down to ``n_actions`` readout qubits.

    Parameter count is ``3 * n_layers * n_inputs + 6 * (n_inputs - n_actions)``.
    """
    if n_actions < 1:
        raise ConfigError("n_actions must be >= 1")
    if n_actions >= n_inputs:
        raise ConfigError(
            f"pure QVC pools {n_inputs} inputs down to {n_actions} actions, which needs "
            "n_actions < n_inputs; use the hybrid model instead"
        )
    if n_layers < 1:
        raise ConfigError("n_layers must be >= 1")
    alloc = ParamAllocator()
    ops = build_encoder(n_inputs)
    for _ in range(n_layers):
        ops += build_variational_layer(n_inputs, alloc, ring)
    active = list(range(n_inputs))
    while len(active) > n_actions:
        source, sink = active[0], active[1]
        ops += build_pooling(source, sink, alloc)
        active.pop(0)
    return CircuitDef(n_inputs, tuple(ops), 2 * n_inputs, tuple(active), alloc.count)


def assemble_hybrid_qvc(n_inputs: int, n_layers: int = 3, ring: bool = False) -> CircuitDef:
    if n_layers < 1:
        raise ConfigError("n_layers must be >= 1")
    alloc = ParamAllocator()
    ops = build_encoder(n_inputs)
    for _ in range(n_layers):
        ops += build_variational_layer(n_inputs, alloc, ring)
    return CircuitDef(n_inputs, tuple(ops), 2 * n_inputs, tuple(range(n_inputs)), alloc.count)


def _resolve(source: AngleSource, params: np.ndarray, enc: np.ndarray) -> np.ndarray:
    if isinstance(source, Param):
        col = params[:, source.index]
        return col if source.sign > 0 else -col
    if isinstance(source, Encoder):
        return enc[:, source.slot]
    return np.full(params.shape[0], source.value, dtype=np.float64)


def evaluate_batch(circuit: CircuitDef, params: np.ndarray, encoder_angles: np.ndarray) -> np.ndarray:
    """Evaluate one circuit on many (params, encoder) rows.

    Args:
        params: ``(rows, param_count)``.
        encoder_angles: ``(rows, encoder_slots)``.

    Returns:
        ``(rows, n_readouts)`` Z expectations in readout order.
    """
    params = np.asarray(params, dtype=np.float64)
    enc = np.asarray(encoder_angles, dtype=np.float64)
    if params.ndim != 2 or params.shape[1] != circuit.param_count:
        raise ConfigError(f"params must have shape (rows, {circuit.param_count}), got {params.shape}")
    if enc.ndim != 2 or enc.shape[1] != circuit.encoder_slots or enc.shape[0] != params.shape[0]:
        raise ConfigError(
            f"encoder angles must have shape ({params.shape[0]}, {circuit.encoder_slots}), got {enc.shape}"
        )
    n = circuit.n_qubits
    states = qcore.init_batch(n, params.shape[0])
    for op in circuit.ops:
        if op.kind == "CNOT":
            states = qcore.cnot_batch(states, n, op.control, op.target)
        else:
            states = qcore.rotate_batch(states, n, op.kind, op.target, _resolve(op.source, params, enc))
    return qcore.expectation_z_batch(states, n, circuit.readout_qubits)


def evaluate(circuit: CircuitDef, params: Sequence[float], encoder_angles: Sequence[float]) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    enc = np.asarray(encoder_angles, dtype=np.float64)
    if params.shape != (circuit.param_count,):
        raise ConfigError(f"expected {circuit.param_count} params, got shape {params.shape}")
    if enc.shape != (circuit.encoder_slots,):
        raise ConfigError(f"expected {circuit.encoder_slots} encoder angles, got shape {enc.shape}")
    return evaluate_batch(circuit, params[np.newaxis], enc[np.newaxis])[0]


def to_gates(circuit: CircuitDef, params: Sequence[float], encoder_angles: Sequence[float]) -> list[GateAction]:
    """Concrete gate list with all angles resolved (for the dense oracle)."""
    gates = []
    for op in circuit.ops:
        if op.kind == "CNOT":
            gates.append(GateAction("CNOT", op.target, op.control))
            continue
        src = op.source
        if isinstance(src, Param):
            angle = src.sign * float(params[src.index])
        elif isinstance(src, Encoder):
            angle = float(encoder_angles[src.slot])
        else:
            angle = float(src.value)
        gates.append(GateAction(op.kind, op.target, angle=angle))
    return gates


SHARED_TAIL_MAX_QUBITS = 8


def compose_tail(circuit: CircuitDef, params: Sequence[float]) -> Optional[tuple[int, np.ndarray]]:
    """Precompose everything after the last encoder op into one matrix.

    Returns ``(split, matrix)`` where ``ops[split:]`` are folded into
    ``matrix``, or None when the circuit interleaves encoder and parametrized
    ops or is too wide for a dense matrix.
    """
    split = _encoder_split(circuit)
    if split is None or circuit.n_qubits > SHARED_TAIL_MAX_QUBITS:
        return None
    params = np.asarray(params, dtype=np.float64)
    n = circuit.n_qubits
    tail = np.eye(1 << n, dtype=np.complex128)
    for op in circuit.ops[split:]:
        if op.kind == "CNOT":
            m = qcore.lifted_matrix("CNOT", n, op.target, op.control)
        else:
            src = op.source
            angle = src.sign * params[src.index] if isinstance(src, Param) else src.value
            m = qcore.lifted_matrix(op.kind, n, op.target, angle=angle)
        tail = m @ tail
    return split, tail


def evaluate_many(circuit: CircuitDef, params: Sequence[float], encoder_angles: np.ndarray, tail=None) -> np.ndarray:
    """Evaluate one parameter vector on a batch of encodings: ``(rows, n_readouts)``.

    When every encoder op precedes every parametrized op, the remainder of the
    circuit is identical for all rows and is applied as one precomposed matrix
    (pass ``tail`` from :func:`compose_tail` to reuse it across calls).
    """
    params = np.asarray(params, dtype=np.float64)
    enc = np.atleast_2d(np.asarray(encoder_angles, dtype=np.float64))
    if params.shape != (circuit.param_count,):
        raise ConfigError(f"expected {circuit.param_count} params, got shape {params.shape}")
    if enc.shape[1] != circuit.encoder_slots:
        raise ConfigError(f"encoder angles must have {circuit.encoder_slots} columns, got shape {enc.shape}")
    rows = enc.shape[0]
    if tail is None:
        tail = compose_tail(circuit, params)
    if tail is None:
        return evaluate_batch(circuit, np.broadcast_to(params, (rows, circuit.param_count)), enc)
    split, matrix = tail
    n = circuit.n_qubits
    states = qcore.init_batch(n, rows)
    for op in circuit.ops[:split]:
        if op.kind == "CNOT":
            states = qcore.cnot_batch(states, n, op.control, op.target)
        else:
            states = qcore.rotate_batch(states, n, op.kind, op.target, _resolve(op.source, params[np.newaxis], enc))
    return qcore.expectation_z_batch(states @ matrix.T, n, circuit.readout_qubits)


def _encoder_split(circuit: CircuitDef) -> Optional[int]:
    """Index after the last encoder op, or None if an encoder op follows a parametrized one."""
    last_enc = max((i for i, op in enumerate(circuit.ops) if isinstance(op.source, Encoder)), default=-1)
    first_par = min((i for i, op in enumerate(circuit.ops) if isinstance(op.source, Param)), default=len(circuit.ops))
    return last_enc + 1 if last_enc < first_par else None
