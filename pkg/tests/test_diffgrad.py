import math

import numpy as np
import pytest

from qvcrl import circuit as qc
from qvcrl import diffgrad
from qvcrl.diffgrad import PAULI_SHIFT, finite_diff_oracle, readout_jacobian, shift_gradient
from qvcrl.errors import ConfigError
from qvcrl.gradcheck import random_circuit, random_circuit_deviations

RX1 = qc.CircuitDef(1, (qc.Op("RX", 0, source=qc.Param(0)),), 0, (0,), 1)


def test_shift_constants():
    assert PAULI_SHIFT.r == 0.5
    assert PAULI_SHIFT.shift == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("p, expected", [(math.pi / 2, -1.0), (0.0, 0.0), (0.4, -math.sin(0.4))])
def test_single_rx_gradient(p, expected):
    assert shift_gradient(RX1, [p], [], [1.0])[0] == pytest.approx(expected, abs=1e-15)
    assert finite_diff_oracle(RX1, [p], [], [1.0])[0] == pytest.approx(expected, abs=1e-6)


def test_constant_circuit_has_empty_gradient():
    c = qc.CircuitDef(1, (qc.Op("RY", 0, source=qc.Const(0.3)),), 0, (0,), 0)
    assert shift_gradient(c, [], [], [1.0]).shape == (0,)
    assert finite_diff_oracle(c, [], [], [1.0]).shape == (0,)


def test_negative_sign_flips_gradient():
    neg = qc.CircuitDef(1, (qc.Op("RX", 0, source=qc.Param(0, -1)),), 0, (0,), 1)
    # f(p) = cos(-p) = cos(p), so both bindings share a gradient; check on RY after RX to break symmetry
    ops = (qc.Op("RX", 0, source=qc.Const(0.5)), qc.Op("RY", 0, source=qc.Param(0, -1)))
    c = qc.CircuitDef(1, ops, 0, (0,), 1)
    assert shift_gradient(c, [0.8], [], [1.0])[0] == pytest.approx(finite_diff_oracle(c, [0.8], [], [1.0])[0], abs=1e-9)
    assert shift_gradient(neg, [0.3], [], [1.0])[0] == pytest.approx(-math.sin(0.3), abs=1e-15)


def test_random_circuits_match_finite_differences():
    devs = random_circuit_deviations(np.random.default_rng(7), 60)
    assert max(devs) <= 1e-5


def test_step_sizes_agree(rng):
    for _ in range(20):
        c = random_circuit(rng, max_qubits=4, max_params=10)
        p = rng.uniform(-3, 3, c.param_count)
        e = rng.uniform(0, 6, c.encoder_slots)
        w = rng.normal(size=c.n_readouts)
        assert np.max(np.abs(finite_diff_oracle(c, p, e, w, 1e-6) - finite_diff_oracle(c, p, e, w, 1e-5))) <= 1e-4


def test_linearity_in_readout_weights(rng):
    c = qc.assemble_hybrid_qvc(3, 2)
    p = rng.uniform(0, 6, c.param_count)
    e = rng.uniform(0, 6, (4, 6))
    w1, w2 = rng.normal(size=3), rng.normal(size=3)
    combined = shift_gradient(c, p, e, 0.3 * w1 - 1.7 * w2)
    separate = 0.3 * shift_gradient(c, p, e, w1) - 1.7 * shift_gradient(c, p, e, w2)
    assert np.max(np.abs(combined - separate)) <= 1e-10


def test_batch_gradient_is_mean_of_samples(rng):
    c = qc.assemble_pure_qvc(3, 2, 2)
    p = rng.uniform(0, 6, c.param_count)
    e = rng.uniform(0, 6, (5, 6))
    w = rng.normal(size=(5, 2))
    each = np.stack([shift_gradient(c, p, e[b], w[b]) for b in range(5)])
    assert np.allclose(shift_gradient(c, p, e, w), each.mean(axis=0), atol=1e-14)


def test_cached_and_row_paths_agree(rng):
    c = qc.assemble_pure_qvc(4, 2)
    p = rng.uniform(0, 6, c.param_count)
    e = rng.uniform(0, 6, (3, 8))
    cached = diffgrad._shifted_readouts_cached(c, p, e, PAULI_SHIFT.shift)
    rows = diffgrad._shifted_readouts_rows(c, p, e, PAULI_SHIFT.shift)
    for a, b in zip(cached, rows):
        assert np.max(np.abs(a - b)) <= 1e-12


def test_jacobian_is_deterministic(rng):
    c = qc.assemble_hybrid_qvc(4, 3)
    p = rng.uniform(0, 6, c.param_count)
    e = rng.uniform(0, 6, (6, 8))
    a = readout_jacobian(c, p, e)
    assert a.shape == (6, 36, 4)
    assert np.array_equal(a, readout_jacobian(c, p, e))
    # per-sample evaluation in reverse order gives identical rows
    rev = np.stack([readout_jacobian(c, p, e[b])[0] for b in reversed(range(6))])[::-1]
    assert np.allclose(a, rev, atol=1e-14)


def test_length_mismatch_rejected():
    with pytest.raises(ConfigError):
        shift_gradient(RX1, [0.1], [], [1.0, 2.0])
    with pytest.raises(ConfigError):
        shift_gradient(RX1, [0.1, 0.2], [], [1.0])
    with pytest.raises(ConfigError):
        finite_diff_oracle(RX1, [0.1], [], [1.0], h=0.0)
