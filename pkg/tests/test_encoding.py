import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qvcrl.encoding import (
    BLACKJACK_RANGES,
    RangeSpec,
    binary_obs_for_baseline,
    directional_encode,
    minmax_obs_for_baseline,
    scaled_encode,
)
from qvcrl.errors import ConfigError, InputError

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
SPEC = RangeSpec(((-2.0, 3.0),))


@pytest.mark.parametrize("v, angle", [(-2.0, 0.0), (3.0, 2 * math.pi), (0.5, math.pi)])
def test_scaled_endpoints_and_midpoint(v, angle):
    assert np.array_equal(scaled_encode([v], SPEC), [angle, angle])


def test_scaled_clamps_out_of_range():
    assert np.array_equal(scaled_encode([-10.0], SPEC), [0.0, 0.0])
    assert np.array_equal(scaled_encode([10.0], SPEC), [2 * math.pi] * 2)


def test_blackjack_defaults_cover_observations():
    angles = scaled_encode([31, 10, 1], BLACKJACK_RANGES)
    assert angles.shape == (6,)
    assert np.all((angles >= 0) & (angles <= 2 * math.pi))


@pytest.mark.parametrize("obs, expected", [
    ([0.3, -1.2], [math.pi, math.pi, 0, 0]),
    ([0.0], [0, 0]),
    ([1e9], [math.pi, math.pi]),
])
def test_directional_examples(obs, expected):
    assert np.array_equal(directional_encode(obs), expected)


@pytest.mark.parametrize("obs, expected", [([0.3, -1.2], [1, 0]), ([0, 0, 0, 0], [0, 0, 0, 0])])
def test_binary_examples(obs, expected):
    assert np.array_equal(binary_obs_for_baseline(obs), expected)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(InputError):
        scaled_encode([bad], SPEC)
    with pytest.raises(InputError):
        directional_encode([bad])
    with pytest.raises(InputError):
        binary_obs_for_baseline([bad])


def test_range_spec_validation_and_round_trip():
    with pytest.raises(ConfigError):
        RangeSpec(((1.0, 1.0),))
    spec = RangeSpec.parse("0:32, 1:11, 0:1")
    assert spec == BLACKJACK_RANGES
    assert RangeSpec.parse(spec.format()) == spec
    with pytest.raises(ConfigError):
        scaled_encode([1.0, 2.0], SPEC)


@given(st.lists(finite, min_size=1, max_size=6))
def test_directional_values_and_positive_scaling(obs):
    out = directional_encode(obs)
    assert len(out) == 2 * len(obs)
    assert set(out.tolist()) <= {0.0, math.pi}
    assert np.array_equal(directional_encode(np.asarray(obs) * 3.7), out)
    assert np.array_equal(binary_obs_for_baseline(obs), out[::2] / math.pi)


@given(finite, finite)
def test_scaled_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    ea, eb = scaled_encode([lo], SPEC)[0], scaled_encode([hi], SPEC)[0]
    assert 0.0 <= ea <= eb <= 2 * math.pi


@given(finite)
def test_minmax_is_scaled_over_two_pi(v):
    assert minmax_obs_for_baseline([v], SPEC)[0] == pytest.approx(scaled_encode([v], SPEC)[0] / (2 * math.pi))
