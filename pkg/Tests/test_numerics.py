import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lab.bounds import cusp_split
from lab.errors import NumericalFailure
from lab.numerics import (
    checked_quad,
    expand_bracket,
    increasing_root,
    min_of_inverses,
    safe_power,
    threshold_bisect,
    x_and_p_bounds,
)
from lab.streams import TAG_TRIAL, StreamPartition, generator


def test_safe_power_zero_cases():
    assert safe_power(0.0, 0.0) == 1.0
    assert safe_power(0.0, 2.0) == 0.0
    np.testing.assert_allclose(safe_power([0.0, 2.0, -3.0], 2.0), [0.0, 4.0, 9.0])


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e3), st.floats(0, 8), st.floats(0, 8))
def test_x_and_p_inequalities(x, p, q):
    first, second = x_and_p_bounds(x, p, q)
    for lower, middle, upper in (first, second):
        assert lower <= middle * (1 + 1e-12)
        assert middle <= upper * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-10, 10))
def test_cusp_split_adds_up(p, t):
    u, v = cusp_split(p, t)
    assert u + v == pytest.approx(abs(t) ** p, abs=1e-12)
    assert v <= 1e-12
    if abs(t) >= 1:
        assert v == 0.0


def test_min_of_inverses():
    assert min_of_inverses(lambda s: s / 2, lambda s: math.sqrt(s), 16.0) == 4.0


def test_threshold_bisect_expands_bracket():
    assert threshold_bisect(lambda t: t >= 3.7) == pytest.approx(3.7, abs=1e-9)
    assert threshold_bisect(lambda t: t >= -12.5) == pytest.approx(-12.5, abs=1e-9)


def test_expand_bracket_gives_up():
    with pytest.raises(NumericalFailure):
        expand_bracket(lambda t: True, -1.0, 1.0)


def test_increasing_root():
    assert increasing_root(lambda x: x ** 3, 2.0, 0.0, 2.0) == pytest.approx(2.0 ** (1 / 3), abs=1e-10)


def test_increasing_root_needs_sign_change():
    with pytest.raises(NumericalFailure) as info:
        increasing_root(lambda x: x, 5.0, 0.0, 1.0)
    assert info.value.diagnostic["f_hi"] == -4.0


def test_checked_quad():
    assert checked_quad(lambda x: math.exp(-x), 0.0, math.inf) == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(NumericalFailure):
        checked_quad(lambda x: 1.0 / x, 0.0, 1.0)


def test_generator_is_keyed():
    first = generator(5, TAG_TRIAL, 0).standard_normal(4)
    assert np.array_equal(first, generator(5, TAG_TRIAL, 0).standard_normal(4))
    assert not np.array_equal(first, generator(5, TAG_TRIAL, 1).standard_normal(4))
    with pytest.raises(ValueError):
        generator(-1)


def test_partition_blocks_cover_range():
    partition = StreamPartition(seed=3, kind="block", block=4)
    assert list(partition.blocks(10)) == [(0, 0, 4), (1, 4, 8), (2, 8, 10)]
    assert partition.describe()["generator"] == "Philox/SeedSequence"
    columns = StreamPartition(seed=3)
    assert len(list(columns.blocks(3))) == 3
