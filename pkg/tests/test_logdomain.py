import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homoclinic.logdomain import IndeterminateSign, LogReal, log2_diff, log2_sum

finite = st.floats(min_value=-1e200, max_value=1e200, allow_nan=False).filter(
    lambda x: x == 0 or abs(x) > 1e-200)


def test_zero_is_normalized():
    assert LogReal.from_float(0.0) == LogReal.zero()
    assert LogReal(1, -math.inf).sign == 0


@given(finite)
def test_float_round_trip(x):
    # exp2(log2 x) loses about |log2 x| ulps
    assert LogReal.from_float(x).to_float() == pytest.approx(x, rel=1e-13)


@given(finite, finite)
def test_addition_matches_float(x, y):
    exact = mpmath.mpf(x) + mpmath.mpf(y)
    try:
        got = (LogReal.from_float(x) + LogReal.from_float(y)).to_float()
    except IndeterminateSign:
        assert abs(exact) <= 1e-11 * max(abs(x), abs(y))
        return
    assert got == pytest.approx(float(exact), rel=1e-9, abs=1e-300)


@given(finite, finite)
def test_ordering_matches_float(x, y):
    a, b = LogReal.from_float(x), LogReal.from_float(y)
    assert (a < b) == (x < y)
    assert (a <= b) == (x <= y)


def test_cancellation_is_flagged():
    with pytest.raises(IndeterminateSign):
        LogReal.pow2(700.0) - LogReal.pow2(700.0)
    with pytest.raises(IndeterminateSign):
        LogReal.from_float(1.0) - LogReal.from_float(1.0 + 1e-14)


def test_beyond_double_range():
    big = LogReal.pow2(2000.0)
    assert not big.representable
    with pytest.raises(OverflowError):
        big.to_float()
    assert (big * LogReal.pow2(-1990.0)).to_float() == 1024.0
    assert (big ** 0.5).log2 == 1000.0


def test_growth_scale_difference():
    # 2^729 - 2^243 keeps the sign of the larger term
    d = LogReal.pow2(729.0) - LogReal.pow2(243.0)
    assert d.sign == 1
    assert d.log2 == pytest.approx(729.0, abs=1e-12)


def test_log2_helpers():
    assert log2_sum([3.0, 3.0]) == pytest.approx(4.0)
    assert log2_sum([]) == -math.inf
    assert log2_diff(2.0, 1.0) == pytest.approx(1.0)
    assert log2_diff(10.0, 0.0) == pytest.approx(math.log2(1023.0))
