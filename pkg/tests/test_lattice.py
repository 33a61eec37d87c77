import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homoclinic import (
    ExponentSeq,
    LatticeVector,
    Problem,
    WeightSeq,
    alpha,
    forward_diff,
    luxemburg_norm,
    modular,
    rule_from_string,
    sup_norm,
)
from homoclinic.lattice import (
    AbsPlusRule,
    ConstantRule,
    CosineRule,
    NonPositiveWeightError,
    LatticeError,
    ModularOverflowError,
    TableRule,
    TableRangeError,
    alpha_report,
)

from conftest import make_problem

vectors = st.builds(
    LatticeVector,
    st.integers(-10, 10),
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=12),
)


def variable_problem():
    return Problem(ExponentSeq.from_rule(CosineRule(1.5, 3.0)),
                   WeightSeq(ConstantRule(1.0), AbsPlusRule(1.0)))


# --- vectors ----------------------------------------------------------------


def test_equality_ignores_stored_zeros():
    assert LatticeVector(0, [0, 1, 2, 0]) == LatticeVector(1, [1, 2])
    assert LatticeVector(3, [0, 0]) == LatticeVector.zeros()
    assert LatticeVector(0, [1]) != LatticeVector(1, [1])


def test_non_finite_entries_rejected():
    with pytest.raises(LatticeError):
        LatticeVector(0, [1.0, math.nan])


def test_forward_diff_examples():
    d = forward_diff(LatticeVector.spike(0, 1.0))
    assert d[0] == -1.0 and d[-1] == 1.0 and d[1] == 0.0
    assert forward_diff(LatticeVector.zeros()) == LatticeVector.zeros()
    d = forward_diff(LatticeVector(0, [1, 2, 4]))
    assert d.offset == -1
    assert d.values.tolist() == [1, 1, 2, -4]


@given(vectors)
def test_forward_diff_support(u):
    d = forward_diff(u)
    assert d.offset >= u.offset - 1 and d.stop <= u.stop
    for k in range(u.offset - 2, u.stop + 2):
        assert d[k] == u[k + 1] - u[k]


def test_sup_norm_examples():
    assert sup_norm(LatticeVector.spike(7, -2.0)) == 2.0
    assert sup_norm(LatticeVector.zeros()) == 0.0
    assert sup_norm(LatticeVector(0, [1, -3, 2])) == 3.0


# --- modulars and norms -------------------------------------------------------


def test_modular_examples(instance_a):
    assert modular(LatticeVector.spike(0, 1.0), instance_a) == 3.0
    assert modular(LatticeVector.zeros(), instance_a) == 0.0
    assert modular(LatticeVector.spike(5, 2.0), make_problem(3.0), "lpk") == 8.0


def test_norm_examples(instance_a):
    assert luxemburg_norm(LatticeVector.spike(0, 1.0), instance_a) == pytest.approx(
        math.sqrt(3.0), abs=1e-10)
    assert luxemburg_norm(LatticeVector.zeros(), instance_a) == 0.0
    u = LatticeVector(-1, [0.3, -0.2, 0.5])
    v = u.scaled(1.0 / math.sqrt(modular(u, instance_a)))
    assert modular(v, instance_a) == pytest.approx(1.0, abs=1e-12)
    assert luxemburg_norm(v, instance_a) == pytest.approx(1.0, abs=1e-10)


def test_modular_against_mpmath():
    prob = variable_problem()
    rng = np.random.default_rng(3)
    for _ in range(30):
        u = LatticeVector(int(rng.integers(-8, 8)), rng.standard_normal(int(rng.integers(1, 10))))
        ks = list(range(u.offset - 1, u.stop))
        p = prob.exponents(ks)
        b = prob.weights.b(ks)
        with mpmath.workdps(40):
            ref = mpmath.fsum(
                abs(mpmath.mpf(u[k + 1]) - u[k]) ** mpmath.mpf(p[i])
                + mpmath.mpf(b[i]) * abs(mpmath.mpf(u[k])) ** mpmath.mpf(p[i])
                for i, k in enumerate(ks))
        assert modular(u, prob) == pytest.approx(float(ref), rel=1e-13)


def test_modular_overflow_is_reported(instance_a):
    with pytest.raises(ModularOverflowError):
        modular(LatticeVector.spike(0, 1e200), instance_a)


def test_norm_of_tiny_and_huge_vectors(instance_a):
    # scale invariance for constant p holds far outside the unit range
    base = luxemburg_norm(LatticeVector(0, [1.0, 0.5]), instance_a)
    for s in (2.0 ** -600, 2.0 ** 600):
        got = luxemburg_norm(LatticeVector(0, [s, 0.5 * s]), instance_a)
        assert got == pytest.approx(s * base, rel=1e-10)


@given(vectors.filter(lambda u: not u.is_zero()))
def test_norm_normalizes_modular(u):
    prob = variable_problem()
    eta = luxemburg_norm(u, prob)
    # divide rather than scale by 1/eta, which overflows for subnormal entries
    assert modular(LatticeVector(u.offset, u.values / eta), prob) == pytest.approx(1.0, abs=1e-9)


@given(vectors.filter(lambda u: not u.is_zero()), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_norm_scaling(u, s, t):
    prob = variable_problem()
    lo, hi = sorted((s, t))
    assert luxemburg_norm(u.scaled(lo), prob) <= luxemburg_norm(u.scaled(hi), prob) * (1 + 1e-10)
    const = make_problem(2.5, AbsPlusRule(1.0))
    assert luxemburg_norm(u.scaled(t), const) == pytest.approx(
        t * luxemburg_norm(u, const), rel=1e-10, abs=1e-300)


@given(vectors.filter(lambda u: not u.is_zero()))
def test_norm_modular_relations(u):
    prob = variable_problem()
    eta, rho = luxemburg_norm(u, prob), modular(u, prob)
    pm, pp = prob.pminus, prob.pplus
    tol = 1e-9
    if eta <= 1:
        assert eta ** pp * (1 - tol) <= rho <= eta ** pm * (1 + tol)
    else:
        assert eta ** pm * (1 - tol) <= rho <= eta ** pp * (1 + tol)


# --- alpha and rules ----------------------------------------------------------


def test_alpha_examples(instance_a, example_prob):
    assert alpha(instance_a) == 1.0
    assert instance_a.alpha_report.flag == "exact"
    assert alpha(make_problem(2.0, AbsPlusRule(4.0))) == 0.5
    assert alpha(example_prob) == 1.0


def test_alpha_without_tail_is_flagged():
    prob = Problem(ExponentSeq.constant(2.0), WeightSeq(ConstantRule(1.0), CosineRule(1.0, 4.0)))
    rep = alpha_report(prob, 16)
    assert rep.flag == "window-supremum"
    # the supremum 1 is not attained on Z, so the window maximum is all we can claim
    ks = np.arange(-16, 17)
    expected = np.max((1.0 + 1.5 * (1.0 + np.cos(ks))) ** -0.5)
    assert rep.value == expected < 1.0


def test_zero_weight_is_rejected():
    prob = make_problem(2.0, AbsPlusRule(0.0))
    with pytest.raises(NonPositiveWeightError):
        alpha(prob)


@given(st.integers(-50, 50))
def test_alpha_dominates_every_site(k):
    prob = variable_problem()
    b, p = prob.weights.b([k])[0], prob.exponents([k])[0]
    assert prob.alpha >= b ** (-1.0 / p)


def test_table_rule_has_no_extrapolation():
    rule = TableRule(-1, (1.0, 2.0, 3.0))
    assert rule([-1, 0, 1]).tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(TableRangeError):
        rule([2])
    assert TableRule(-1, (1.0, 2.0), 5.0)([10]).tolist() == [5.0]


def test_exponent_bounds():
    with pytest.raises(LatticeError):
        ExponentSeq.constant(1.0)
    seq = ExponentSeq(TableRule(0, (2.0, 4.0), 2.0), 2.0, 3.0)
    with pytest.raises(LatticeError):
        seq([1])


def test_rule_parsing():
    assert rule_from_string("constant(2)")([3]).tolist() == [2.0]
    assert rule_from_string("abs_plus(1)")([-3]).tolist() == [4.0]
    assert rule_from_string("abs_fix1")([0, -2]).tolist() == [1.0, 2.0]
    assert rule_from_string("table(-1; 1, 2, 3; 4)")([5]).tolist() == [4.0]
    for bad in ("nope(1)", "constant()", "abs_plus(1, 2)", "table(0)"):
        with pytest.raises(LatticeError):
            rule_from_string(bad)
