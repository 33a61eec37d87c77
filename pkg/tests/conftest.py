import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from homoclinic import (
    energy_J,
    grad_J,
    ExponentSeq,
    LatticeVector,
    Problem,
    WeightSeq,
    make_decay_family,
    make_growth_family,
)
from homoclinic.lattice import AbsFix1Rule, AbsPlusRule, ConstantRule

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


def make_problem(p=2.0, b=None, a=None):
    exps = ExponentSeq.constant(p) if np.isscalar(p) else p
    return Problem(exps, WeightSeq(a or ConstantRule(1.0), b or AbsFix1Rule()))


@pytest.fixture
def instance_a():
    """p = 2, a = 1, b_k = |k| + 1."""
    return make_problem(2.0, AbsPlusRule(1.0))


@pytest.fixture
def example_prob():
    """p = 2, a = 1, b_0 = 1 and b_k = |k| otherwise."""
    return make_problem(2.0)


@pytest.fixture
def decay():
    return make_decay_family(2.0, 2.0, 2.0)


@pytest.fixture
def growth():
    return make_growth_family(3.0, 2.0, 2.0)


def random_vector(rng, max_len=64, scale=1.0, lo=-20, hi=20):
    n = int(rng.integers(1, max_len + 1))
    off = int(rng.integers(lo, hi + 1))
    return LatticeVector(off, scale * rng.standard_normal(n))


def _breaks(fam, k):
    out = [0.0]
    for c, d in fam.support(k):
        out += [c, 0.5 * (c + d), d]
    return np.array(out)


def fd_check(prob, fam, rng, n_pairs, scale=0.3, gap=1e-4, h=1e-6):
    """Worst relative gap between grad_J and central differences, away from kinks."""
    worst, done = 0.0, 0
    while done < n_pairs:
        u = LatticeVector(int(rng.integers(-3, 3)), rng.uniform(-scale, scale, int(rng.integers(1, 8))))
        g = grad_J(u, prob, fam)
        j = int(rng.integers(u.offset, u.stop))
        x = u[j]
        if np.min(np.abs(_breaks(fam, j) - x)) < gap:
            continue
        if abs(u[j + 1] - x) < gap or abs(x - u[j - 1]) < gap:
            continue
        e = np.zeros(len(u))
        e[j - u.offset] = h
        jp = energy_J(LatticeVector(u.offset, u.values + e), prob, fam).j
        jm = energy_J(LatticeVector(u.offset, u.values - e), prob, fam).j
        fd = (jp - jm) / (2 * h)
        worst = max(worst, abs(g[j] - fd) / max(abs(fd), abs(g[j])))
        done += 1
    return worst
