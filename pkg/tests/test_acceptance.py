"""Acceptance criteria 1-10; each records one pass/fail line in the session summary."""

import json
import math
import time

import numpy as np
import pytest

from homoclinic import (
    CustomFamily,
    ExponentSeq,
    LatticeVector,
    PiecewiseLinear,
    Problem,
    SolverConfig,
    WeightSeq,
    check_F2,
    energy_J,
    estimate_F4,
    luxemburg_norm,
    minimize_box,
    modular,
    ricceri_sequence,
    solution_ladder,
    spike_condition_scan,
    sup_norm,
    truncate,
    verify_solution,
)
from homoclinic.cli import main, preset_text
from homoclinic.lattice import AbsPlusRule, ConstantRule, CosineRule
from homoclinic.solver import stopping_scale

import conftest
from conftest import fd_check, make_problem, random_vector


def record(k, ok, detail):
    conftest.ACCEPTANCE[k] = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def variable_corpus():
    """1000 vectors under p_k in [1.5, 3], spread over twelve decades of scale."""
    prob = Problem(ExponentSeq.from_rule(CosineRule(1.5, 3.0)),
                   WeightSeq(ConstantRule(1.0), AbsPlusRule(0.5)))
    rng = np.random.default_rng(20)
    out = []
    for _ in range(1000):
        u = random_vector(rng, 64, 10.0 ** rng.uniform(-6, 6))
        if not u.is_zero():
            out.append(u)
    return prob, out


def test_1_norm_oracle():
    rng = np.random.default_rng(10)
    worst = 0.0
    with Clock() as clk:
        for i in range(1000):
            p = (1.5, 2.0, 3.0)[i % 3]
            prob = make_problem(p, AbsPlusRule(1.0))
            u = random_vector(rng, 64, 10.0 ** rng.uniform(-3, 3))
            eta = luxemburg_norm(u, prob)
            ref = modular(u, prob) ** (1.0 / p)
            worst = max(worst, abs(eta - ref) / (1 + eta))
    ok = worst <= 1e-10 and clk.seconds < 5
    assert record(1, ok, f"worst |norm - rho^(1/p)|/(1+norm) = {worst:.2e}, {clk.seconds:.2f} s")


def test_2_modular_relations():
    prob, corpus = variable_corpus()
    pm, pp, tol = prob.pminus, prob.pplus, 1e-9
    bad = 0
    for u in corpus:
        eta, rho = luxemburg_norm(u, prob), modular(u, prob)
        # unit ball: the norm and the modular sit on the same side of 1
        if abs(eta - 1) > tol and (eta < 1) != (rho < 1):
            bad += 1
        if abs(modular(LatticeVector(u.offset, u.values / eta), prob) - 1) > tol:
            bad += 1
        lo, hi = (eta ** pp, eta ** pm) if eta <= 1 else (eta ** pm, eta ** pp)
        if not lo * (1 - tol) <= rho <= hi * (1 + tol):
            bad += 1
    assert record(2, bad == 0, f"{len(corpus)} vectors, {bad} violations")


def test_3_embedding():
    prob, corpus = variable_corpus()
    a = prob.alpha
    bad = sum(sup_norm(u) > a * luxemburg_norm(u, prob) + 1e-9 for u in corpus)
    assert record(3, bad == 0, f"alpha = {a:.6g} ({prob.alpha_report.flag}), {bad} violations")


def test_4_gradient(decay, example_prob):
    with Clock() as clk:
        worst = fd_check(example_prob, decay, np.random.default_rng(40), 500)
    ok = worst < 1e-6 and clk.seconds < 10
    assert record(4, ok, f"500 pairs, worst rel error {worst:.2e}, {clk.seconds:.2f} s")


def test_5_truncation_descent(decay, example_prob):
    rng = np.random.default_rng(50)
    bad, worst = 0, -math.inf
    for i in range(1000):
        rung = decay.ladder(1 + i % 3)
        n = int(rng.integers(1, 65))
        u = LatticeVector(int(rng.integers(-5, 6)), rng.uniform(-rung.box, rung.box, n))
        du = energy_J(truncate(u, rung.interior), example_prob, decay).j - energy_J(u, example_prob, decay).j
        worst = max(worst, du)
        bad += du > 1e-12
    assert record(5, bad == 0, f"max J(truncated) - J(u) = {worst:.3e}, {bad} violations")


def test_6_decay_closed_forms(decay, example_prob):
    with Clock() as clk:
        total = check_F2(decay, 0.25).sum_estimate
        f4 = estimate_F4(decay, example_prob, "zero", range(1, 4))
        certs = {(c.site, c.log2_height): 2.0 ** c.log2_ratio
                 for c in spike_condition_scan(decay, example_prob, "zero", range(1, 6))}
        ric = ricceri_sequence(example_prob, decay, range(1, 5))
    diag = [certs[(k, decay.tent(k).log2_d)] for k in (1, 2, 3)]
    checks = {
        "a": abs(total - 1.4588540) <= 1e-4,
        "b": (f4.ratios[0] == pytest.approx(0.0625, rel=1e-9)
              and f4.ratios[1] == pytest.approx(2.0 ** -16, rel=1e-9)
              and min(f4.ratios) < f4.threshold == 0.5),
        "c": (abs(certs[(1, -2.0)] - 0.6667) <= 1e-4
              and diag[0] < diag[1] < diag[2] and diag[2] >= 1.3e4),
        "d": (abs(ric[0].phi_bound - 0.125) <= 1e-6 and ric[1].phi_bound <= 1e-4
              and all(r.verdict for r in ric)),
    }
    ok = all(checks.values()) and clk.seconds < 5
    detail = (f"F2 {total:.7f}, A1 {f4.ratios[0]:.16g}, A2*2^16 {f4.ratios[1] * 2 ** 16:.6f}, "
              f"ratio(1,1/4) {certs[(1, -2.0)]:.4f}, ratio k=3 {diag[2]:.4g}, "
              f"phi_bound {ric[0].phi_bound:.7f}/{ric[1].phi_bound:.2e}, "
              f"failed {[k for k, v in checks.items() if not v]}, {clk.seconds:.2f} s")
    assert record(6, ok, detail)


def test_7_decay_ladder(decay, example_prob):
    cfg = SolverConfig(window_halfwidth=40)
    with Clock() as clk:
        r1, r2 = solution_ladder(example_prob, decay, [1, 2], cfg)
    scaled = [r.residual_sup <= cfg.grad_tol * stopping_scale(example_prob, decay.ladder(r.n).box)
              for r in (r1, r2)]
    ok = (all(scaled) and r1.converged and r2.converged
          and r1.j_value <= -2.136e-4 and r2.j_value <= -3.55e-15
          and r1.sup_norm <= 2.0 ** -8 and r2.sup_norm <= 2.0 ** -32
          and r1.norm_E > r2.norm_E
          and all(verify_solution(r, example_prob, decay).passed for r in (r1, r2))
          and clk.seconds < 60)
    detail = (f"J = {r1.j_value:.6e}, {r2.j_value:.6e}; sup = {r1.sup_norm:.3e}, {r2.sup_norm:.3e}; "
              f"norm_E = {r1.norm_E:.4e} > {r2.norm_E:.4e}; {clk.seconds:.2f} s")
    assert record(7, ok, detail)


def test_8_growth(growth, example_prob):
    with Clock() as clk:
        r1, r2 = solution_ladder(example_prob, growth, [1, 2], SolverConfig())
    bound = 1.5 * 2.0 ** 54 - 2.0 ** 81
    cert = r1.certificate.energy_value
    ok = (r1.j_value <= bound and abs(r1.j_value - cert) <= 1e-9 * abs(cert)
          and r2.certificate_only and r2.j_sign == -1 and abs(r2.log2_abs_j - 729) <= 0.01
          and r1.log2_abs_j < r2.log2_abs_j
          and verify_solution(r1, example_prob, growth).passed
          and clk.seconds < 60)
    detail = (f"J(u1) = {r1.j_value:.10e} (bound {bound:.10e}), rung 2 sign {r2.j_sign:+d} "
              f"log2|J| = {r2.log2_abs_j:.4f}; {clk.seconds:.2f} s")
    assert record(8, ok, detail)


# --- criterion 9: exhaustive grid over a seven-site window --------------------

LO, HI = -2, 4
C1, D1, H1 = 2.0 ** -4, 2.0 ** -2, 2.0 ** -3
BOX, STEP = 0.25, 2.0 ** -12


def tent_primitive(t):
    """Closed-form primitive of the first decay tent alone."""
    e, mid = 2 * H1 / (D1 - C1) ** 2, 0.5 * (C1 + D1)
    return np.where(t <= C1, 0.0, np.where(t <= mid, e * (t - C1) ** 2,
                                           np.where(t < D1, H1 - e * (D1 - t) ** 2, H1)))


def b_weight(k):
    return abs(k) if k else 1


def window_energy(x):
    """J on sites LO..HI with zero boundary (p = 2, a = 1, b = abs_fix1)."""
    padded = np.concatenate(([0.0], x, [0.0]))
    diffs = 0.5 * np.sum(np.diff(padded) ** 2)
    site = sum(0.5 * b_weight(k) * v ** 2 for k, v in zip(range(LO, HI + 1), x))
    return diffs + site - float(tent_primitive(x[1 - LO]))


def grid_minimum():
    """Exact minimum over the grid by dynamic programming along the chain."""
    g = np.arange(0.0, BOX + STEP / 2, STEP)
    edge = 0.5 * (g[None, :] - g[:, None]) ** 2
    cost = 0.5 * g ** 2  # edge from the zero boundary
    for k in range(LO, HI + 1):
        site = 0.5 * b_weight(k) * g ** 2 - (tent_primitive(g) if k == 1 else 0.0)
        if k > LO:
            cost = np.min(cost[:, None] + edge, axis=0)
        cost = cost + site
    return float(np.min(cost + 0.5 * g ** 2)), g.size


def test_9_brute_force(example_prob):
    fam = CustomFamily({1: PiecewiseLinear((C1, 0.5 * (C1 + D1), D1), (0.0, 2 * H1 / (D1 - C1), 0.0))})
    with Clock() as clk:
        j_grid, npts = grid_minimum()
        rec = minimize_box(example_prob, fam, BOX, SolverConfig(), LatticeVector.spike(1, BOX),
                           window=(LO, HI))
        x = np.array([rec.u[k] for k in range(LO, HI + 1)])
        slack = window_energy(np.round(x / STEP) * STEP) - window_energy(x)
    gap = abs(j_grid - rec.j_value)
    ok = (gap <= 2 * max(slack, 1e-15) and abs(window_energy(x) - rec.j_value) <= 1e-15
          and clk.seconds < 120)
    detail = (f"{npts} grid points per site, J_grid = {j_grid:.12e}, J_solver = {rec.j_value:.12e}, "
              f"gap {gap:.2e} vs slack {slack:.2e}; {clk.seconds:.2f} s")
    assert record(9, ok, detail)


def test_10_determinism(tmp_path, capsys):
    cfg = tmp_path / "ladder.ini"
    cfg.write_text(preset_text("decay").replace("rungs = 1..3", "rungs = 1..2"))
    blobs = []
    for d in ("first", "second"):
        assert main(["ladder", str(cfg), "--full-vectors", "--output-dir", str(tmp_path / d)]) == 0
        blobs.append((tmp_path / d / "ladder.json").read_bytes())
    capsys.readouterr()
    body = json.loads(blobs[0])
    ok = blobs[0] == blobs[1] and [r["n"] for r in body["records"]] == [1, 2]
    assert record(10, ok, f"ladder.json {len(blobs[0])} bytes, identical = {blobs[0] == blobs[1]}")
