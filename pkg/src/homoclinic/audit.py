"""Numerical auditors for the hypotheses on the nonlinearity.

Every auditor returns evidence (a value plus a witness), never a proof:
liminf/limsup statements over unbounded ranges are only sampled. For the
builtin tent families all maxima and supports are closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .energy import Certificate, make_certificate
from .lattice import Problem
from .logdomain import LogReal
from .nonlinearity import (
    CustomFamily,
    Nonlinearity,
    SignIntervalFamily,
    TentFamily,
    ZeroFamily,
    sum_max_F_log,
)

DEFAULT_SAMPLES = 1024


@dataclass
class Audit:
    name: str
    passed: bool
    value: object = None
    witness: object = None
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "status": "pass" if self.passed else "fail",
                "value": self.value, "witness": self.witness, **self.detail}


def default_k_range(fam: Nonlinearity) -> range:
    if isinstance(fam, TentFamily):
        if fam.k0 is not None:
            return range(fam.k0, fam.k0 + 1)
        return range(1, fam.cap + 1)
    if isinstance(fam, CustomFamily) and fam.sites:
        return range(min(fam.sites), max(fam.sites) + 1)
    return range(0)


def check_F1(fam: Nonlinearity, k_range=None) -> Audit:
    """``f_k(0) = 0`` on every site of ``k_range``."""
    ks = list(default_k_range(fam) if k_range is None else k_range)
    vals = fam.table(ks).f(np.zeros(len(ks))) if ks else np.zeros(0)
    worst = float(np.max(np.abs(vals))) if vals.size else 0.0
    witness = int(ks[int(np.argmax(np.abs(vals)))]) if worst > 0 else None
    return Audit("F1", worst == 0.0, worst, witness)


@dataclass
class F2Result:
    sum_estimate: float
    per_site_max: dict


def check_F2(fam: Nonlinearity, T: float, k_range=None,
             samples_per_interval: int = DEFAULT_SAMPLES) -> F2Result:
    """``sum_k max_{|t| <= T} |f_k(t)|`` over ``k_range``."""
    if not T > 0:
        raise ValueError("T must be positive")
    ks = default_k_range(fam) if k_range is None else k_range
    per = {}
    for k in fam.active_sites(ks):
        v = fam.max_abs_f(k, T, samples_per_interval)
        if v:
            per[int(k)] = v
    return F2Result(math.fsum(per.values()), per)


@dataclass
class SignCheck:
    ok: bool
    offenders: list  # (k, t, f_k(t)) with f_k(t) > 0
    worst: Optional[tuple]


def check_sign_intervals(fam: Nonlinearity, intervals: SignIntervalFamily, k_range=None,
                         samples: int = DEFAULT_SAMPLES) -> SignCheck:
    """Is ``f_k <= 0`` on every claimed interval, for every k in ``k_range``?"""
    ks = default_k_range(fam) if k_range is None else k_range
    offenders = []
    if isinstance(fam, TentFamily):
        for k in fam.active_sites(ks):
            for tent in fam.tents_at(k):
                if tent.status != "normal":
                    continue
                for lo, hi in intervals.intervals:
                    a, b = max(tent.c, lo), min(tent.d, hi)
                    if a < b:
                        mid = 0.5 * (tent.c + tent.d)
                        t = min(max(mid, a), b)
                        offenders.append((int(k), t, fam.f(k, t)))
    elif not isinstance(fam, ZeroFamily):
        for k in fam.active_sites(ks):
            tab = fam.table([k])
            for lo, hi in intervals.intervals:
                grid = np.linspace(lo, hi, samples)
                if isinstance(fam, CustomFamily):
                    bps = [t for t in fam.sites[k].ts if lo <= t <= hi]
                    grid = np.unique(np.concatenate((grid, bps)))
                vals = np.array([float(tab.f(np.array([t]))[0]) for t in grid])
                j = int(np.argmax(vals))
                if vals[j] > 0:
                    offenders.append((int(k), float(grid[j]), float(vals[j])))
    worst = max(offenders, key=lambda o: o[2]) if offenders else None
    return SignCheck(not offenders, offenders, worst)


@dataclass
class F4Estimate:
    direction: str
    rows: list  # dicts: m, log2_t, log2_ratio, ratio
    liminf_estimate: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.liminf_estimate < self.threshold

    @property
    def ratios(self) -> list:
        return [r["ratio"] for r in self.rows]


def _lin_or_inf(lg):
    if lg == -math.inf:
        return 0.0
    return float(np.exp2(lg)) if lg < 1023 else math.inf


def _t_points(fam, m_range, t_log2):
    if t_log2 is not None:
        return [(m, float(t_log2(m))) for m in m_range]
    if not isinstance(fam, TentFamily):
        raise ValueError("non-tent families need an explicit t sequence")
    return [(m, fam.tent(m).log2_c) for m in m_range]


def estimate_F4(fam: Nonlinearity, prob: Problem, direction: str = "zero", m_range=range(1, 6),
                t_log2=None, k_range=range(-64, 65)) -> F4Estimate:
    """Ratios ``A_m = (sum_k max_{|xi|<=t_m} F_k(xi)) / t_m^p`` along ``t_m = c_m``.

    p is p+ towards zero and p- towards infinity; the running minimum is the
    liminf estimate, compared against ``1/(p+ alpha^p+)`` resp. ``1/(p+ alpha^p-)``.
    """
    if direction not in ("zero", "infinity"):
        raise ValueError(f"unknown direction {direction!r}")
    al, pp, pm = prob.alpha, prob.pplus, prob.pminus
    expo = pp if direction == "zero" else pm
    threshold = 1.0 / (pp * al ** expo)
    rows, running = [], math.inf
    for m, lt in _t_points(fam, m_range, t_log2):
        S = sum_max_F_log(fam, LogReal.pow2(lt), k_range)
        lr = -math.inf if S.sign == 0 else S.log2 - expo * lt
        ratio = _lin_or_inf(lr)
        running = min(running, ratio)
        rows.append({"m": int(m), "log2_t": lt, "log2_ratio": lr, "ratio": ratio})
    return F4Estimate(direction, rows, running, threshold)


@dataclass
class ModifiedHeightBound:
    rows: list
    lower_bound: float
    threshold: float

    @property
    def holds(self) -> bool:
        return all(r["ratio"] >= self.lower_bound * (1 - 1e-12) for r in self.rows)


def modified_height_bound(fam: TentFamily, prob: Problem, m_range=range(1, 5)) -> ModifiedHeightBound:
    """``(sum_k max_{|xi|<=c_{m+1}} F_k) / c_m^p+`` against ``2/(alpha^p+ p+)``.

    For t in ``[c_{m+1}, c_m]`` the F4 quotient towards zero dominates this
    ratio, so a uniform lower bound above ``1/(p+ alpha^p+)`` rules F4 out.
    """
    al, pp = prob.alpha, prob.pplus
    rows = []
    for m in m_range:
        S = fam.sum_max_F_log(LogReal.pow2(fam.tent(m + 1).log2_c))
        lr = S.log2 - pp * fam.tent(m).log2_c
        rows.append({"m": int(m), "log2_ratio": lr, "ratio": _lin_or_inf(lr)})
    return ModifiedHeightBound(rows, 2.0 / (al ** pp * pp), 1.0 / (pp * al ** pp))


def default_t_grid(fam: Nonlinearity) -> list:
    """log2 heights to scan: the right endpoints d_m of the builtin tents."""
    if isinstance(fam, TentFamily):
        return [fam.tent(m).log2_d for m in range(1, fam.cap + 1)]
    if isinstance(fam, CustomFamily):
        pts = sorted({t for p in fam.sites.values() for t in p.ts if t > 0})
        return [math.log2(t) for t in pts]
    return []


def spike_ratio_log2(prob: Problem, fam: Nonlinearity, k: int, log2_t: float,
                     direction: str) -> float:
    """log2 of ``F_k(t) / ((a_{k-1} + a_k + b_k) t^p)``."""
    a = prob.weights.a([k - 1, k])
    b = float(prob.weights.b([k])[0])
    p = prob.pminus if direction == "zero" else prob.pplus
    F = fam.F_log(k, LogReal.pow2(log2_t))
    if F.sign <= 0:
        return -math.inf
    return F.log2 - math.log2(float(a.sum()) + b) - p * log2_t


def spike_condition_scan(fam: Nonlinearity, prob: Problem, direction: str = "zero",
                         k_range=None, t_grid=None) -> list[Certificate]:
    """Every grid point ``(k, t)`` with ``F_k(t) > (a_{k-1}+a_k+b_k) t^p / p-``.

    ``t_grid`` holds log2 heights. Each hit is returned as a certificate
    carrying the closed-form spike energy.
    """
    ks = default_k_range(fam) if k_range is None else k_range
    grid = default_t_grid(fam) if t_grid is None else list(t_grid)
    cutoff = -math.log2(prob.pminus)
    out = []
    for k in fam.active_sites(ks):
        for lt in grid:
            lr = spike_ratio_log2(prob, fam, k, lt, direction)
            if lr > cutoff:
                out.append(make_certificate(prob, fam, k, lt, "descent_spike", lr))
    return out


def _audit_F5(certs, ks):
    ks = list(ks)
    if not ks:
        return Audit("F5", False, None, None)
    upper = ks[len(ks) // 2]
    far = [c for c in certs if c.site >= upper]
    best = max(far, key=lambda c: c.log2_ratio, default=None)
    return Audit("F5", bool(far), None if best is None else best.log2_ratio,
                 None if best is None else [best.site, best.log2_height],
                 {"sites_with_certificates": sorted({c.site for c in certs})})


def _audit_F6(certs, grid, direction):
    if not grid:
        return Audit("F6", False, None, None)
    ordered = sorted(grid) if direction == "zero" else sorted(grid, reverse=True)
    extreme = set(ordered[:max(1, len(ordered) // 4)])
    hits = [c for c in certs if c.log2_height in extreme]
    by_site = {}
    for c in hits:
        by_site.setdefault(c.site, []).append(c)
    site = max(by_site, key=lambda s: len(by_site[s]), default=None)
    count = 0 if site is None else len(by_site[site])
    # one hit per site is what a moving spike gives; a fixed site needs repeats
    return Audit("F6", count >= min(2, len(extreme)), count, site)


def run_audits(prob: Problem, fam: Nonlinearity, names, *, T: Optional[float] = None,
               intervals: Optional[SignIntervalFamily] = None, direction: str = "zero",
               k_range=None, m_range=range(1, 6), t_grid=None,
               samples: int = DEFAULT_SAMPLES) -> list[Audit]:
    """Run the requested hypothesis audits (any of F1..F6)."""
    ks = default_k_range(fam) if k_range is None else k_range
    out = []
    certs = None
    for name in names:
        if name == "F1":
            out.append(check_F1(fam, ks))
        elif name == "F2":
            if T is None:
                raise ValueError("F2 audit needs T")
            r = check_F2(fam, T, ks, samples)
            out.append(Audit("F2", math.isfinite(r.sum_estimate), r.sum_estimate, None,
                             {"T": T, "per_site_max": {str(k): v for k, v in r.per_site_max.items()}}))
        elif name == "F3":
            if intervals is None:
                raise ValueError("F3 audit needs sign intervals")
            r = check_sign_intervals(fam, intervals, ks, samples)
            out.append(Audit("F3", r.ok, len(r.offenders),
                             None if r.worst is None else list(r.worst),
                             {"intervals": [list(iv) for iv in intervals.intervals],
                              "direction": intervals.direction}))
        elif name == "F4":
            r = estimate_F4(fam, prob, direction, m_range)
            out.append(Audit("F4", r.passed, r.liminf_estimate, None,
                             {"threshold": r.threshold, "rows": r.rows, "direction": direction}))
        elif name in ("F5", "F6"):
            grid = default_t_grid(fam) if t_grid is None else list(t_grid)
            if certs is None:
                certs = spike_condition_scan(fam, prob, direction, ks, grid)
            out.append(_audit_F5(certs, ks) if name == "F5" else _audit_F6(certs, grid, direction))
        else:
            raise ValueError(f"unknown audit {name!r}")
    return out
