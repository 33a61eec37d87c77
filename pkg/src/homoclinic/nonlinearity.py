"""Per-site nonlinearities f_k with closed-form primitives F_k.

The builtin families are cascades of triangular bumps ("tents"): site k
carries a tent on ``[c_k, d_k]`` of area ``h_k`` and slope parameter
``e_k = 2 h_k / (d_k - c_k)^2``. The sequences are stored as base-2 logs;
linear values are materialized only when they fit a double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .logdomain import MAX_LOG2, MIN_LOG2, LogReal

#: tents generated per builtin family before the log-domain tail is cut
TENT_CAP = 24


class FamilyConstraintError(ValueError):
    """Generator parameters violate the inequalities the family needs."""


class IntervalOrderError(ValueError):
    pass


# ---------------------------------------------------------------------------
# a single tent


@dataclass(frozen=True)
class Tent:
    m: int
    log2_c: float
    log2_d: float
    log2_h: float

    @cached_property
    def log2_width(self) -> float:
        return self.log2_d + math.log2(-math.expm1((self.log2_c - self.log2_d) * math.log(2)))

    @cached_property
    def log2_e(self) -> float:
        return 1.0 + self.log2_h - 2.0 * self.log2_width

    @cached_property
    def status(self) -> str:
        """``normal``, ``below`` (numerically zero), ``above`` (never reached
        by a finite double) or ``overflow`` (reachable but not materializable)."""
        if self.log2_d < MIN_LOG2 or self.log2_h < MIN_LOG2:
            return "below"
        if self.log2_c > MAX_LOG2:
            return "above"
        if max(self.log2_d, self.log2_h, self.log2_e, self.log2_width) > MAX_LOG2:
            return "overflow"
        return "normal"

    def _lin(self, lg):
        if lg > MAX_LOG2:
            raise OverflowError(f"tent m={self.m}: 2**{lg:.6g} exceeds double range")
        return float(np.exp2(lg))

    @property
    def c(self) -> float:
        return self._lin(self.log2_c)

    @property
    def d(self) -> float:
        return self._lin(self.log2_d)

    @property
    def h(self) -> float:
        return self._lin(self.log2_h)

    @property
    def e(self) -> float:
        return 2.0 * self.h / (self.d - self.c) ** 2

    @property
    def peak(self) -> float:
        """Maximum of the tent, ``2 h / (d - c)``, at the midpoint."""
        return 2.0 * self.h / (self.d - self.c)

    @property
    def log2_peak(self) -> float:
        return 1.0 + self.log2_h - self.log2_width

    # log-domain primitive, used where linear values overflow
    def F_log(self, t: LogReal) -> LogReal:
        if t.sign <= 0 or t.log2 <= self.log2_c:
            return LogReal.zero()
        if t.log2 >= self.log2_d:
            return LogReal.pow2(self.log2_h)
        C, D = LogReal.pow2(self.log2_c), LogReal.pow2(self.log2_d)
        E = LogReal.pow2(self.log2_e)
        mid = (C + D) * 0.5
        if t <= mid:
            return E * (t - C) ** 2
        return LogReal.pow2(self.log2_h) - E * (D - t) ** 2

    def as_dict(self) -> dict:
        return {"m": self.m, "log2_c": self.log2_c, "log2_d": self.log2_d,
                "log2_h": self.log2_h, "log2_e": self.log2_e}


class _TentTable:
    """Vectorized tent evaluation on a fixed list of sites."""

    def __init__(self, tents_per_site: Sequence[Sequence[Tent]]):
        n = len(tents_per_site)
        live = [[t for t in ts if t.status in ("normal", "overflow")] for ts in tents_per_site]
        L = max([len(ts) for ts in live] + [0])
        self.C = np.full((L, n), np.inf)
        self.D = np.full((L, n), np.inf)
        self.H = np.zeros((L, n))
        self.E = np.zeros((L, n))
        self.guard = np.full(n, np.inf)
        for j, ts in enumerate(live):
            for i, t in enumerate(ts):
                if t.status == "overflow":
                    self.guard[j] = min(self.guard[j], t.c)
                    continue
                self.C[i, j], self.D[i, j] = t.c, t.d
                self.H[i, j], self.E[i, j] = t.h, t.e
        self.MID = 0.5 * (self.C + self.D)

    def _check(self, x):
        if np.any(x >= self.guard):
            j = int(np.flatnonzero(x >= self.guard)[0])
            raise OverflowError(
                f"tent at window position {j} is not representable in linear domain "
                f"(argument {x[j]:.6g} reaches its support)")

    def f(self, x):
        self._check(x)
        with np.errstate(invalid="ignore"):
            inside = (x >= self.C) & (x <= self.D)
            # distance to the nearer endpoint, no cancellation against d - c
            val = 2.0 * self.E * np.minimum(x - self.C, self.D - x)
            return np.where(inside, val, 0.0).sum(axis=0)

    def F(self, x):
        self._check(x)
        with np.errstate(invalid="ignore"):
            left = self.E * (x - self.C) ** 2
            right = self.H - self.E * (self.D - x) ** 2
            out = np.where(x <= self.C, 0.0,
                           np.where(x <= self.MID, left,
                                    np.where(x < self.D, right, self.H)))
        return out.sum(axis=0)

    def curvature(self, x):
        """``|F''|`` sitewise (2e inside a support, 0 outside)."""
        with np.errstate(invalid="ignore"):
            inside = (x > self.C) & (x < self.D)
        return np.where(inside, 2.0 * self.E, 0.0).sum(axis=0)

    def _piece(self, x):
        return np.where(x <= self.C, 0, np.where(x <= self.MID, 1, np.where(x < self.D, 2, 3)))

    def dF(self, x0, x1):
        """``F(x1) - F(x0)`` without cancellation when both lie on one piece."""
        self._check(x0)
        self._check(x1)
        p0, p1 = self._piece(x0), self._piece(x1)
        with np.errstate(invalid="ignore"):
            same_left = self.E * (x1 - x0) * (x1 + x0 - 2.0 * self.C)
            same_right = self.E * (x1 - x0) * (2.0 * self.D - x0 - x1)
            direct = self._F_layers(x1) - self._F_layers(x0)
            out = np.where(p0 != p1, direct,
                           np.where(p0 == 1, same_left,
                                    np.where(p0 == 2, same_right, 0.0)))
        return out.sum(axis=0)

    def _F_layers(self, x):
        left = self.E * (x - self.C) ** 2
        right = self.H - self.E * (self.D - x) ** 2
        return np.where(x <= self.C, 0.0,
                        np.where(x <= self.MID, left, np.where(x < self.D, right, self.H)))


# ---------------------------------------------------------------------------
# families


class Nonlinearity:
    """Base interface: sitewise ``f_k`` and ``F_k`` plus audit hooks."""

    family_id = "base"
    #: supports of every f_k lie in (0, inf); then F_k = 0 on (-inf, 0]
    positive_support = False

    def table(self, ks):
        """Object with vectorized ``f``, ``F``, ``dF`` for values on sites ``ks``."""
        raise NotImplementedError

    def f(self, k: int, t: float) -> float:
        return float(self.table([k]).f(np.array([float(t)]))[0])

    def F(self, k: int, t: float) -> float:
        return float(self.table([k]).F(np.array([float(t)]))[0])

    def support(self, k: int) -> list[tuple[float, float]]:
        raise NotImplementedError

    def active_sites(self, k_range) -> list[int]:
        """Sites in ``k_range`` where f_k may be nonzero."""
        return [k for k in k_range if self.support(k)]

    def max_abs_f(self, k: int, T: float, samples: int = 1024) -> float:
        raise NotImplementedError

    def max_F_log(self, k: int, t: LogReal, samples: int = 1024) -> LogReal:
        """``max_{|xi| <= t} F_k(xi)`` for ``t > 0``."""
        raise NotImplementedError

    def F_log(self, k: int, t: LogReal) -> LogReal:
        return LogReal.from_float(self.F(k, t.to_float()))

    def describe(self) -> dict:
        return {"family": self.family_id}


class ZeroFamily(Nonlinearity):
    """``f_k = 0`` for every k."""

    family_id = "zero"
    positive_support = True

    def table(self, ks):
        return _ZeroTable(len(ks))

    def support(self, k):
        return []

    def max_abs_f(self, k, T, samples=1024):
        return 0.0

    def max_F_log(self, k, t, samples=1024):
        return LogReal.zero()

    def F_log(self, k, t):
        return LogReal.zero()


class _ZeroTable:
    def __init__(self, n):
        self.n = n

    def f(self, x):
        return np.zeros_like(x, dtype=float)

    F = f

    def dF(self, x0, x1):
        return np.zeros_like(x0, dtype=float)

    curvature = f


@dataclass(frozen=True)
class LadderRung:
    """Box ``[0, box]`` for rung n, the interior bound it must settle below,
    and the spike witness (site, log2 height) backing a negative minimum."""

    n: int
    log2_box: float
    log2_interior: float
    spike_site: int
    log2_spike_height: float

    @property
    def box(self) -> float:
        return float(np.exp2(self.log2_box)) if self.log2_box <= MAX_LOG2 else math.inf

    @property
    def interior(self) -> float:
        return float(np.exp2(self.log2_interior)) if self.log2_interior <= MAX_LOG2 else math.inf


@dataclass(frozen=True)
class SignIntervalFamily:
    """Intervals on which f_k <= 0 is claimed, nested towards zero or infinity."""

    intervals: tuple
    direction: str  # "to_zero" | "to_infinity"

    def __post_init__(self):
        if self.direction not in ("to_zero", "to_infinity"):
            raise IntervalOrderError(f"unknown direction {self.direction!r}")
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        for i, (a, b) in enumerate(ivs):
            if not (0 < a < b):
                raise IntervalOrderError(f"interval {i + 1} = [{a}, {b}] needs 0 < c < d")
        for i in range(len(ivs) - 1):
            (a0, b0), (a1, b1) = ivs[i], ivs[i + 1]
            ok = b1 < a0 if self.direction == "to_zero" else b0 < a1
            if not ok:
                rel = "d_{n+1} < c_n" if self.direction == "to_zero" else "d_n < c_{n+1}"
                raise IntervalOrderError(f"intervals {i + 1},{i + 2} violate {rel}")


class TentFamily(Nonlinearity):
    """A family of tents attached to sites, generated from (q, p-, p+)."""

    positive_support = True

    def __init__(self, family_id: str, q: float, pminus: float, pplus: float,
                 tent_fn, direction: str, k0: Optional[int] = None,
                 extra: Optional[dict] = None, cap: int = TENT_CAP):
        self.family_id = family_id
        self.q, self.pminus, self.pplus = float(q), float(pminus), float(pplus)
        self.direction = direction
        self.k0 = k0
        self.extra = dict(extra or {})
        self.cap = cap
        self._tent_fn = tent_fn
        self._cache: dict[int, Tent] = {}

    def tent(self, m: int) -> Tent:
        if m < 1:
            raise ValueError("tent index starts at 1")
        if m not in self._cache:
            self._cache[m] = Tent(m, *self._tent_fn(m))
        return self._cache[m]

    def tents_at(self, k: int) -> tuple[Tent, ...]:
        if self.k0 is not None:
            return tuple(self.tent(m) for m in range(1, self.cap + 1)) if k == self.k0 else ()
        return (self.tent(k),) if k >= 1 else ()

    def table(self, ks):
        return _TentTable([self.tents_at(int(k)) for k in ks])

    def support(self, k):
        out = []
        for t in self.tents_at(k):
            if t.status in ("normal", "overflow"):
                out.append((t.c, t.d))
        return out

    def active_sites(self, k_range):
        if self.k0 is not None:
            return [self.k0] if self.k0 in k_range else []
        return [k for k in k_range if k >= 1]

    def max_abs_f(self, k, T, samples=1024):
        best = 0.0
        for t in self.tents_at(k):
            if t.status in ("below", "above"):
                continue
            if T <= t.c:
                continue
            mid = 0.5 * (t.c + t.d)
            val = t.peak if T >= mid else float(self.table([k]).f(np.array([T]))[0])
            best = max(best, val)
        return best

    def F_log(self, k, t):
        total = LogReal.zero()
        for tent in self.tents_at(k):
            total = total + tent.F_log(t)
        return total

    def max_F_log(self, k, t, samples=1024):
        # F_k is nondecreasing on [0, inf) and zero on (-inf, 0]
        return self.F_log(k, t)

    def sum_max_F_log(self, t: LogReal) -> LogReal:
        """``sum_k max_{|xi|<=t} F_k(xi)`` over all of Z (tail cut at ``cap``)."""
        total = LogReal.zero()
        if self.k0 is not None:
            return self.F_log(self.k0, t)
        for m in range(1, self.cap + 1):
            total = total + self.tent(m).F_log(t)
        return total

    # ladder geometry ---------------------------------------------------------
    def ladder(self, n: int) -> LadderRung:
        """Rung n of the gap relabelling.

        Tents are positive on their supports, so the intervals where f <= 0
        are the gaps between consecutive supports: ``[d_{n+1}, c_n]`` for the
        decaying cascade and ``[d_n, c_{n+1}]`` for the growing one.
        """
        if self.direction == "zero":
            box, inner = self.tent(n).log2_c, self.tent(n + 1).log2_d
            site = self.k0 if self.k0 is not None else n + 1
            return LadderRung(n, box, inner, site, inner)
        box, inner = self.tent(n + 1).log2_c, self.tent(n).log2_d
        site = self.k0 if self.k0 is not None else n
        return LadderRung(n, box, inner, site, inner)

    def gap_intervals(self, n_range) -> SignIntervalFamily:
        ivs, direction = [], "to_zero" if self.direction == "zero" else "to_infinity"
        for n in n_range:
            r = self.ladder(n)
            if max(r.log2_box, r.log2_interior) > MAX_LOG2 or min(r.log2_box, r.log2_interior) < MIN_LOG2:
                break
            ivs.append((r.interior, r.box))
        return SignIntervalFamily(tuple(ivs), direction)

    def support_intervals(self, n_range) -> SignIntervalFamily:
        ivs = []
        for n in n_range:
            t = self.tent(n)
            if t.status != "normal":
                break
            ivs.append((t.c, t.d))
        return SignIntervalFamily(tuple(ivs), "to_zero" if self.direction == "zero" else "to_infinity")

    def describe(self):
        out = {"family": self.family_id, "q": self.q, "pminus": self.pminus,
               "pplus": self.pplus}
        if self.k0 is not None:
            out["k0"] = self.k0
        out.update(self.extra)
        return out


def _check_decay_q(q, pminus, pplus):
    if not (pplus + 1) / pminus < q:
        raise FamilyConstraintError(
            f"(p+ + 1)/p- < q violated: (p+ + 1)/p- = {(pplus + 1) / pminus:g}, q = {q:g}")
    if not q >= 2:
        raise FamilyConstraintError(f"q >= 2 required, got q={q}")
    if not q < pplus + 1:
        raise FamilyConstraintError(f"q < p+ + 1 violated: q = {q:g}, p+ + 1 = {pplus + 1:g}")


def make_decay_family(q: float = 2.0, pminus: float = 2.0, pplus: float = 2.0) -> TentFamily:
    """Tents shrinking to zero: ``c_m = 2^-q^(2m)``, ``d_m = 2^-q^(2m-1)``,
    ``h_m = 2^-(p+ + 1) q^(2m-2)``; site k >= 1 carries tent m = k."""
    _check_decay_q(q, pminus, pplus)

    def gen(m):
        return -q ** (2 * m), -q ** (2 * m - 1), -(pplus + 1) * q ** (2 * m - 2)

    return TentFamily("decay", q, pminus, pplus, gen, "zero")


def make_growth_family(q: float = 3.0, pminus: float = 2.0, pplus: float = 2.0) -> TentFamily:
    """Tents escaping to infinity: ``c_m = 2^q^(2m)``, ``d_m = 2^q^(2m+1)``,
    ``h_m = 2^(p- - 1) q^(2m+2)``."""
    if not q >= 2:
        raise FamilyConstraintError(f"q >= 2 required, got q={q}")
    if not q > pplus / (pminus - 1):
        raise FamilyConstraintError(
            f"q > p+/(p- - 1) violated: p+/(p- - 1) = {pplus / (pminus - 1):g}, q = {q:g}")

    def gen(m):
        return q ** (2 * m), q ** (2 * m + 1), (pminus - 1) * q ** (2 * m + 2)

    return TentFamily("growth", q, pminus, pplus, gen, "infinity")


def make_single_site_family(k0: int = 1, q: float = 2.0, pminus: float = 2.0,
                            pplus: float = 2.0) -> TentFamily:
    """Every decay tent stacked on the one site ``k0``; ``f_k = 0`` elsewhere."""
    _check_decay_q(q, pminus, pplus)

    def gen(m):
        return -q ** (2 * m), -q ** (2 * m - 1), -(pplus + 1) * q ** (2 * m - 2)

    return TentFamily("single_site", q, pminus, pplus, gen, "zero", k0=int(k0))


def make_modified_height_family(q: float, pminus: float, pplus: float, alpha: float) -> TentFamily:
    """Decay supports with the heavier areas
    ``h_m = 2 / (alpha^p+ p+ 2^(p+ q^(2m-4)))``."""
    if not pplus > 2:
        raise FamilyConstraintError(f"p+ > 2 required, got p+={pplus}")
    if not q >= 2:
        raise FamilyConstraintError(f"q >= 2 required, got q={q}")
    if not (pplus / pminus < q < pplus):
        raise FamilyConstraintError(
            f"p+/p- < q < p+ violated: p+/p- = {pplus / pminus:g}, q = {q:g}, p+ = {pplus:g}")
    if not alpha > 0:
        raise FamilyConstraintError("alpha must be positive")
    base = 1.0 - pplus * math.log2(alpha) - math.log2(pplus)

    def gen(m):
        return -q ** (2 * m), -q ** (2 * m - 1), base - pplus * q ** (2 * m - 4)

    return TentFamily("modified_height", q, pminus, pplus, gen, "zero", extra={"alpha": alpha})


# ---------------------------------------------------------------------------
# custom piecewise-linear tables


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear f on ``[ts[0], ts[-1]]``, zero outside."""

    ts: tuple
    fs: tuple
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ts, fs = np.asarray(self.ts, float), np.asarray(self.fs, float)
        if ts.size < 2 or ts.size != fs.size or np.any(np.diff(ts) <= 0):
            raise ValueError("breakpoints must be >= 2 strictly increasing t values with one f each")
        if fs[0] != 0 or fs[-1] != 0:
            raise ValueError("f must vanish at both support endpoints to be continuous")
        cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(ts) * (fs[1:] + fs[:-1]))))
        object.__setattr__(self, "_cum", cum)

    def f(self, x):
        return np.interp(x, self.ts, self.fs, left=0.0, right=0.0)

    def G(self, x):
        """``int_{ts[0]}^x f``."""
        ts, fs = np.asarray(self.ts), np.asarray(self.fs)
        x = np.clip(np.asarray(x, float), ts[0], ts[-1])
        i = np.clip(np.searchsorted(ts, x, side="right") - 1, 0, ts.size - 2)
        return self._cum[i] + 0.5 * (x - ts[i]) * (fs[i] + self.f(x))

    def F(self, x):
        return self.G(x) - self.G(0.0)


class CustomFamily(Nonlinearity):
    """Per-site piecewise-linear nonlinearities given as breakpoint tables."""

    family_id = "custom"

    def __init__(self, sites: dict[int, PiecewiseLinear]):
        self.sites = {int(k): v for k, v in sites.items()}
        self.positive_support = all(p.ts[0] > 0 for p in self.sites.values())

    def table(self, ks):
        return _CustomTable([self.sites.get(int(k)) for k in ks])

    def support(self, k):
        p = self.sites.get(k)
        return [(p.ts[0], p.ts[-1])] if p else []

    def active_sites(self, k_range):
        return [k for k in k_range if k in self.sites]

    def _grid(self, k, lo, hi, samples):
        p = self.sites[k]
        bps = [t for t in p.ts if lo <= t <= hi]
        return np.unique(np.concatenate((np.linspace(lo, hi, samples), bps, [lo, hi])))

    def max_abs_f(self, k, T, samples=1024):
        if k not in self.sites:
            return 0.0
        grid = self._grid(k, -T, T, samples)
        return float(np.max(np.abs(self.sites[k].f(grid))))

    def max_F_log(self, k, t, samples=1024):
        if k not in self.sites:
            return LogReal.zero()
        T = t.to_float()
        grid = self._grid(k, -T, T, samples)
        return LogReal.from_float(max(0.0, float(np.max(self.sites[k].F(grid)))))

    def describe(self):
        return {"family": "custom",
                "sites": {str(k): {"t": list(p.ts), "f": list(p.fs)} for k, p in sorted(self.sites.items())}}


class _CustomTable:
    def __init__(self, pieces):
        self.pieces = pieces

    def _map(self, fn, x):
        out = np.zeros_like(np.asarray(x, float))
        for j, p in enumerate(self.pieces):
            if p is not None:
                out[j] = fn(p, x[j])
        return out

    def f(self, x):
        return self._map(lambda p, v: p.f(v), x)

    def F(self, x):
        return self._map(lambda p, v: p.F(v), x)

    def dF(self, x0, x1):
        return self.F(x1) - self.F(x0)


# ---------------------------------------------------------------------------
# scalar helpers with the positive-part convention


def eval_f(fam: Nonlinearity, k: int, t: float, plus: bool = False) -> float:
    """``f_k(t)``, or ``f_k(t^+)`` with ``plus``."""
    return fam.f(k, max(t, 0.0) if plus else t)


def eval_F(fam: Nonlinearity, k: int, t: float, plus: bool = False) -> float:
    """``F_k(t)``, or ``F^+_k(t) = int_0^t f_k(s^+) ds`` with ``plus``."""
    if plus and t < 0:
        return t * fam.f(k, 0.0)
    return fam.F(k, t)


def sum_max_F_log(fam: Nonlinearity, t: LogReal, k_range=range(-64, 65),
                  samples: int = 1024) -> LogReal:
    """``sum_k max_{|xi| <= t} F_k(xi)``; exact over all of Z for tent families."""
    if isinstance(fam, TentFamily):
        return fam.sum_max_F_log(t)
    total = LogReal.zero()
    for k in fam.active_sites(k_range):
        total = total + fam.max_F_log(k, t, samples)
    return total
