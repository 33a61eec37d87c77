"""Finitely supported sequences on Z and the variable-exponent norms on them.

A :class:`LatticeVector` stores a window ``[offset, offset + len - 1]`` of
values; every site outside the window is zero. All sums over Z are therefore
finite and exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

TOL_NORM = 1e-12
MAX_BISECT = 200


class LatticeError(ValueError):
    pass


class ModularOverflowError(LatticeError, OverflowError):
    """The modular sum is not finite in double precision."""


class BracketError(LatticeError):
    pass


class NonPositiveWeightError(LatticeError):
    """Some weight a_k or b_k is not strictly positive."""


class TableRangeError(LatticeError, IndexError):
    """A table rule was queried outside its range and has no default."""


# ---------------------------------------------------------------------------
# vectors


@dataclass(frozen=True, eq=False)
class LatticeVector:
    """Real sequence on Z, zero outside ``[offset, offset + len(values) - 1]``."""

    offset: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise LatticeError("LatticeVector entries must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "offset", int(self.offset))

    @classmethod
    def zeros(cls) -> "LatticeVector":
        return cls(0, np.zeros(0))

    @classmethod
    def spike(cls, k: int, t: float) -> "LatticeVector":
        return cls(k, [t])

    @classmethod
    def on_window(cls, lo: int, values) -> "LatticeVector":
        return cls(lo, values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def stop(self) -> int:
        """One past the last stored site."""
        return self.offset + self.values.size

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.offset, self.stop)

    def __getitem__(self, k: int) -> float:
        j = k - self.offset
        if 0 <= j < self.values.size:
            return float(self.values[j])
        return 0.0

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Values on the sites ``lo..hi`` inclusive (zeros where unstored)."""
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.offset), min(hi, self.stop - 1)
        if a <= b:
            out[a - lo:b - lo + 1] = self.values[a - self.offset:b - self.offset + 1]
        return out

    def trimmed(self) -> "LatticeVector":
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return LatticeVector.zeros()
        return LatticeVector(self.offset + nz[0], self.values[nz[0]:nz[-1] + 1])

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def map(self, fn) -> "LatticeVector":
        """Apply a sitewise map with ``fn(0) == 0``."""
        return LatticeVector(self.offset, fn(self.values))

    def scaled(self, t: float) -> "LatticeVector":
        return LatticeVector(self.offset, t * self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatticeVector):
            return NotImplemented
        a, b = self.trimmed(), other.trimmed()
        if len(a) == 0 or len(b) == 0:
            return len(a) == len(b)
        return a.offset == b.offset and np.array_equal(a.values, b.values)

    __hash__ = None

    def __repr__(self) -> str:
        return f"LatticeVector(offset={self.offset}, values={self.values.tolist()!r})"


def forward_diff(u: LatticeVector) -> LatticeVector:
    """``(grad+ u)_k = u_{k+1} - u_k``, supported on ``[offset - 1, stop - 1]``."""
    if len(u) == 0:
        return LatticeVector.zeros()
    padded = np.concatenate(([0.0], u.values, [0.0]))
    return LatticeVector(u.offset - 1, np.diff(padded))


def sup_norm(u: LatticeVector) -> float:
    if len(u) == 0:
        return 0.0
    return float(np.max(np.abs(u.values)))


# ---------------------------------------------------------------------------
# site rules


class Rule:
    """Pure function of the site index, evaluated on integer arrays."""

    #: rule is nondecreasing in |k| for |k| >= tail_radius (None: no claim)
    tail_radius: Optional[int] = None

    def __call__(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        return np.asarray(self._eval(ks), dtype=float).reshape(ks.shape)

    def _eval(self, ks):
        raise NotImplementedError

    def bounds(self) -> tuple[float, float]:
        """(inf, sup) over Z, when the rule knows them."""
        raise NotImplementedError(f"{self} has no closed-form bounds")

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantRule(Rule):
    value: float
    tail_radius = 0

    def _eval(self, ks):
        return np.full(ks.shape, self.value)

    def bounds(self):
        return self.value, self.value

    def describe(self):
        return f"constant({self.value!r})"


@dataclass(frozen=True)
class AlternatingRule(Rule):
    """``even`` on even sites, ``odd`` on odd sites."""

    even: float
    odd: float

    def _eval(self, ks):
        return np.where(ks % 2 == 0, self.even, self.odd)

    def bounds(self):
        return min(self.even, self.odd), max(self.even, self.odd)

    def describe(self):
        return f"alternating({self.even!r}, {self.odd!r})"


@dataclass(frozen=True)
class CosineRule(Rule):
    """``lo + (hi - lo) * (1 + cos k) / 2``; inf/sup over Z are lo/hi."""

    lo: float
    hi: float

    def _eval(self, ks):
        return self.lo + (self.hi - self.lo) * 0.5 * (1.0 + np.cos(ks))

    def bounds(self):
        return self.lo, self.hi

    def describe(self):
        return f"cosine({self.lo!r}, {self.hi!r})"


@dataclass(frozen=True)
class AbsPlusRule(Rule):
    """``|k| + c``."""

    c: float
    tail_radius = 0

    def _eval(self, ks):
        return np.abs(ks) + self.c

    def describe(self):
        return f"abs_plus({self.c!r})"


@dataclass(frozen=True)
class AbsFix1Rule(Rule):
    """``|k|`` with the site 0 value replaced by 1 so that b_0 > 0."""

    tail_radius = 0

    def _eval(self, ks):
        return np.where(ks == 0, 1.0, np.abs(ks).astype(float))

    def describe(self):
        return "abs_fix1"


@dataclass(frozen=True)
class ExpAbsRule(Rule):
    """``exp(|k|)``."""

    tail_radius = 0

    def _eval(self, ks):
        return np.exp(np.abs(ks).astype(float))

    def describe(self):
        return "exp_abs"


@dataclass(frozen=True)
class TableRule(Rule):
    """Explicit values on ``offset..offset+len-1``; ``default`` elsewhere.

    Without a default, queries outside the table raise :class:`TableRangeError`.
    """

    offset: int
    values: tuple
    default: Optional[float] = None

    def _eval(self, ks):
        j = ks - self.offset
        inside = (j >= 0) & (j < len(self.values))
        if self.default is None and not np.all(inside):
            bad = ks[~inside]
            raise TableRangeError(
                f"table rule queried at site {int(bad.flat[0])} outside "
                f"[{self.offset}, {self.offset + len(self.values) - 1}]")
        table = np.asarray(self.values, dtype=float)
        out = np.full(ks.shape, np.nan if self.default is None else self.default)
        out[inside] = table[j[inside]]
        return out

    def bounds(self):
        vals = list(self.values) + ([] if self.default is None else [self.default])
        return min(vals), max(vals)

    def describe(self):
        body = f"{self.offset}; " + ", ".join(repr(v) for v in self.values)
        if self.default is not None:
            body += f"; {self.default!r}"
        return f"table({body})"


_RULE_RE = re.compile(r"^\s*([a-z_0-9]+)\s*(?:\((.*)\))?\s*$")


def rule_from_string(text: str) -> Rule:
    """Parse ``constant(2)``, ``abs_plus(1)``, ``table(-1; 1, 2, 3; 4)`` etc."""
    m = _RULE_RE.match(text)
    if not m:
        raise LatticeError(f"cannot parse rule {text!r}")
    name, args = m.group(1), m.group(2)
    if name == "table":
        parts = [s.strip() for s in (args or "").split(";")]
        if len(parts) not in (2, 3) or not parts[1]:
            raise LatticeError("table rule needs 'offset; v1, v2, ...[; default]'")
        values = tuple(float(v) for v in parts[1].split(","))
        default = float(parts[2]) if len(parts) == 3 else None
        return TableRule(int(parts[0]), values, default)
    nums = [float(a) for a in args.split(",")] if args and args.strip() else []
    makers = {
        "constant": (ConstantRule, 1),
        "const": (ConstantRule, 1),
        "alternating": (AlternatingRule, 2),
        "cosine": (CosineRule, 2),
        "abs_plus": (AbsPlusRule, 1),
        "abs_fix1": (AbsFix1Rule, 0),
        "exp_abs": (ExpAbsRule, 0),
    }
    if name not in makers:
        raise LatticeError(f"unknown rule {name!r}")
    cls, nargs = makers[name]
    if len(nums) != nargs:
        raise LatticeError(f"rule {name!r} takes {nargs} argument(s), got {len(nums)}")
    return cls(*nums)


# ---------------------------------------------------------------------------
# problem data


@dataclass(frozen=True)
class ExponentSeq:
    rule: Rule
    pminus: float
    pplus: float

    def __post_init__(self):
        if not (1.0 < self.pminus <= self.pplus < math.inf):
            raise LatticeError(
                f"need 1 < p- <= p+ < inf, got p-={self.pminus}, p+={self.pplus}")

    @classmethod
    def from_rule(cls, rule: Rule) -> "ExponentSeq":
        lo, hi = rule.bounds()
        return cls(rule, lo, hi)

    @classmethod
    def constant(cls, p: float) -> "ExponentSeq":
        return cls(ConstantRule(float(p)), float(p), float(p))

    @property
    def is_constant(self) -> bool:
        return self.pminus == self.pplus

    def __call__(self, ks) -> np.ndarray:
        p = self.rule(ks)
        if np.any(p < self.pminus) or np.any(p > self.pplus):
            bad = np.flatnonzero((p < self.pminus) | (p > self.pplus))[0]
            raise LatticeError(
                f"p_k={p.flat[bad]} at site {np.asarray(ks).flat[bad]} outside "
                f"declared [{self.pminus}, {self.pplus}]")
        return p


@dataclass(frozen=True)
class WeightSeq:
    a_rule: Rule
    b_rule: Rule

    def a(self, ks) -> np.ndarray:
        return self._positive(self.a_rule, ks, "a")

    def b(self, ks) -> np.ndarray:
        return self._positive(self.b_rule, ks, "b")

    @staticmethod
    def _positive(rule, ks, name):
        w = rule(ks)
        if np.any(~(w > 0)):
            j = np.flatnonzero(~(w > 0))[0]
            raise NonPositiveWeightError(
                f"{name}_k = {w.flat[j]} at site {np.asarray(ks).flat[j]}; weights must be strictly positive")
        return w


@dataclass(frozen=True)
class AlphaReport:
    value: float
    site: int
    exact: bool
    radius: int

    @property
    def flag(self) -> str:
        return "exact" if self.exact else "window-supremum"


@dataclass(frozen=True)
class Problem:
    exponents: ExponentSeq
    weights: WeightSeq
    audit_radius: int = 64

    @property
    def pminus(self) -> float:
        return self.exponents.pminus

    @property
    def pplus(self) -> float:
        return self.exponents.pplus

    @cached_property
    def alpha_report(self) -> AlphaReport:
        return alpha_report(self, self.audit_radius)

    @property
    def alpha(self) -> float:
        return self.alpha_report.value


def alpha_report(prob: Problem, audit_radius: int = 64) -> AlphaReport:
    """Supremum of ``b_k^(-1/p_k)`` over Z, exact when the b rule has a monotone tail.

    Beyond a declared tail radius R the weights are nondecreasing in |k|, so
    every tail term is bounded by ``min(b_{R'+1}, b_{-R'-1})^(-1/p)`` with the
    worse of p-/p+. The radius is doubled until that bound no longer exceeds
    the window maximum.
    """
    tail = prob.weights.b_rule.tail_radius
    radius = int(audit_radius)
    if tail is not None:
        radius = max(radius, tail)
    while True:
        ks = np.arange(-radius, radius + 1)
        vals = prob.weights.b(ks) ** (-1.0 / prob.exponents(ks))
        j = int(np.argmax(vals))
        best = float(vals[j])
        if tail is None:
            return AlphaReport(best, int(ks[j]), False, radius)
        edge = float(np.min(prob.weights.b(np.array([-radius - 1, radius + 1]))))
        bound = max(edge ** (-1.0 / prob.pminus), edge ** (-1.0 / prob.pplus))
        if bound <= best:
            return AlphaReport(best, int(ks[j]), True, radius)
        if radius >= 1 << 20:
            return AlphaReport(best, int(ks[j]), False, radius)
        radius *= 2


def alpha(prob: Problem, audit_radius: int = 64) -> float:
    return alpha_report(prob, audit_radius).value


# ---------------------------------------------------------------------------
# modulars and Luxemburg norms


def _modular_terms(u: LatticeVector, prob: Problem, kind: str):
    """Flattened (coefficient, |value|, exponent) triples of the modular sum."""
    if kind not in ("E", "lpk"):
        raise LatticeError(f"unknown modular kind {kind!r}")
    u = u.trimmed()
    if len(u) == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    ks = u.sites
    p = prob.exponents(ks)
    if kind == "lpk":
        return np.ones(ks.size), np.abs(u.values), p
    du = forward_diff(u)
    return (
        np.concatenate((prob.weights.a(du.sites), prob.weights.b(ks))),
        np.abs(np.concatenate((du.values, u.values))),
        np.concatenate((prob.exponents(du.sites), p)),
    )


def _sum_terms(coef, absval, expo, eta=1.0) -> float:
    with np.errstate(over="ignore"):
        s = float(np.sum(coef * (absval / eta) ** expo))
    if not math.isfinite(s):
        raise ModularOverflowError("modular sum overflows double precision")
    return s


def modular(u: LatticeVector, prob: Problem, kind: str = "E") -> float:
    """``rho_E(u)`` (kind ``"E"``) or ``sum |u_k|^p_k`` (kind ``"lpk"``)."""
    return _sum_terms(*_modular_terms(u, prob, kind))


def luxemburg_norm(u: LatticeVector, prob: Problem, kind: str = "E",
                   tol: float = TOL_NORM) -> float:
    """Luxemburg norm ``inf{eta > 0 : rho(u / eta) <= 1}`` by bisection.

    The bracket comes from the unit-ball relations between norm and modular:
    for ``rho(u) <= 1`` the norm lies in ``[rho^(1/p-), rho^(1/p+)]`` and for
    ``rho(u) > 1`` in ``[rho^(1/p+), rho^(1/p-)]``.
    """
    coef, absval, expo = _modular_terms(u, prob, kind)
    if not np.any(absval):
        return 0.0
    live = absval > 0
    coef, absval, expo = coef[live], absval[live], expo[live]
    # work with u/|u|_inf so the modular neither underflows nor overflows;
    # the norm of u is scale times the norm of the rescaled vector
    scale = float(absval.max())
    absval = absval / scale
    rho = _sum_terms(coef, absval, expo)
    if rho == 1.0:
        return scale
    pmin, pmax = float(expo.min()), float(expo.max())
    e1, e2 = rho ** (1.0 / pmin), rho ** (1.0 / pmax)
    lo, hi = min(e1, e2), max(e1, e2)
    # guard the bracket against rounding in the endpoint powers
    lo *= 1.0 - 1e-12
    hi *= 1.0 + 1e-12

    def resid(eta):
        with np.errstate(over="ignore", divide="ignore"):
            s = float(np.sum(coef * (absval / eta) ** expo))
        return s - 1.0

    r_lo, r_hi = resid(lo), resid(hi)
    if not (math.isfinite(r_lo) and math.isfinite(r_hi)):
        raise BracketError(f"modular not finite on bracket [{lo}, {hi}]")
    if r_lo < 0 or r_hi > 0:
        raise BracketError(f"bracket [{lo}, {hi}] does not enclose the norm")
    best, best_r = (lo, r_lo) if abs(r_lo) < abs(r_hi) else (hi, r_hi)
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        r = resid(mid)
        if abs(r) < abs(best_r):
            best, best_r = mid, r
        if abs(r) <= tol or mid <= lo or mid >= hi:
            break
        if r > 0:
            lo = mid
        else:
            hi = mid
    return best * scale
