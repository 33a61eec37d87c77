"""Action functional J = Phi - Psi, its gradient, truncation and spike witnesses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .lattice import LatticeVector, Problem
from .logdomain import MAX_LOG2, IndeterminateSign, LogReal
from .nonlinearity import Nonlinearity, TentFamily, ZeroFamily, sum_max_F_log


def phi_p(t, p):
    """``|t|^(p-2) t``, extended by 0 at t = 0."""
    return np.sign(t) * np.abs(t) ** (p - 1.0)


def pow_diff(y0, y1, p):
    """``|y1|^p - |y0|^p`` computed without cancellation for close arguments."""
    A, B = np.abs(y0), np.abs(y1)
    both = (A > 0) & (B > 0)
    safeA = np.where(both, A, 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rel = safeA ** p * np.expm1(p * np.log1p((B - A) / safeA))
        plain = B ** p - A ** p
    return np.where(both, rel, plain)


class WindowModel:
    """J and its gradient for vectors living on the sites ``lo..hi``.

    Everything outside the window is zero, so the first-difference terms run
    over ``lo-1..hi``.
    """

    def __init__(self, prob: Problem, fam: Nonlinearity, lo: int, hi: int):
        self.prob, self.fam = prob, fam
        self.lo, self.hi = int(lo), int(hi)
        self.sites = np.arange(self.lo, self.hi + 1)
        dsites = np.arange(self.lo - 1, self.hi + 1)
        self.a, self.pd = prob.weights.a(dsites), prob.exponents(dsites)
        self.b, self.p = prob.weights.b(self.sites), prob.exponents(self.sites)
        self.nl = fam.table(self.sites)
        self.f0 = self.nl.f(np.zeros(self.sites.size))

    @property
    def size(self) -> int:
        return self.sites.size

    @staticmethod
    def diffs(x):
        return np.diff(np.concatenate(([0.0], x, [0.0])))

    def phi(self, x) -> float:
        dx = self.diffs(x)
        return float(np.sum(self.a / self.pd * np.abs(dx) ** self.pd)
                     + np.sum(self.b / self.p * np.abs(x) ** self.p))

    def psi_terms(self, x):
        xp = np.maximum(x, 0.0)
        return self.nl.F(xp) + np.where(x < 0, x * self.f0, 0.0)

    def psi(self, x) -> float:
        return float(np.sum(self.psi_terms(x)))

    def energy(self, x) -> float:
        return self.phi(x) - self.psi(x)

    def grad_phi(self, x):
        w = self.a * phi_p(self.diffs(x), self.pd)
        return w[:-1] - w[1:] + self.b * phi_p(x, self.p)

    def grad(self, x):
        return self.grad_phi(x) - self.nl.f(np.maximum(x, 0.0))

    def curvature(self, x, eps):
        """Diagonal of the Hessian of the separable part, with ``|.|`` floored
        at ``eps`` so that p < 2 stays finite at zero."""
        dx = np.abs(self.diffs(x)) + eps
        w = (self.pd - 1.0) * self.a * dx ** (self.pd - 2.0)
        out = w[:-1] + w[1:] + (self.p - 1.0) * self.b * (np.abs(x) + eps) ** (self.p - 2.0)
        curv = getattr(self.nl, "curvature", None)
        if curv is not None:
            out = out + curv(np.maximum(x, 0.0))
        return out

    def delta(self, x0, x1) -> float:
        """``J(x1) - J(x0)`` accumulated sitewise from stable increments."""
        dphi = (np.sum(self.a / self.pd * pow_diff(self.diffs(x0), self.diffs(x1), self.pd))
                + np.sum(self.b / self.p * pow_diff(x0, x1, self.p)))
        p0, p1 = np.maximum(x0, 0.0), np.maximum(x1, 0.0)
        dpsi = self.nl.dF(p0, p1) + self.f0 * (np.minimum(x1, 0.0) - np.minimum(x0, 0.0))
        return float(dphi - np.sum(dpsi))


def _model(u: LatticeVector, prob, fam, margin=0):
    return WindowModel(prob, fam, u.offset - margin, u.stop - 1 + margin)


@dataclass(frozen=True)
class EnergyBreakdown:
    phi: float
    psi: float
    j: float
    terms: Optional[dict] = None


def phi(u: LatticeVector, prob: Problem) -> float:
    """``sum_k (a_k/p_k)|grad+ u_k|^p_k + (b_k/p_k)|u_k|^p_k``."""
    if len(u) == 0:
        return 0.0
    val = _model(u, prob, ZeroFamily()).phi(u.values)
    if not math.isfinite(val):
        raise OverflowError("Phi overflows double precision")
    return val


def psi(u: LatticeVector, fam: Nonlinearity) -> float:
    """``sum_k F^+_k(u_k)`` over the support of u."""
    if len(u) == 0:
        return 0.0
    x = u.values
    t = fam.table(u.sites)
    f0 = t.f(np.zeros(x.size))
    return float(np.sum(t.F(np.maximum(x, 0.0)) + np.where(x < 0, x * f0, 0.0)))


def energy_J(u: LatticeVector, prob: Problem, fam: Nonlinearity,
             with_terms: bool = False) -> EnergyBreakdown:
    if len(u) == 0:
        return EnergyBreakdown(0.0, 0.0, 0.0, {} if with_terms else None)
    ph, ps = phi(u, prob), psi(u, fam)
    terms = None
    if with_terms:
        m = _model(u, prob, fam)
        terms = {"sites": u.sites.tolist(), "psi": m.psi_terms(u.values).tolist()}
    return EnergyBreakdown(ph, ps, ph - ps, terms)


def grad_J(u: LatticeVector, prob: Problem, fam: Nonlinearity) -> LatticeVector:
    """Coordinate gradient of J, which is the Euler-Lagrange residual
    ``-grad-(a |grad+ u|^(p-2) grad+ u) + b |u|^(p-2) u - f^+(u)``."""
    if len(u) == 0:
        return LatticeVector.zeros()
    m = _model(u, prob, fam, margin=1)
    x = np.concatenate(([0.0], u.values, [0.0]))
    return LatticeVector(m.lo, m.grad(x))


def truncate(u: LatticeVector, c: float) -> LatticeVector:
    """Componentwise ``min(max(u_k, 0), c)``."""
    if not c > 0:
        raise ValueError("truncation level must be positive")
    return u.map(lambda v: np.minimum(np.maximum(v, 0.0), c))


# ---------------------------------------------------------------------------
# spike certificates


Height = Union[float, LogReal]
#: below this a magnitude rounds to zero in double precision
MIN_SUBNORMAL_LOG2 = -1074.0


def spike_energy(prob: Problem, fam: Nonlinearity, k0: int, t: Height,
                 log_domain: bool = False):
    """Closed-form J of the vector with the single entry t at site k0.

    Returns a float, or a :class:`LogReal` with ``log_domain``. A log-domain
    difference whose two parts agree to 1e-12 raises :class:`IndeterminateSign`.
    """
    k0 = int(k0)
    a0, am = prob.weights.a([k0, k0 - 1])
    b0 = float(prob.weights.b([k0])[0])
    p0, pm = prob.exponents([k0, k0 - 1])
    if not log_domain:
        t = t.to_float() if isinstance(t, LogReal) else float(t)
        if not t > 0:
            raise ValueError("spike height must be positive")
        return (a0 + b0) / p0 * t ** p0 + am / pm * t ** pm - fam.F(k0, t)
    T = t if isinstance(t, LogReal) else LogReal.from_float(float(t))
    if T.sign <= 0:
        raise ValueError("spike height must be positive")
    return spike_phi_log(prob, k0, T) - fam.F_log(k0, T)


def spike_phi_log(prob: Problem, k0: int, T: LogReal) -> LogReal:
    a0, am = prob.weights.a([k0, k0 - 1])
    b0 = float(prob.weights.b([k0])[0])
    p0, pm = prob.exponents([k0, k0 - 1])
    return LogReal.from_float((a0 + b0) / p0) * T ** p0 + LogReal.from_float(am / pm) * T ** pm


@dataclass(frozen=True)
class Certificate:
    """A spike ``t e_k`` whose energy is negative (or indeterminate)."""

    site: int
    log2_height: float
    energy: Optional[LogReal]
    kind: str = "descent_spike"
    log2_ratio: Optional[float] = None

    @property
    def height(self) -> float:
        return float(np.exp2(self.log2_height)) if self.log2_height <= MAX_LOG2 else math.inf

    @property
    def energy_value(self) -> Optional[float]:
        e = self.energy
        if e is None or not e.representable or (e.sign and e.log2 < MIN_SUBNORMAL_LOG2):
            return None
        return e.to_float()

    @property
    def negative(self) -> bool:
        return self.energy is not None and self.energy.sign < 0

    def vector(self) -> LatticeVector:
        return LatticeVector.spike(self.site, self.height)

    def as_dict(self) -> dict:
        e = self.energy
        return {
            "site": self.site,
            "log2_height": self.log2_height,
            "height": self.height if MIN_SUBNORMAL_LOG2 <= self.log2_height <= MAX_LOG2 else None,
            "energy": self.energy_value,
            "energy_sign": None if e is None else e.sign,
            "log2_abs_energy": None if e is None or e.sign == 0 else e.log2,
            "kind": self.kind,
            "log2_ratio": self.log2_ratio,
        }


def make_certificate(prob, fam, k0, log2_height, kind="descent_spike", log2_ratio=None):
    try:
        e = spike_energy(prob, fam, k0, LogReal.pow2(log2_height), log_domain=True)
    except IndeterminateSign:
        e = None
    return Certificate(int(k0), float(log2_height), e, kind, log2_ratio)


# ---------------------------------------------------------------------------
# Ricceri bound


@dataclass(frozen=True)
class RicceriReport:
    m: int
    log2_r_m: float
    log2_phi_bound: float
    delta_estimate: float
    threshold: float = 1.0
    direction: str = "zero"

    @property
    def r_m(self) -> Optional[float]:
        return _lin(self.log2_r_m)

    @property
    def phi_bound(self) -> Optional[float]:
        return _lin(self.log2_phi_bound)

    @property
    def verdict(self) -> bool:
        return self.delta_estimate < self.threshold

    def as_row(self) -> dict:
        return {"m": self.m, "r_m": self.r_m, "phi_bound": self.phi_bound,
                "delta_estimate": self.delta_estimate,
                "verdict": "yes" if self.verdict else "no",
                "log2_r_m": self.log2_r_m, "log2_phi_bound": self.log2_phi_bound}


def _lin(lg: float) -> Optional[float]:
    if lg == -math.inf:
        return 0.0
    return float(np.exp2(lg)) if lg <= MAX_LOG2 else None


def _ricceri_term(prob, fam, log2_c, direction, k_range):
    al = math.log2(prob.alpha)
    pp, pm = prob.pplus, prob.pminus
    expo = pp if direction == "zero" else pm
    S = sum_max_F_log(fam, LogReal.pow2(log2_c), k_range)
    log2_r = -math.log2(pp) + expo * (log2_c - al)
    if S.sign == 0:
        return log2_r, -math.inf
    return log2_r, math.log2(pp) + expo * al + S.log2 - expo * log2_c


def ricceri_sequence(prob: Problem, fam: Nonlinearity, m_range, direction: Optional[str] = None,
                     c_log2=None, k_range=range(-64, 65)) -> list[RicceriReport]:
    """Upper bounds ``phi(r_m) <= p+ alpha^p (sum_k max F_k on [-c_m, c_m]) / c_m^p``
    with ``r_m = (c_m/alpha)^p / p+``; p = p+ towards zero, p- towards infinity.

    ``c_log2`` maps m to log2 c_m; tent families supply their own c_m.
    """
    if direction is None:
        direction = getattr(fam, "direction", "zero")
    if c_log2 is None:
        if not isinstance(fam, TentFamily):
            raise ValueError("non-tent families need an explicit c_m sequence")
        c_log2 = lambda m: fam.tent(m).log2_c  # noqa: E731
    out, running = [], math.inf
    for m in m_range:
        lr, lb = _ricceri_term(prob, fam, c_log2(m), direction, k_range)
        bound = _lin(lb)
        running = min(running, math.inf if bound is None else bound)
        out.append(RicceriReport(int(m), lr, lb, running, 1.0, direction))
    return out


def ricceri_bound(prob: Problem, fam: Nonlinearity, m: int, **kw) -> RicceriReport:
    return ricceri_sequence(prob, fam, range(1, m + 1), **kw)[-1]
