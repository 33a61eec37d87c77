"""Box-constrained minimization of J and the ladder of positive solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .audit import default_t_grid, spike_condition_scan
from .energy import Certificate, WindowModel, energy_J, grad_J, make_certificate
from .lattice import LatticeError, LatticeVector, Problem, luxemburg_norm, modular, sup_norm
from .logdomain import MAX_LOG2, MIN_LOG2
from .nonlinearity import Nonlinearity, TentFamily, ZeroFamily

#: rungs with a box below this are not minimized in floating point
MIN_BOX_LOG2 = -50.0
#: log2 of the largest |x|^p a window may hold before Phi stops being a double
MAX_PHI_LOG2 = 1000.0
MAX_WINDOW = 2 ** 14


class SolverError(RuntimeError):
    pass


class WindowError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    window_halfwidth: int = 40
    max_iter: int = 20000
    grad_tol: float = 1e-8
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    random_starts: int = 3
    use_zero_start: bool = True
    use_certificates: bool = True
    tail_tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.window_halfwidth < 1:
            raise ValueError("window_halfwidth must be >= 1")
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1 or self.max_backtracks < 1 or self.random_starts < 0:
            raise ValueError("iteration counts must be positive")


def stopping_scale(prob: Problem, box: float) -> float:
    return max(box ** (prob.pminus - 1.0), box ** (prob.pplus - 1.0))


@dataclass
class SolutionRecord:
    n: int
    u: Optional[LatticeVector]
    j_value: Optional[float]
    norm_E: Optional[float]
    sup_norm: Optional[float]
    residual_sup: Optional[float]
    box: float
    interior: float
    box_active: bool
    certificate: Optional[Certificate] = None
    converged: bool = True
    iterations: int = 0
    K: int = 0
    start: str = ""
    certificate_only: bool = False
    trivial: bool = False
    log2_box: Optional[float] = None
    log2_interior: Optional[float] = None
    note: str = ""

    @property
    def j_sign(self) -> int:
        if self.j_value is not None:
            return int(np.sign(self.j_value))
        c = self.certificate
        return 0 if c is None or c.energy is None else c.energy.sign

    @property
    def log2_abs_j(self) -> Optional[float]:
        if self.j_value is not None:
            return math.log2(abs(self.j_value)) if self.j_value else -math.inf
        c = self.certificate
        return None if c is None or c.energy is None else c.energy.log2

    def as_dict(self, full_vectors: bool = False) -> dict:
        out = {
            "n": self.n, "K": self.K, "start": self.start,
            "j_value": self.j_value, "j_sign": self.j_sign, "log2_abs_j": _finite(self.log2_abs_j),
            "norm_E": self.norm_E, "sup_norm": self.sup_norm, "residual_sup": self.residual_sup,
            "box": _finite(self.box), "interior": _finite(self.interior),
            "log2_box": self.log2_box, "log2_interior": self.log2_interior,
            "box_active": self.box_active, "converged": self.converged,
            "iterations": self.iterations, "certificate_only": self.certificate_only,
            "trivial": self.trivial, "note": self.note,
            "certificate": None if self.certificate is None else self.certificate.as_dict(),
        }
        if full_vectors and self.u is not None:
            out["u"] = {"offset": self.u.offset, "values": self.u.values.tolist()}
        return out


def _finite(x):
    return x if x is not None and math.isfinite(x) else None


def _box_active(x, box):
    return bool(x.size and np.max(x) >= box * (1 - 1e-9))


def minimize_box(prob: Problem, fam: Nonlinearity, box: float, cfg: SolverConfig,
                 init: LatticeVector, *, n: int = 0, interior: Optional[float] = None,
                 start: str = "init", window: Optional[tuple[int, int]] = None,
                 callback=None) -> SolutionRecord:
    """Minimize J over ``[0, box]`` on the sites ``-K..K`` (zero outside).

    Projected gradient with a Barzilai-Borwein trial step and monotone Armijo
    backtracking. Energy differences come from sitewise stable increments so
    that tiny rungs do not drown in rounding.

    ``window=(lo, hi)`` replaces the symmetric window. ``callback(it, x, dj)``
    sees every accepted iterate together with its energy change.
    """
    if not box > 0:
        raise ValueError("box bound must be positive")
    K = cfg.window_halfwidth
    lo, hi = window if window is not None else (-K, K)
    x = init.window(lo, hi)
    tr = init.trimmed()
    if tr.values.size and (tr.offset < lo or tr.stop > hi + 1):
        raise ValueError(f"initial vector leaves the window [{lo}, {hi}]")
    if np.any(x < 0) or np.any(x > box):
        raise ValueError("initial vector violates the box [0, d]")
    model = WindowModel(prob, fam, lo, hi)
    tol = cfg.grad_tol * stopping_scale(prob, box)

    def reduced(x, g):
        r = g.copy()
        r[(x <= 0) & (g > 0)] = 0.0
        r[(x >= box) & (g < 0)] = 0.0
        return r

    eps = 1e-3 * box
    g = model.grad(x)
    r = reduced(x, g)
    t = 1.0
    it, converged = 0, float(np.max(np.abs(r), initial=0.0)) <= tol
    while not converged and it < cfg.max_iter:
        it += 1
        # diagonal scaling keeps stiff tent sites from throttling the others
        dinv = 1.0 / model.curvature(x, eps)
        for _ in range(cfg.max_backtracks):
            xn = np.clip(x - t * dinv * g, 0.0, box)
            dj = model.delta(x, xn)
            if not math.isfinite(dj):
                raise SolverError(f"non-finite energy in line search (rung {n}, iteration {it})")
            if dj <= cfg.c1 * float(np.dot(g, xn - x)):
                break
            t *= cfg.backtrack
        else:
            break  # no acceptable step; leave converged = False
        assert dj <= 0.0, "Armijo step increased J"
        if callback is not None:
            callback(it, xn, dj)
        gn = model.grad(xn)
        s, y = xn - x, gn - g
        sy = float(np.dot(s, y))
        t = float(np.dot(s, s / dinv)) / sy if sy > 0 else t / cfg.backtrack
        x, g = xn, gn
        r = reduced(x, g)
        converged = float(np.max(np.abs(r))) <= tol
    u = LatticeVector(lo, x)
    return SolutionRecord(
        n=n, u=u, j_value=model.energy(x), norm_E=luxemburg_norm(u, prob),
        sup_norm=sup_norm(u), residual_sup=float(np.max(np.abs(reduced(x, g)))),
        box=box, interior=box if interior is None else interior,
        box_active=_box_active(x, box), converged=bool(converged), iterations=it,
        K=max(-lo, hi), start=start, log2_box=math.log2(box),
        log2_interior=math.log2(box if interior is None else interior),
    )


# ---------------------------------------------------------------------------
# ladder


@dataclass(frozen=True)
class Rung:
    n: int
    log2_box: float
    log2_interior: float
    spike_site: Optional[int] = None
    log2_spike_height: Optional[float] = None

    @property
    def box(self) -> float:
        return float(np.exp2(self.log2_box)) if self.log2_box <= MAX_LOG2 else math.inf

    @property
    def interior(self) -> float:
        return float(np.exp2(self.log2_interior)) if self.log2_interior <= MAX_LOG2 else math.inf


def rung_for(fam: Nonlinearity, n: int, boxes=None) -> Rung:
    if boxes is not None:
        box, interior = boxes[n]
        return Rung(n, math.log2(box), math.log2(interior))
    if isinstance(fam, TentFamily):
        r = fam.ladder(n)
        return Rung(n, r.log2_box, r.log2_interior, r.spike_site, r.log2_spike_height)
    raise ValueError("this family has no builtin ladder; pass explicit boxes")


def _certificate_only(prob: Problem, rung: Rung) -> bool:
    return rung.log2_box < MIN_BOX_LOG2 or rung.log2_box * prob.pplus > MAX_PHI_LOG2


def _tie_key(rec: SolutionRecord):
    sites = tuple(rec.u.trimmed().sites.tolist()) if rec.u is not None else ()
    return (rec.j_value, rec.norm_E, sites)


def _starts(prob, fam, rung, cfg, certs):
    K = cfg.window_halfwidth
    out = []
    if cfg.use_zero_start:
        out.append(("zero", LatticeVector.zeros()))
    if cfg.use_certificates:
        for c in certs:
            if c.negative and MIN_LOG2 <= c.log2_height <= rung.log2_box and -K <= c.site <= K:
                out.append((f"spike({c.site},2^{c.log2_height:g})", c.vector()))
    rng = np.random.default_rng([cfg.seed, rung.n])
    for i in range(cfg.random_starts):
        out.append((f"random{i}", LatticeVector(-K, rng.uniform(0.0, rung.box, 2 * K + 1))))
    return out


def _rung_certificates(prob, fam, rung, cfg):
    certs = []
    if rung.spike_site is not None:
        certs.append(make_certificate(prob, fam, rung.spike_site, rung.log2_spike_height,
                                      "ladder_spike"))
    if cfg.use_certificates and not isinstance(fam, ZeroFamily):
        K = cfg.window_halfwidth
        grid = [c for c in default_t_grid(fam) if c <= rung.log2_box]
        for c in spike_condition_scan(fam, prob, getattr(fam, "direction", "zero"),
                                      range(-K, K + 1), grid):
            if all((c.site, c.log2_height) != (d.site, d.log2_height) for d in certs):
                certs.append(c)
    return certs


def _best_certificate(certs):
    neg = [c for c in certs if c.negative]
    if not neg:
        return certs[0] if certs else None
    # most negative energy: largest log2|J|
    return max(neg, key=lambda c: (c.energy.log2, -c.site))


def _certificate_norm(u, prob) -> Optional[float]:
    if u is None:
        return None
    try:
        val = luxemburg_norm(u, prob)
    except LatticeError:
        return None
    return val if val > 0 else None


def solve_rung(prob: Problem, fam: Nonlinearity, n: int, cfg: SolverConfig,
               boxes=None) -> SolutionRecord:
    """Minimize over the rung-n box from every start; keep the lowest J."""
    rung = rung_for(fam, n, boxes)
    if isinstance(fam, ZeroFamily):
        box = rung.box
        return SolutionRecord(n, LatticeVector.zeros(), 0.0, 0.0, 0.0, 0.0, box, rung.interior,
                              False, K=cfg.window_halfwidth, start="zero", trivial=True,
                              log2_box=rung.log2_box, log2_interior=rung.log2_interior,
                              note="f = 0: the minimizer is u = 0")
    certs = _rung_certificates(prob, fam, rung, cfg)
    cert = _best_certificate(certs)
    if _certificate_only(prob, rung):
        u = None
        if cert is not None and cert.log2_height * prob.pplus <= MAX_PHI_LOG2:
            u = cert.vector()
        return SolutionRecord(
            n, u, cert.energy_value if cert else None,
            _certificate_norm(u, prob), None if u is None else sup_norm(u), None, rung.box, rung.interior, False,
            cert, converged=True, K=cfg.window_halfwidth, start="certificate",
            certificate_only=True, log2_box=rung.log2_box, log2_interior=rung.log2_interior,
            note="box outside float-meaningful range; witnessed by spike certificate only")
    best = None
    for label, init in _starts(prob, fam, rung, cfg, certs):
        rec = minimize_box(prob, fam, rung.box, cfg, init, n=n, interior=rung.interior,
                           start=label)
        if best is None or _tie_key(rec) < _tie_key(best):
            best = rec
    best.certificate = cert
    if boxes is not None or not isinstance(fam, TentFamily):
        best.note = "heuristic ladder: boxes supplied by the user"
    return best


def solution_ladder(prob: Problem, fam: Nonlinearity, n_range: Sequence[int],
                    cfg: SolverConfig = SolverConfig(), boxes=None) -> list[SolutionRecord]:
    """One record per rung, sorted by n. A failing rung is recorded, not raised."""
    out = []
    for n in sorted(n_range):
        try:
            out.append(solve_rung(prob, fam, n, cfg, boxes))
        except (SolverError, ValueError, OverflowError) as exc:
            out.append(SolutionRecord(n, None, None, None, None, None, math.nan, math.nan,
                                      False, converged=False, K=cfg.window_halfwidth,
                                      note=f"rung {n} failed: {exc}"))
    return out


def tail_mass(u: LatticeVector, prob: Problem, half: int) -> float:
    """``sum_{|k| > half} b_k |u_k|^p_k``."""
    sites, vals = u.sites, u.values
    mask = np.abs(sites) > half
    if not mask.any():
        return 0.0
    s = sites[mask]
    return float(np.sum(prob.weights.b(s) * np.abs(vals[mask]) ** prob.exponents(s)))


def _active_sites(fam, rung):
    if rung.spike_site is not None:
        return [rung.spike_site]
    if isinstance(fam, TentFamily) and fam.k0 is not None:
        return [fam.k0]
    return []


def adapt_window(prob: Problem, fam: Nonlinearity, n: int, cfg: SolverConfig,
                 boxes=None, return_record: bool = False):
    """Double K until the rung's active sites sit in ``[-K/2, K/2]`` and the
    solution's mass beyond K/2 is at most ``tail_tol`` times its modular."""
    K = cfg.window_halfwidth
    if isinstance(fam, ZeroFamily):
        return (K, solve_rung(prob, fam, n, cfg, boxes)) if return_record else K
    rung = rung_for(fam, n, boxes)
    need = max((abs(k) for k in _active_sites(fam, rung)), default=0)
    while 2 * need > K:
        K *= 2
        if K > MAX_WINDOW:
            raise WindowError(f"rung {n}: window cap {MAX_WINDOW} exceeded (active site {need})")
    while True:
        rec = solve_rung(prob, fam, n, replace(cfg, window_halfwidth=K), boxes)
        if rec.u is None or rec.certificate_only:
            break
        rho = modular(rec.u, prob)
        if tail_mass(rec.u, prob, K // 2) <= cfg.tail_tol * rho:
            break
        K *= 2
        if K > MAX_WINDOW:
            raise WindowError(f"rung {n}: window cap {MAX_WINDOW} exceeded (tail mass)")
    return (K, rec) if return_record else K


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Flag:
    passed: bool
    value: Optional[float]
    tol: Optional[float]

    def as_dict(self):
        return {"passed": self.passed, "value": _finite(self.value), "tol": self.tol}


@dataclass
class VerificationReport:
    n: int
    flags: dict = field(default_factory=dict)
    skipped: bool = False

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.flags.values())

    def failed(self) -> list[str]:
        return [k for k, f in self.flags.items() if not f.passed]

    def as_dict(self) -> dict:
        return {"n": self.n, "passed": self.passed, "skipped": self.skipped,
                "flags": {k: f.as_dict() for k, f in self.flags.items()}}


@dataclass(frozen=True)
class Tolerances:
    nonneg: float = 1e-12
    interior_rel: float = 1e-10
    grad_tol: float = 1e-8
    tail_tol: float = 1e-12
    energy_rel: float = 1e-12


def _tail_monotone(x, slack):
    """Is |x| nonincreasing moving outward from the region where it is large?"""
    a = np.abs(x)
    top = a.max()
    if top == 0:
        return True, 0.0
    idx = np.nonzero(a >= 0.01 * top)[0]
    lo, hi = idx[0], idx[-1]
    right = np.diff(a[hi:])
    left = np.diff(a[:lo + 1][::-1])
    worst = max(right.max(initial=-np.inf), left.max(initial=-np.inf))
    return bool(worst <= slack), float(max(worst, 0.0))


def verify_solution(rec: SolutionRecord, prob: Problem, fam: Nonlinearity,
                    tol: Tolerances = Tolerances()) -> VerificationReport:
    """Nonnegativity, interior bound, residual, tail decay, negative energy,
    certificate dominance and an inactive box constraint."""
    rep = VerificationReport(rec.n)
    if rec.certificate_only:
        c = rec.certificate
        neg = c is not None and c.negative
        rep.flags["negative_energy"] = Flag(neg, None if c is None else c.energy_value, 0.0)
        rep.skipped = True
        return rep
    if rec.u is None:
        rep.flags["solved"] = Flag(False, None, None)
        return rep
    u = rec.u
    x = u.values
    lo = float(x.min()) if x.size else 0.0
    hi = float(x.max()) if x.size else 0.0
    rep.flags["nonnegative"] = Flag(lo >= -tol.nonneg, lo, -tol.nonneg)
    ib = rec.interior + tol.interior_rel * max(1.0, rec.interior)
    rep.flags["interior_bound"] = Flag(hi <= ib, hi, ib)
    res = float(np.max(np.abs(grad_J(u, prob, fam).values))) if x.size else 0.0
    rtol = tol.grad_tol * stopping_scale(prob, rec.box)
    rep.flags["residual"] = Flag(res <= rtol, res, rtol)
    if x.size:
        K = max(abs(u.offset), abs(u.stop - 1))
        tm = tail_mass(u, prob, K // 2)
        rho = modular(u, prob)
        # entries below the residual tolerance are unresolved noise
        mono, worst = _tail_monotone(x, rtol)
        rep.flags["tail_decay"] = Flag(mono and tm <= tol.tail_tol * rho,
                                       tm / rho if rho else 0.0, tol.tail_tol)
    else:
        rep.flags["tail_decay"] = Flag(True, 0.0, tol.tail_tol)
    j = energy_J(u, prob, fam).j if x.size else 0.0
    rep.flags["negative_energy"] = Flag(j < 0, j, 0.0)
    c = rec.certificate
    if c is not None and c.energy is not None and c.energy.representable \
            and c.log2_height <= (rec.log2_box if rec.log2_box is not None else math.inf):
        ce = c.energy.to_float()
        bound = ce + tol.energy_rel * max(1.0, abs(ce))
        rep.flags["certificate_dominance"] = Flag(j <= bound, j, bound)
    margin = 0.5 * (rec.box - rec.interior)
    rep.flags["box_inactive"] = Flag(hi <= rec.box - margin, hi, rec.box - margin)
    return rep
