"""Run configuration: a sectioned ``key = value`` file.

Grammar (version 1)::

    # homoclinic-config v1
    [problem]
    exponent = constant(2)          # any rule, see lattice.rule_from_string
    a = constant(1)
    b = abs_fix1
    audit_radius = 64               # optional

    [family]
    id = decay                      # decay | growth | single_site | modified_height | custom | zero
    q = 2
    pminus = 2                      # optional, must equal the exponent bounds
    pplus = 2
    k0 = 1                          # single_site only
    site.3 = 0.1:0, 0.2:1, 0.3:0    # custom only, t:f breakpoints per site

    [solver]                        # all optional
    K = 40
    max_iter = 20000
    grad_tol = 1e-8
    c1 = 1e-4
    backtrack = 0.5
    max_backtracks = 60
    random_starts = 3
    tail_tol = 1e-12
    seed = 0

    [run]                           # all optional
    rungs = 1..3
    m_range = 1..4
    k_range = 1..24
    T = 0.25
    direction = zero                # zero | infinity
    sign_intervals = gaps           # gaps | supports | explicit
    intervals = 0.004:0.06, ...     # explicit only
    audits = F1, F2, F3, F4, F5, F6
    vector = 1:0.25, 2:0.5          # site:value pairs for norm/energy
    output_dir = out

Ranges are inclusive ``lo..hi``. Missing ``[run]`` keys fall back to the
family's defaults.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .lattice import ExponentSeq, LatticeError, LatticeVector, Problem, WeightSeq, rule_from_string
from .nonlinearity import (
    CustomFamily,
    FamilyConstraintError,
    Nonlinearity,
    PiecewiseLinear,
    SignIntervalFamily,
    TentFamily,
    ZeroFamily,
    make_decay_family,
    make_growth_family,
    make_modified_height_family,
    make_single_site_family,
)
from .solver import SolverConfig

VERSION = 1
HEADER_RE = re.compile(r"^#\s*homoclinic-config\s+v(\d+)\s*$")
FAMILIES = ("decay", "growth", "single_site", "modified_height", "custom", "zero")
AUDITS = ("F1", "F2", "F3", "F4", "F5", "F6")

_SOLVER_KEYS = {
    "k": ("window_halfwidth", int), "max_iter": ("max_iter", int),
    "grad_tol": ("grad_tol", float), "c1": ("c1", float), "backtrack": ("backtrack", float),
    "max_backtracks": ("max_backtracks", int), "random_starts": ("random_starts", int),
    "tail_tol": ("tail_tol", float), "seed": ("seed", int),
}
_ALLOWED = {
    "problem": {"exponent", "a", "b", "audit_radius"},
    "family": {"id", "q", "pminus", "pplus", "k0"},
    "solver": set(_SOLVER_KEYS),
    "run": {"rungs", "m_range", "k_range", "t", "direction", "sign_intervals", "intervals",
            "audits", "vector", "output_dir"},
}


@dataclass(frozen=True)
class Issue:
    line: Optional[int]
    field: str
    reason: str

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.field}: {self.reason}"


class ConfigError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class ProblemSpec:
    exponent: str
    a: str
    b: str
    audit_radius: int = 64


@dataclass(frozen=True)
class FamilySpec:
    id: str
    q: Optional[float] = None
    pminus: Optional[float] = None
    pplus: Optional[float] = None
    k0: Optional[int] = None
    sites: tuple = ()  # ((k, ((t, f), ...)), ...)


@dataclass(frozen=True)
class RunSpec:
    rungs: Optional[tuple] = None
    m_range: Optional[tuple] = None
    k_range: Optional[tuple] = None
    T: Optional[float] = None
    direction: Optional[str] = None
    sign_intervals: str = "gaps"
    intervals: tuple = ()
    audits: tuple = AUDITS
    vector: tuple = ()  # ((k, value), ...)
    output_dir: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    family: FamilySpec
    solver: SolverConfig = field(default_factory=SolverConfig)
    run: RunSpec = field(default_factory=RunSpec)

    def build_problem(self) -> Problem:
        return build_problem(self.problem)

    def build_family(self, prob: Optional[Problem] = None) -> Nonlinearity:
        return build_family(self.family, prob or self.build_problem())

    # defaults that depend on the family

    def direction(self) -> str:
        if self.run.direction:
            return self.run.direction
        return "infinity" if self.family.id == "growth" else "zero"

    def rungs(self) -> range:
        lo, hi = self.run.rungs or ((1, 2) if self.family.id == "growth" else (1, 3))
        return range(lo, hi + 1)

    def m_range(self) -> range:
        lo, hi = self.run.m_range or (1, 4)
        return range(lo, hi + 1)

    def k_range(self) -> Optional[range]:
        if self.run.k_range is None:
            return None
        lo, hi = self.run.k_range
        return range(lo, hi + 1)

    def vector(self) -> LatticeVector:
        if not self.run.vector:
            return LatticeVector.zeros()
        pairs = sorted(self.run.vector)
        lo, hi = pairs[0][0], pairs[-1][0]
        vals = [0.0] * (hi - lo + 1)
        for k, v in pairs:
            vals[k - lo] = v
        return LatticeVector(lo, vals)


# ---------------------------------------------------------------------------
# building library objects


def build_problem(spec: ProblemSpec) -> Problem:
    rule = rule_from_string(spec.exponent)
    return Problem(ExponentSeq.from_rule(rule),
                   WeightSeq(rule_from_string(spec.a), rule_from_string(spec.b)),
                   audit_radius=spec.audit_radius)


def build_family(spec: FamilySpec, prob: Problem) -> Nonlinearity:
    pm = prob.pminus if spec.pminus is None else spec.pminus
    pp = prob.pplus if spec.pplus is None else spec.pplus
    if spec.id == "zero":
        return ZeroFamily()
    if spec.id == "custom":
        return CustomFamily({k: PiecewiseLinear(tuple(t for t, _ in pts), tuple(f for _, f in pts))
                             for k, pts in spec.sites})
    if spec.id == "decay":
        return make_decay_family(2.0 if spec.q is None else spec.q, pm, pp)
    if spec.id == "growth":
        return make_growth_family(3.0 if spec.q is None else spec.q, pm, pp)
    if spec.id == "single_site":
        return make_single_site_family(1 if spec.k0 is None else spec.k0,
                                       2.0 if spec.q is None else spec.q, pm, pp)
    if spec.id == "modified_height":
        return make_modified_height_family(2.0 if spec.q is None else spec.q, pm, pp, prob.alpha)
    raise ValueError(f"unknown family {spec.id!r}")


def sign_intervals(cfg: RunConfig, fam: Nonlinearity) -> Optional[SignIntervalFamily]:
    mode = cfg.run.sign_intervals
    direction = "to_zero" if cfg.direction() == "zero" else "to_infinity"
    if mode == "explicit":
        return SignIntervalFamily(cfg.run.intervals, direction) if cfg.run.intervals else None
    if not isinstance(fam, TentFamily):
        return None
    ns = cfg.m_range()
    return fam.gap_intervals(ns) if mode == "gaps" else fam.support_intervals(ns)


# ---------------------------------------------------------------------------
# parsing


def _line_index(text: str) -> dict:
    """(section, key) -> line number, and section -> header line."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            out[(section, None)] = i
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section:
            out.setdefault((section, m.group(1).strip().lower()), i)
    return out


def _range(text: str) -> tuple:
    m = re.fullmatch(r"\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*", text)
    if not m:
        raise ValueError(f"expected 'lo..hi', got {text!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo > hi:
        raise ValueError(f"empty range {lo}..{hi}")
    return lo, hi


def _pairs(text: str, key=float) -> tuple:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        a, sep, b = item.partition(":")
        if not sep:
            raise ValueError(f"expected 'x:y' pairs, got {item!r}")
        out.append((key(a), float(b)))
    return tuple(out)


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` listing every issue."""
    issues: list[Issue] = []
    lines = _line_index(text)
    for i, raw in enumerate(text.splitlines(), 1):
        m = HEADER_RE.match(raw.strip())
        if m and int(m.group(1)) != VERSION:
            issues.append(Issue(i, "header", f"unsupported config version v{m.group(1)}"))

    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([Issue(getattr(exc, "lineno", None), "syntax", str(exc).splitlines()[0])])

    def where(sec, key=None):
        return lines.get((sec, key)) or lines.get((sec, None))

    for sec in cp.sections():
        if sec not in _ALLOWED:
            issues.append(Issue(where(sec), f"[{sec}]", "unknown section"))
            continue
        for key in cp[sec]:
            if key in _ALLOWED[sec] or (sec == "family" and re.fullmatch(r"site\.-?\d+", key)):
                continue
            issues.append(Issue(where(sec, key), f"{sec}.{key}", "unknown key"))

    def get(sec, key, conv, default=None, required=False):
        if not cp.has_section(sec) or key not in cp[sec]:
            if required:
                issues.append(Issue(where(sec), f"{sec}.{key}", "missing required field"))
            return default
        raw = cp[sec][key]
        try:
            return conv(raw)
        except (ValueError, LatticeError) as exc:
            issues.append(Issue(where(sec, key), f"{sec}.{key}", str(exc)))
            return default

    if not cp.has_section("problem"):
        issues.append(Issue(None, "[problem]", "missing problem block"))
        raise ConfigError(issues)
    rule = lambda s: (rule_from_string(s), s.strip())[1]  # noqa: E731
    problem = ProblemSpec(
        exponent=get("problem", "exponent", rule, required=True),
        a=get("problem", "a", rule, required=True),
        b=get("problem", "b", rule, required=True),
        audit_radius=get("problem", "audit_radius", int, 64),
    )
    if not cp.has_section("family"):
        issues.append(Issue(None, "[family]", "missing family block"))
        raise ConfigError(issues)

    def fam_id(s):
        s = s.strip()
        if s not in FAMILIES:
            raise ValueError(f"unknown family {s!r}; expected one of {', '.join(FAMILIES)}")
        return s

    sites = []
    for key in cp["family"]:
        if key.startswith("site."):
            k = int(key.split(".", 1)[1])
            pts = get("family", key, _pairs)
            if pts is not None:
                sites.append((k, pts))
    family = FamilySpec(
        id=get("family", "id", fam_id, "decay", required=True),
        q=get("family", "q", float), pminus=get("family", "pminus", float),
        pplus=get("family", "pplus", float), k0=get("family", "k0", int),
        sites=tuple(sorted(sites)),
    )

    solver_kw = {}
    for key, (name, conv) in _SOLVER_KEYS.items():
        v = get("solver", key, conv)
        if v is not None:
            solver_kw[name] = v

    def direction(s):
        s = s.strip()
        if s not in ("zero", "infinity"):
            raise ValueError("direction must be 'zero' or 'infinity'")
        return s

    def mode(s):
        s = s.strip()
        if s not in ("gaps", "supports", "explicit"):
            raise ValueError("sign_intervals must be gaps, supports or explicit")
        return s

    def audits(s):
        names = tuple(a.strip().upper() for a in s.split(",") if a.strip())
        bad = [a for a in names if a not in AUDITS]
        if bad:
            raise ValueError(f"unknown audit(s) {', '.join(bad)}")
        return names

    run = RunSpec(
        rungs=get("run", "rungs", _range), m_range=get("run", "m_range", _range),
        k_range=get("run", "k_range", _range), T=get("run", "t", float),
        direction=get("run", "direction", direction),
        sign_intervals=get("run", "sign_intervals", mode, "gaps"),
        intervals=get("run", "intervals", _pairs, ()),
        audits=get("run", "audits", audits, AUDITS),
        vector=get("run", "vector", lambda s: _pairs(s, int), ()),
        output_dir=get("run", "output_dir", str.strip),
    )

    if issues:
        raise ConfigError(issues)

    # cross-field checks, re-run on every load
    try:
        solver = SolverConfig(**solver_kw)
    except ValueError as exc:
        issues.append(Issue(where("solver"), "solver", str(exc)))
    try:
        prob = build_problem(problem)
        # both weights must be positive on the audit window; this also fixes alpha
        ks = range(-prob.audit_radius, prob.audit_radius + 1)
        prob.weights.a(ks)
        prob.alpha_report
    except LatticeError as exc:
        issues.append(Issue(where("problem"), "problem", str(exc)))
        raise ConfigError(issues)
    for key in ("pminus", "pplus"):
        given = getattr(family, key)
        actual = getattr(prob, key)
        if given is not None and given != actual:
            issues.append(Issue(where("family", key), f"family.{key}",
                                f"{given:g} differs from the exponent bound {actual:g}"))
    if family.id == "custom" and not family.sites:
        issues.append(Issue(where("family"), "family.site.*", "custom family needs site tables"))
    if family.k0 is not None and family.id != "single_site":
        issues.append(Issue(where("family", "k0"), "family.k0", "only used by single_site"))
    if not issues:
        try:
            build_family(family, prob)
        except (FamilyConstraintError, ValueError) as exc:
            issues.append(Issue(where("family", "q") if "q" in str(exc) else where("family"),
                                "family", str(exc)))
    if run.sign_intervals == "explicit":
        try:
            SignIntervalFamily(run.intervals, "to_zero" if (run.direction or "zero") == "zero"
                               else "to_infinity")
        except ValueError as exc:
            issues.append(Issue(where("run", "intervals"), "run.intervals", str(exc)))
    if issues:
        raise ConfigError(issues)
    return RunConfig(problem, family, solver, run)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def dump_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` (up to comments and key order)."""
    out = [f"# homoclinic-config v{VERSION}", "[problem]"]
    for f in fields(ProblemSpec):
        out.append(f"{f.name} = {_fmt(getattr(cfg.problem, f.name))}")
    out.append("\n[family]")
    fam = cfg.family
    for name in ("id", "q", "pminus", "pplus", "k0"):
        v = getattr(fam, name)
        if v is not None:
            out.append(f"{name} = {_fmt(v)}")
    for k, pts in fam.sites:
        out.append(f"site.{k} = " + ", ".join(f"{_fmt(t)}:{_fmt(v)}" for t, v in pts))
    out.append("\n[solver]")
    sc = asdict(cfg.solver)
    for key, (name, _) in _SOLVER_KEYS.items():
        out.append(f"{'K' if key == 'k' else key} = {_fmt(sc[name])}")
    out.append("\n[run]")
    r = cfg.run
    for name in ("rungs", "m_range", "k_range"):
        v = getattr(r, name)
        if v is not None:
            out.append(f"{name} = {v[0]}..{v[1]}")
    if r.T is not None:
        out.append(f"T = {_fmt(r.T)}")
    if r.direction is not None:
        out.append(f"direction = {r.direction}")
    out.append(f"sign_intervals = {r.sign_intervals}")
    if r.intervals:
        out.append("intervals = " + ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in r.intervals))
    out.append("audits = " + ", ".join(r.audits))
    if r.vector:
        out.append("vector = " + ", ".join(f"{k}:{_fmt(v)}" for k, v in r.vector))
    if r.output_dir is not None:
        out.append(f"output_dir = {r.output_dir}")
    return "\n".join(out) + "\n"
