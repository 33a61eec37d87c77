"""Command-line entry point: ``homoclinic <command> CONFIG``.

Exit status is 0 on success, 1 when a verification or audit fails and 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from importlib.resources import files
from pathlib import Path

from . import report
from .audit import (
    default_k_range,
    default_t_grid,
    modified_height_bound,
    run_audits,
    spike_condition_scan,
)
from .config import ConfigError, Issue, RunConfig, dump_config, parse_config, sign_intervals
from .energy import energy_J, grad_J, ricceri_sequence
from .lattice import LatticeError, luxemburg_norm, modular, sup_norm
from .nonlinearity import FamilyConstraintError, TentFamily
from .solver import SolverError, solution_ladder, verify_solution

COMMANDS = ("norm", "energy", "check", "certify", "solve", "ladder", "ricceri")
PRESETS = ("decay", "growth", "single_site", "modified_height")
ENV_OUT = "HOMOCLINIC_OUT"


def preset_text(name: str) -> str:
    return files("homoclinic").joinpath("presets", f"{name}.ini").read_text(encoding="utf-8")


def read_config(arg: str) -> RunConfig:
    p = Path(arg)
    if p.is_file():
        return parse_config(p.read_text(encoding="utf-8"))
    if arg in PRESETS:
        return parse_config(preset_text(arg))
    raise ConfigError([Issue(None, "config", f"{arg!r} is neither a file nor a preset")])


def output_dir(args, cfg: RunConfig) -> Path:
    return Path(args.output_dir or cfg.run.output_dir or os.environ.get(ENV_OUT)
                or "homoclinic-out")


class Context:
    def __init__(self, args, cfg: RunConfig):
        self.args, self.cfg = args, cfg
        self.prob = cfg.build_problem()
        self.fam = cfg.build_family(self.prob)
        self.out = output_dir(args, cfg)
        self.log = args.log_domain

    def payload(self, command: str, **body) -> dict:
        return {"command": command, "config": dump_config(self.cfg),
                "family": self.fam.describe(), "log_domain": self.log, **body}

    def emit(self, command: str, body: dict) -> Path:
        return report.write_json(self.out / f"{command}.json", self.payload(command, **body))


def _say(text: str = ""):
    print(text)


def cmd_norm(ctx: Context) -> int:
    u = ctx.cfg.vector()
    ar = ctx.prob.alpha_report
    body = {
        "modular_E": modular(u, ctx.prob, "E"), "norm_E": luxemburg_norm(u, ctx.prob, "E"),
        "modular_lp": modular(u, ctx.prob, "lpk"), "norm_lp": luxemburg_norm(u, ctx.prob, "lpk"),
        "sup_norm": sup_norm(u), "alpha": ar.value, "alpha_flag": ar.flag, "alpha_site": ar.site,
    }
    if ctx.log:
        body.update({f"log2_{k}": (math.log2(v) if v > 0 else None)
                     for k, v in list(body.items()) if isinstance(v, float)})
    ctx.emit("norm", body)
    keys = sorted(k for k in body if k.startswith("log2_")) if ctx.log else list(body)
    _say(report.table(("quantity", "value"), [{"quantity": k, "value": body[k]} for k in keys]))
    return 0


def cmd_energy(ctx: Context) -> int:
    u = ctx.cfg.vector()
    e = energy_J(u, ctx.prob, ctx.fam, with_terms=True)
    g = grad_J(u, ctx.prob, ctx.fam)
    body = {"phi": e.phi, "psi": e.psi, "J": e.j, "terms": e.terms,
            "grad_sup": sup_norm(g), "grad": {"offset": g.offset, "values": g.values.tolist()}}
    ctx.emit("energy", body)
    _say(report.table(("quantity", "value"),
                      [{"quantity": k, "value": body[k]} for k in ("phi", "psi", "J", "grad_sup")]))
    return 0


def cmd_check(ctx: Context) -> int:
    cfg = ctx.cfg
    ivs = sign_intervals(cfg, ctx.fam)
    names = list(cfg.run.audits)
    if "F3" in names and ivs is None:
        names.remove("F3")
    T = cfg.run.T if cfg.run.T is not None else 1.0
    audits = run_audits(ctx.prob, ctx.fam, names, T=T, intervals=ivs,
                        direction=cfg.direction(), k_range=cfg.k_range(), m_range=cfg.m_range())
    rows = [a.as_dict() for a in audits]
    body = {"audits": rows, "alpha": ctx.prob.alpha, "alpha_flag": ctx.prob.alpha_report.flag}
    if ctx.fam.family_id == "modified_height":
        rb = modified_height_bound(ctx.fam, ctx.prob, cfg.m_range())
        body["modified_height_bound"] = {"rows": rb.rows, "lower_bound": rb.lower_bound,
                                 "threshold": rb.threshold, "holds": rb.holds}
    ctx.emit("check", body)
    report.write_csv(ctx.out / "check.csv", report.AUDIT_HEADER, rows)
    _say("audit evidence (sampled, not proofs)")
    _say(report.table(report.AUDIT_HEADER, rows))
    failed = [a for a in audits if not a.passed]
    for a in failed:
        if a.name == "F3" and a.witness:
            k, t, fv = a.witness
            _say(f"F3 offender: site k={k}, t={t!r}, f_k(t)={fv!r} > 0")
    return 1 if failed else 0


def _certs(ctx: Context):
    ks = ctx.cfg.k_range() or default_k_range(ctx.fam)
    return spike_condition_scan(ctx.fam, ctx.prob, ctx.cfg.direction(), ks,
                                default_t_grid(ctx.fam))


def cmd_certify(ctx: Context) -> int:
    certs = _certs(ctx)
    rows = [c.as_dict() for c in certs]
    ctx.emit("certify", {"certificates": rows, "direction": ctx.cfg.direction()})
    report.write_csv(ctx.out / "certificates.csv", report.CERT_HEADER, rows)
    header = ("site", "log2_height", "energy_sign", "log2_abs_energy", "log2_ratio") if ctx.log \
        else ("site", "height", "energy", "log2_ratio")
    _say(report.table(header, rows))
    bad = [c for c in certs if not c.negative]
    for c in bad:
        _say(f"certificate at site {c.site}, log2 t={c.log2_height!r} has no negative energy")
    return 1 if bad else 0


def _ladder_rows(records, reports):
    rows = []
    for rec, rep in zip(records, reports):
        rows.append({"n": rec.n, "K": rec.K, "J": rec.j_value, "norm_E": rec.norm_E,
                     "sup_norm": rec.sup_norm, "residual_sup": rec.residual_sup,
                     "verdict": "pass" if rep.passed else "fail", "j_sign": rec.j_sign,
                     "log2_abs_J": rec.log2_abs_j})
    return rows


def _trend(values):
    vals = [v for v in values if v is not None]
    if len(vals) < 2:
        return "n/a"
    if all(b < a for a, b in zip(vals, vals[1:])):
        return "decreasing"
    if all(b > a for a, b in zip(vals, vals[1:])):
        return "increasing"
    return "mixed"


def _run_ladder(ctx: Context, rungs, name: str) -> int:
    records = solution_ladder(ctx.prob, ctx.fam, rungs, ctx.cfg.solver)
    reports = [verify_solution(r, ctx.prob, ctx.fam) for r in records]
    rows = _ladder_rows(records, reports)
    full = ctx.args.full_vectors
    body = {"records": [r.as_dict(full) for r in records],
            "verification": [v.as_dict() for v in reports],
            "norm_trend": _trend([r.norm_E for r in records]),
            # certificate-only rungs have no norm, but |J| is known in log2
            "energy_magnitude_trend": _trend([r.log2_abs_j for r in records])}
    ctx.emit(name, body)
    report.write_csv(ctx.out / f"{name}.csv", report.LADDER_HEADER, rows)
    if ctx.args.emit_plot_data:
        report.write_csv(ctx.out / "plot_norms.csv", ("n", "norm_E"), rows)
        urows = [{"n": r.n, "k": int(k), "u_k": float(v)}
                 for r in records if r.u is not None for k, v in zip(r.u.sites, r.u.values)]
        report.write_csv(ctx.out / "plot_u.csv", ("n", "k", "u_k"), urows)
    header = ("n", "K", "j_sign", "log2_abs_J", "sup_norm", "verdict") if ctx.log \
        else ("n", "K", "J", "norm_E", "sup_norm", "residual_sup", "verdict")
    _say(report.table(header, rows))
    _say(f"norm trend: {body['norm_trend']}; |J| trend: {body['energy_magnitude_trend']}")
    for r, v in zip(records, reports):
        if r.note:
            _say(f"rung {r.n}: {r.note}")
        if not v.passed:
            _say(f"rung {r.n}: failed {', '.join(v.failed())}")
    return 0 if all(v.passed for v in reports) else 1


def cmd_solve(ctx: Context) -> int:
    return _run_ladder(ctx, [ctx.cfg.rungs()[0]], "solve")


def cmd_ladder(ctx: Context) -> int:
    return _run_ladder(ctx, ctx.cfg.rungs(), "ladder")


def cmd_ricceri(ctx: Context) -> int:
    if not isinstance(ctx.fam, TentFamily):
        raise ConfigError(["ricceri needs a tent family to supply c_m"])
    seq = ricceri_sequence(ctx.prob, ctx.fam, ctx.cfg.m_range(), ctx.cfg.direction())
    rows = [r.as_row() for r in seq]
    ctx.emit("ricceri", {"rows": rows, "direction": ctx.cfg.direction(), "alpha": ctx.prob.alpha})
    report.write_csv(ctx.out / "ricceri.csv", report.RICCERI_HEADER, rows)
    header = ("m", "log2_r_m", "log2_phi_bound", "delta_estimate", "verdict") if ctx.log \
        else ("m", "r_m", "phi_bound", "delta_estimate", "verdict")
    _say(report.table(header, rows))
    _say(f"delta<1: {rows[-1]['verdict']}" if rows else "delta<1: n/a")
    return 0


HANDLERS = {"norm": cmd_norm, "energy": cmd_energy, "check": cmd_check, "certify": cmd_certify,
            "solve": cmd_solve, "ladder": cmd_ladder, "ricceri": cmd_ricceri}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="homoclinic",
                                 description="Positive homoclinic solutions of discrete "
                                             "p_k-Laplacian lattice equations.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help=f"config file, or a preset name ({', '.join(PRESETS)})")
    ap.add_argument("--output-dir", help=f"artifact directory (default ${ENV_OUT} or ./homoclinic-out)")
    ap.add_argument("--log-domain", action="store_true", help="report magnitudes as log2")
    ap.add_argument("--emit-plot-data", action="store_true",
                    help="write (k, u_k) and (n, norm) series as CSV")
    ap.add_argument("--full-vectors", action="store_true", help="include solution vectors in JSON")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = read_config(args.config)
        ctx = Context(args, cfg)
        return HANDLERS[args.command](ctx)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for issue in exc.issues:
            print(f"  {issue}", file=sys.stderr)
        return 2
    except (FamilyConstraintError, LatticeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
