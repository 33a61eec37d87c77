"""Deterministic JSON/CSV artifacts and the one-screen summary tables."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SCHEMA = "homoclinic-report/1"

LADDER_HEADER = ("n", "K", "J", "norm_E", "sup_norm", "residual_sup", "verdict",
                 "j_sign", "log2_abs_J")
RICCERI_HEADER = ("m", "r_m", "phi_bound", "delta_estimate", "verdict",
                  "log2_r_m", "log2_phi_bound")
CERT_HEADER = ("site", "log2_height", "height", "energy", "energy_sign",
               "log2_abs_energy", "log2_ratio")
AUDIT_HEADER = ("name", "status", "value", "witness")


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    return obj


def num(x) -> str:
    """The single formatting used by CSV cells and summary tables."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return repr(x) if math.isfinite(x) else ""
    if isinstance(x, (list, tuple)):
        return " ".join(num(v) for v in x)
    return str(x)


def write_json(path: Path, payload: dict) -> Path:
    body = dict(payload)
    body["schema"] = SCHEMA
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(clean(body), sort_keys=True, indent=2, allow_nan=False) + "\n",
                    encoding="utf-8")
    return path


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([num(row.get(h)) for h in header])
    return path


def table(header, rows) -> str:
    cells = [[num(r.get(h)) for h in header] for r in rows]
    widths = [max([len(h)] + [len(c[i]) for c in cells]) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)
