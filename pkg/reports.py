"""
Shape computed records into DataFrames (CSV) and plain documents (JSON).

Every artifact embeds the configuration that produced it and no wall-clock
data, so identical configurations give byte-identical files.
"""

import io
import json
import math
import sys
from enum import Enum

import numpy as np
import pandas as pd

from concavity import ConcavityVerdict
from dist_core import CompoundingDist, Pmf
from maxent import ChiRecord, SweepReport
from semigroup import EnergyCurve, ScoreTable


def plain(value):
    """Recursively convert numpy/enum values to JSON-ready Python values; non-finite floats become None."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def format_point(point):
    return ";".join(f"{v:.12g}" for v in point)


def format_entropy(value, unit="nats"):
    if value is None:
        return "n/a"
    return f"{value:.9f} {unit}".rstrip()


# === Documents ===

def sweep_document(report):
    return {
        "grid_description": report.grid_description,
        "best_entropy": report.best_entropy,
        "best_point": report.best_point,
        "reference_entropy": report.reference_entropy,
        "verdict": report.verdict,
        "witnesses": [{"point": p, "value": h} for p, h in report.witnesses],
        "conditions": report.conditions,
        "seed": report.seed,
        "notes": report.notes,
        "auxiliary": report.auxiliary,
        "unit": report.unit,
        "sample_count": len(report.samples),
    }


def to_document(record):
    """Structured form of any record produced by the library."""
    if isinstance(record, (Pmf, CompoundingDist, ConcavityVerdict, ChiRecord)):
        doc = record.to_dict()
    elif isinstance(record, SweepReport):
        doc = sweep_document(record)
    elif isinstance(record, ScoreTable):
        doc = {
            "x": record.x,
            "score": record.values,
            "base_mean": record.base_mean,
            "excluded": list(record.excluded),
        }
    elif isinstance(record, EnergyCurve):
        doc = {
            "variable": record.variable,
            "grid": record.grid,
            "values": record.values,
            "derivative_estimates": record.derivative_estimates,
            "clipped_mass": record.clipped_mass,
        }
        if record.analytic_derivatives is not None:
            doc["analytic_derivatives"] = record.analytic_derivatives
    elif isinstance(record, dict):
        doc = record
    else:
        raise TypeError(f"no document form for {type(record).__name__}")
    return plain(doc)


# === Frames ===

def pmf_frame(p):
    return pd.DataFrame({"x": p.support, "probability": p.probs})


def verdict_frame(verdict, label=""):
    doc = verdict.to_dict()
    lo, hi = doc.pop("checked_support")
    return pd.DataFrame([{"label": label, **doc, "checked_lo": lo, "checked_hi": hi}])


def score_frame(table):
    return pd.DataFrame({"x": table.x, "score": table.values})


def energy_frame(curve):
    df = pd.DataFrame({
        curve.variable: curve.grid,
        "value": curve.values,
        "derivative_estimate": curve.derivative_estimates,
        "clipped_mass": curve.clipped_mass,
    })
    if curve.analytic_derivatives is not None:
        df["analytic_derivative"] = curve.analytic_derivatives
    return df


def sweep_frame(report):
    """One row per evaluated sample."""
    if report.samples and isinstance(report.samples[0], dict):
        return pd.DataFrame(report.samples)
    witnesses = {format_point(p) for p, _ in report.witnesses}
    rows = []
    for point, value in report.samples:
        key = format_point(point)
        rows.append({"point": key, "entropy": value, "witness": key in witnesses})
    return pd.DataFrame(rows, columns=["point", "entropy", "witness"])


def chi_frame(record):
    return pd.DataFrame([
        {"quantity": "H(CBin(2,0.005,Q))", "value": record.h_cbin, "bound": "<", "threshold": record.bounds["cbin_below"],
         "holds": record.h_cbin < record.bounds["cbin_below"]},
        {"quantity": "H(C_Q b_p)", "value": record.h_cbp, "bound": ">", "threshold": record.bounds["cbp_above"],
         "holds": record.h_cbp > record.bounds["cbp_above"]},
        {"quantity": "H(CPo(0.01,Q))", "value": record.h_cpo, "bound": "<", "threshold": record.bounds["cpo_below"],
         "holds": record.h_cpo < record.bounds["cpo_below"]},
        {"quantity": "gap vs CBin", "value": record.gap_binomial, "bound": ">", "threshold": 0.0,
         "holds": record.gap_binomial > 0},
        {"quantity": "gap vs CPo", "value": record.gap_poisson, "bound": ">", "threshold": 0.0,
         "holds": record.gap_poisson > 0},
    ])


# === Writers ===

def render_csv(df, config):
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(plain(config), sort_keys=True) + "\n")
    df.to_csv(buf, index=False, float_format="%.17g", lineterminator="\n")
    return buf.getvalue()


def render_json(doc, config):
    return json.dumps({"config": plain(config), "result": plain(doc)}, sort_keys=True, indent=2) + "\n"


def write_text(text, path=None):
    """Write to `path`, or to stdout when path is None or '-'."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
