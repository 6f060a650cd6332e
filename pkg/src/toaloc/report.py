"""CSV/JSON emission of metrics reports and static figures next to them."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

COLUMNS = ("method", "sigma_m", "v_mean_mps", "eta", "time_s", "rmse_m", "rmse_db",
           "crlb_sqrt_m", "median_m", "p90_m", "failure_rate")
TEXT_COLUMNS = ("method",)


def fmt(x):
    """Six significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def _json_value(x):
    if x is None or isinstance(x, str):
        return x
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.6g}")


def row_dict(row):
    return {c: getattr(row, c) for c in COLUMNS}


def to_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow([fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def to_json(report):
    rows = [{c: _json_value(getattr(r, c)) for c in COLUMNS} for r in report.rows]
    return json.dumps(rows, indent=1) + "\n"


def emit_report(report, fmt_name="csv"):
    if fmt_name == "csv":
        return to_csv(report)
    if fmt_name == "json":
        return to_json(report)
    raise ValueError(f"unknown format {fmt_name!r}")


def _parse_cell(col, text):
    if col in TEXT_COLUMNS:
        return text
    if text == "":
        return None
    return float(text)


def parse_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError("unexpected CSV header")
    return [{c: _parse_cell(c, v) for c, v in zip(COLUMNS, r)} for r in rows[1:]]


def parse_json(text):
    return [{c: (d[c] if c in TEXT_COLUMNS or d[c] is None else float(d[c])) for c in COLUMNS}
            for d in json.loads(text)]


def table_csv(rows):
    if not rows:
        return ""
    cols = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([fmt(r[c]) for c in cols])
    return buf.getvalue()


def cdf_rows(report):
    """Long-form CDF table for the summary rows of a report."""
    out = []
    for r in report.rows:
        if report.kind == "manet" and r.time_s is not None:
            continue
        for err, frac in r.cdf:
            out.append({"method": r.method, "sigma_m": r.sigma_m, "v_mean_mps": r.v_mean_mps,
                        "eta": r.eta, "error_m": err, "fraction": frac})
    return out


def write_outputs(report, out, fmt_name="csv", figures=True):
    """Write the main report to ``out`` plus side tables and PNG figures.

    Side files share the stem of ``out``: ``<stem>.cdf.csv``,
    ``<stem>.<table>.csv`` and ``<stem>.<figure>.png``.  Returns the list of
    paths written.
    """
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(emit_report(report, fmt_name))
    written = [out]
    stem = out.with_suffix("")
    side = {"cdf": cdf_rows(report), **report.tables}
    for name, rows in side.items():
        if rows:
            p = Path(f"{stem}.{name}.csv")
            p.write_text(table_csv(rows))
            written.append(p)
    if figures:
        from . import plots
        written += plots.render(report, stem)
    return written
