"""Static PNG figures for metrics reports."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def rmse_vs_sigma(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    by_method = defaultdict(list)
    bound = {}
    for r in report.rows:
        by_method[r.method].append((r.sigma_m, r.rmse_m))
        bound[r.sigma_m] = r.crlb_sqrt_m
    for m, pts in by_method.items():
        pts.sort()
        ax.plot(*zip(*pts), marker="o", label=m)
    xs = sorted(bound)
    ax.plot(xs, [bound[x] for x in xs], "k--", label="sqrt(CRLB)")
    ax.set_xlabel("range noise sigma (m)")
    ax.set_ylabel("RMSE (m)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def anchor_refresh(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    by_anchor = defaultdict(list)
    for r in rows:
        by_anchor[r["anchor"]].append(r)
    for aid, rs in sorted(by_anchor.items()):
        rs.sort(key=lambda r: r["sigma_m"])
        s = [r["sigma_m"] for r in rs]
        line, = ax.plot(s, [r["rmse_initial_m"] for r in rs], marker="o", label=f"{aid} initial")
        ax.plot(s, [r["rmse_refreshed_m"] for r in rs], marker="s", ls="--",
                color=line.get_color(), label=f"{aid} refreshed")
    ax.set_xlabel("range noise sigma (m)")
    ax.set_ylabel("anchor RMSE (m)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, path)


def rmse_vs_eta(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    by_method = defaultdict(list)
    for r in report.rows:
        by_method[r.method].append((r.eta, r.rmse_db))
    for m, pts in by_method.items():
        pts.sort()
        ax.semilogx(*zip(*[(max(e, 1e-3), v) for e, v in pts]), marker="o", label=m)
    ax.set_xlabel("penalty factor eta")
    ax.set_ylabel("RMSE (dB re 1 m)")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    return _save(fig, path)


def level2_cdf(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for r in report.rows:
        if r.time_s is None and r.cdf:
            x, y = zip(*r.cdf)
            ax.step(x, y, where="post", label=f"{r.method} (median {r.median_m:.2f} m)")
    ax.set_xlabel("mean level-2 error per instant (m)")
    ax.set_ylabel("CDF")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def level2_time(report, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    by_method = defaultdict(list)
    for r in report.rows:
        if r.time_s is not None:
            by_method[r.method].append((r.time_s, r.rmse_m))
    for m, pts in by_method.items():
        pts.sort()
        ax.plot(*zip(*pts), label=m, lw=1)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("mean level-2 error (m)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def render(report, stem):
    stem = str(stem)
    if not report.rows:
        return []
    out = []
    if report.kind == "static":
        out.append(rmse_vs_sigma(report, f"{stem}.rmse.png"))
        if report.tables.get("anchor_refresh"):
            out.append(anchor_refresh(report.tables["anchor_refresh"], f"{stem}.anchors.png"))
    elif report.kind == "mobile":
        out.append(rmse_vs_eta(report, f"{stem}.eta.png"))
    elif report.kind == "manet":
        out.append(level2_cdf(report, f"{stem}.cdf.png"))
        out.append(level2_time(report, f"{stem}.time.png"))
    return out
