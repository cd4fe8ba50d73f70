"""Figures written next to CSV/JSON outputs.

Uses the Agg backend and strips the software tag from PNG metadata so that
identical inputs give byte-identical files.
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_profile", "plot_slopes", "plot_summary", "save"]

PNG_METADATA = {"Software": None}
RC = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 9,
}


def save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_profile(profiles: dict, path, title: str = "off-diagonal decay profile") -> Path:
    """Semilog plot of one or more decay profiles ``h(n)``."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for name, h in profiles.items():
            h = np.asarray(h, float)
            n = np.arange(h.size)
            keep = h > 0
            ax.semilogy(n[keep], h[keep], marker=".", lw=1, label=name)
        ax.set_xlabel("distance n")
        ax.set_ylabel("h(n)")
        ax.set_title(title)
        if profiles:
            ax.legend()
        return save(fig, path)


def plot_slopes(report, path) -> Path:
    """Log-log plot of inverse norms against ``1/(1 - kappa)`` with fitted slopes."""
    k = np.array([row["kappa"] for row in report.rows])
    x = 1.0 / (1.0 - k)
    series = [
        ("norm_Ainv_beurling", "Beurling norm of inverse"),
        ("opnorm_Ainv_pw", "weighted operator norm of inverse"),
        ("norm_A", "Beurling norm of A"),
    ]
    r = "inf" if math.isinf(report.r) else f"{report.r:g}"
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for key, name in series:
            y = np.array([row[key] for row in report.rows])
            slope = report.slopes.get(key, float("nan"))
            target = report.targets.get(key)
            lab = f"{name}: slope {slope:.3f}"
            if target is not None:
                lab += f" (expected {target:g})"
            ax.loglog(x, y, marker="o", lw=1, label=lab)
        ax.set_xlabel("1 / (1 - kappa)")
        ax.set_ylabel("norm")
        ax.set_title(f"bidiagonal family on C_{report.n}, r={r}, alpha={report.alpha:g}")
        ax.legend()
        return save(fig, path)


def plot_summary(rows: list, path) -> Path:
    """Horizontal bars of passed/failed/skipped counts per check."""
    names = [row["check_id"] for row in rows]
    y = np.arange(len(names))
    passed = np.array([row["passed"] for row in rows])
    failed = np.array([row["failed"] for row in rows])
    other = np.array([row["skipped"] + row["precondition"] for row in rows])
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(7.0, 0.3 * len(names) + 1.5))
        ax.barh(y, passed, color="tab:green", label="pass")
        ax.barh(y, failed, left=passed, color="tab:red", label="fail")
        ax.barh(y, other, left=passed + failed, color="tab:gray", label="skipped")
        ax.set_yticks(y)
        ax.set_yticklabels(names)
        ax.invert_yaxis()
        ax.set_xlabel("reports")
        ax.legend(loc="lower right")
        fig.tight_layout()
        return save(fig, path)
