"""Figures for sweep results, rendered headless to image files."""
import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}

# candidate x-axes in order of preference, and whether they read best on log scale
_AXES = (("rho", True), ("N", True), ("n", False), ("m", False), ("p", False))


def figsize(scale=1.0, ratio=(math.sqrt(5) - 1) / 2):
    width = 6.0 * scale
    return width, width * ratio


def pick_x_axis(rows):
    """First grid column that takes more than one value, else ``rho``."""
    for name, log in _AXES:
        if len({r[name] for r in rows}) > 1:
            return name, log
    return "rho", True


def _as_float(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return math.nan


def summarize(rows, x, metric="eta_max"):
    """``{group_label: (xs, medians, lows, highs)}`` over seeds of finished rows."""
    others = [name for name, _ in _AXES if name != x and len({r[name] for r in rows}) > 1]
    buckets = defaultdict(lambda: defaultdict(list))
    for r in rows:
        val = _as_float(r.get(metric))
        if r.get("status", "ok") != "ok" or not np.isfinite(val):
            continue
        label = ", ".join(f"{k}={r[k]}" for k in others) or metric
        buckets[label][_as_float(r[x])].append(val)
    out = {}
    for label, per_x in buckets.items():
        xs = sorted(per_x)
        vals = [np.asarray(per_x[v]) for v in xs]
        out[label] = (np.array(xs), np.array([np.median(v) for v in vals]),
                      np.array([v.min() for v in vals]), np.array([v.max() for v in vals]))
    return out


def plot_sweep(rows, path, metric="eta_max"):
    """Median ``metric`` against the swept parameter, with min/max over seeds as bars."""
    x, log = pick_x_axis(rows)
    series = summarize(rows, x, metric)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.8))
        for label, (xs, med, lo, hi) in sorted(series.items()):
            ax.errorbar(xs, med, yerr=[med - lo, hi - med], marker="o", ms=3,
                        capsize=2, lw=1, label=label)
        if log:
            ax.set_xscale("log")
            if all((s[1] > 0).all() for s in series.values()) and series:
                ax.set_yscale("log")
        ax.set_xlabel(x)
        ax.set_ylabel(f"{metric} (median over seeds)")
        if not series:
            ax.text(0.5, 0.5, "no finished runs", ha="center", va="center", transform=ax.transAxes)
        elif len(series) > 1 or next(iter(series)) != metric:
            ax.legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)
    return path
