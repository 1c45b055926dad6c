"""Render the report CSVs as figures.

The tidy tables are the primary output; these renderers turn them into the
matching PNGs (interval fans, width curves, learning-curve grids) so a run
leaves both the delimited data and the pictures next to each other.  Uses
matplotlib's object API only, no global pyplot state.
"""

from __future__ import annotations

from matplotlib.figure import Figure

from .validate import LearningCurve

_BAND_COLOR = "#4477aa"
_CV_COLOR = "#cc3311"
_VIEW_COLORS = {
    "population": _BAND_COLOR,
    "growing_truth": _BAND_COLOR,
    "growing_cv": _CV_COLOR,
    "retrospective": "#228833",
}


def render_interval_fan(rows, path, level: float = 0.95):
    """One panel per observed proportion: interval bounds as a shaded fan
    over the test sample size.

    ``rows`` are dicts with keys p_hat, n, lower, upper (the ci-table rows).
    """
    by_p = {}
    for row in rows:
        by_p.setdefault(row["p_hat"], []).append(row)
    p_values = sorted(by_p)
    fig = Figure(figsize=(2.2 * len(p_values), 2.8))
    axes = fig.subplots(1, len(p_values), sharey=True, squeeze=False)[0]
    for ax, p in zip(axes, p_values):
        chunk = sorted(by_p[p], key=lambda r: r["n"])
        ns = [r["n"] for r in chunk]
        ax.fill_between(ns, [r["lower"] for r in chunk], [r["upper"] for r in chunk],
                        alpha=0.3, color=_BAND_COLOR, linewidth=0)
        ax.axhline(p, color="black", linewidth=0.8)
        ax.set_title(f"observed {p:g}", fontsize=9)
        ax.set_xlabel("test samples")
        ax.set_ylim(0, 1)
    axes[0].set_ylabel("proportion")
    fig.suptitle(f"{level:.0%} interval vs test sample size", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def render_width_curves(rows, path, level: float = 0.95):
    """Interval width against test sample size, one line per proportion."""
    by_p = {}
    for row in rows:
        by_p.setdefault(row["p_hat"], []).append(row)
    fig = Figure(figsize=(5.0, 3.4))
    ax = fig.subplots()
    for p in sorted(by_p):
        chunk = sorted(by_p[p], key=lambda r: r["n"])
        ax.plot([r["n"] for r in chunk], [r["width"] for r in chunk], label=f"{p:g}")
    ax.set_xlabel("test samples")
    ax.set_ylabel(f"{level:.0%} interval width")
    ax.set_ylim(bottom=0)
    ax.legend(title="observed", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def render_learning_curves(curves: list[LearningCurve], path):
    """Grid of views (rows) by classes (columns): mean line inside the
    5th-95th percentile band."""
    if not curves:
        raise ValueError("no curves to render")
    classes = curves[0].classes
    fig = Figure(figsize=(2.2 * len(classes) + 0.6, 2.0 * len(curves) + 0.5))
    axes = fig.subplots(len(curves), len(classes), sharex=True, sharey=True,
                        squeeze=False)
    for vi, curve in enumerate(curves):
        color = _VIEW_COLORS.get(curve.view, "#666666")
        for ci, label in enumerate(classes):
            ax = axes[vi][ci]
            j = curve.classes.index(label)
            ax.fill_between(curve.sizes, curve.p5[:, j], curve.p95[:, j],
                            alpha=0.3, color=color, linewidth=0)
            ax.plot(curve.sizes, curve.mean[:, j], color=color, linewidth=1.2)
            ax.set_ylim(0, 1.02)
            if vi == 0:
                ax.set_title(label, fontsize=9)
            if vi == len(curves) - 1:
                ax.set_xlabel("training samples / class")
            if ci == 0:
                ax.set_ylabel(curve.view.replace("_", " "), fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
