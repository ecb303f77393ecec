"""SVG figures rendered with matplotlib (scatter/line charts and spectrum layouts)."""

from __future__ import annotations

import io
import math

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

__all__ = ["xy_plot", "spectrum_layout"]


def _to_svg(fig: Figure) -> str:
    buf = io.StringIO()
    # Fixed salt and no date so reruns produce identical files.
    with matplotlib.rc_context({"svg.hashsalt": "qiscfa", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def xy_plot(series, xlabel="", ylabel="", title="", lines=True, logx=False) -> str:
    """Plot ``series``: a list of ``(label, [(x, y), ...])``.

    Non-finite points, and nonpositive ``x`` when ``logx``, are skipped.
    """
    fig = Figure(figsize=(6.4, 4.8))
    ax = fig.add_subplot()
    for label, data in series:
        pts = [(x, y) for x, y in data if math.isfinite(x) and math.isfinite(y) and (x > 0 or not logx)]
        if not pts:
            continue
        xs, ys = zip(*pts)
        ax.plot(xs, ys, "o-" if lines else "o", label=str(label), markersize=4)
    if logx:
        ax.set_xscale("log")
    ax.set(xlabel=xlabel, ylabel=ylabel, title=title)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    ax.grid(True, alpha=0.3)
    return _to_svg(fig)


def _freq_label(k, P):
    """Angular frequency ``2 k / P`` in units of pi."""
    return f"{2 * k}/{P}" if k else "0"


def spectrum_layout(M, N, marks, title="") -> str:
    """Grid of the ``M x N`` frequency plane with a label per occupied bin.

    ``marks`` maps ``(u, v)`` to a short label such as ``"L"`` or ``"a,b"``.
    Rows are ``u`` (vertical frequency) and columns ``v``, shifted so that
    baseband sits in the middle.
    """
    fig = Figure(figsize=(0.8 * N + 1, 0.8 * M + 1))
    ax = fig.add_subplot()
    cu, cv = M // 2, N // 2
    for i in range(M):
        for j in range(N):
            lab = marks.get(((i - cu) % M, (j - cv) % N), "")
            ax.add_patch(Rectangle((j, i), 1, 1, facecolor="#dde8f5" if lab else "white", edgecolor="#888"))
            if lab:
                ax.text(j + 0.5, i + 0.5, lab, ha="center", va="center", fontsize=10)
    ax.set_xlim(0, N)
    ax.set_ylim(M, 0)
    ax.set_xticks([j + 0.5 for j in range(N)], [_freq_label(j - cv, N) for j in range(N)])
    ax.set_yticks([i + 0.5 for i in range(M)], [_freq_label(i - cu, M) for i in range(M)])
    ax.set(xlabel="horizontal frequency (x pi)", ylabel="vertical frequency (x pi)", title=title)
    ax.set_aspect("equal")
    return _to_svg(fig)
