"""SVG figures of complexity curves against the factor * r line."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .complexity import fixed_point  # noqa: E402
from .io import atomic_write_bytes, read_curve_csv  # noqa: E402

# fixed salt and no date stamp keep SVG output byte-stable
STYLE = {
    "svg.hashsalt": "ermlab",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def curve_figure(curve, factor: float = 0.25, slope: float = 0.0, title: str | None = None):
    fp = fixed_point(curve, factor, slope)
    r = np.asarray(curve.grid)
    v = np.asarray(curve.values)
    se = np.asarray(curve.stderr)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        ax.fill_between(r, v - 2 * se, v + 2 * se, color="C0", alpha=0.2, lw=0, label="±2 stderr")
        ax.plot(r, v, color="C0", lw=1.5, label=f"{curve.kind} curve")
        ax.plot(r, factor * r, color="k", ls="--", lw=1, label=f"{factor:g}·r")
        left, right = fp.bracket
        if left is not None and right is not None:
            ax.axvspan(left, right, color="C3", alpha=0.25, lw=0, label="fixed-point bracket")
        ax.axvline(fp.r_star, color="C3", lw=1, label=f"r* = {fp.r_star:.4g}")
        ax.set_xscale("log")
        ax.set_xlabel("level r")
        ax.set_ylabel("E sup (Pf - P_n f)")
        ax.set_title(title or f"n = {curve.n}, K = {curve.replicates}")
        ax.legend(frameon=False, fontsize=8, loc="upper left")
        fig.tight_layout()
    return fig


def save_svg(fig, out_path):
    buf = io.BytesIO()
    with plt.rc_context(STYLE):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_bytes(out_path, buf.getvalue())


def plot_curve(csv_path, out_path, factor: float = 0.25, slope: float = 0.0):
    """Render a curve CSV to SVG with the stderr band, factor*r line and fixed-point bracket."""
    curve = read_curve_csv(csv_path)
    return save_svg(curve_figure(curve, factor, slope), out_path)
