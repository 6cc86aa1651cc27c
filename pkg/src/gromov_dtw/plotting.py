"""Figures for alignment, solver-trace and trajectory outputs.

Rendering uses the Agg/SVG backends only and strips timestamps and random
ids from SVG output so repeated runs give identical files.
"""
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (4.0, 3.2),
    "font.size": 9,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "gromov-dtw",
    "svg.fonttype": "none",
}


def alignment_figure(rows, cols, weights, shape=None):
    """Alignment weights as an image (rows: first series, cols: second series)."""
    with plt.rc_context(STYLE):
        m = int(max(rows)) + 1 if shape is None else shape[0]
        n = int(max(cols)) + 1 if shape is None else shape[1]
        W = np.zeros((m, n))
        W[np.asarray(rows, int), np.asarray(cols, int)] = weights
        fig, ax = plt.subplots()
        ax.imshow(W, cmap="Greys", origin="upper", vmin=0.0, vmax=1.0,
                  interpolation="nearest", aspect="auto")
        ax.set_xlabel("time in y")
        ax.set_ylabel("time in x")
        fig.tight_layout()
    return fig


def trace_figure(iterations, objective, raw=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if raw is not None:
            ax.plot(iterations, raw, color="0.6", marker=".", label="iterate")
        ax.plot(iterations, objective, color="k", label="best so far")
        ax.set_xlabel("iteration")
        ax.set_ylabel("objective")
        ax.legend(frameon=False)
        fig.tight_layout()
    return fig


def trajectory_figure(points, loss=None):
    """Agent trajectory, with the loss history on a log scale when given."""
    with plt.rc_context(STYLE):
        ncols = 2 if loss is not None else 1
        fig, axes = plt.subplots(1, ncols, figsize=(4.0 * ncols, 3.2), squeeze=False)
        ax = axes[0, 0]
        pts = np.asarray(points)
        ax.plot(pts[:, 0], pts[:, 1], color="k", marker=".")
        ax.plot(pts[0, 0], pts[0, 1], "o", color="tab:red")
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_title("trajectory")
        if loss is not None:
            ax = axes[0, 1]
            ax.semilogy(np.arange(len(loss)), np.maximum(loss, 1e-16), color="k")
            ax.set_xlabel("step")
            ax.set_ylabel("loss")
        fig.tight_layout()
    return fig


def save_figure(fig, path):
    fmt = str(path).rsplit(".", 1)[-1].lower()
    kwargs = {"metadata": {"Date": None}} if fmt == "svg" else {}
    if fmt == "png":
        kwargs = {"metadata": {"Software": None}}
    with plt.rc_context(STYLE):
        fig.savefig(path, **kwargs)
    plt.close(fig)
