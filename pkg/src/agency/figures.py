"""Companion figures for report runs.

Every function takes plain arrays plus an output path and writes one PNG.
These are side files for quick inspection; the JSON and CSV reports stay
the canonical output and never depend on anything here.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 120


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def schedule_figure(xs, values, bounds, path: str, title: str = "") -> str:
    """Bid schedules b_i over a scalar action axis, with the feasible band."""
    xs = np.asarray(xs, float)
    values = np.asarray(values, float)
    lo, hi = (np.asarray(b, float) for b in bounds)
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(values.shape[0]):
        ax.plot(xs, values[i], label=f"b{i + 1}")
        ax.fill_between(xs, lo[i], hi[i], alpha=0.08)
    ax.set_xlabel("action")
    ax.set_ylabel("bid")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    return _save(fig, path)


def curves_figure(b1, b2, levels, ref_bids, ref_levels, path: str,
                  title: str = "") -> str:
    """Indifference curves through a reference point in the bid plane.

    ``levels`` is a (3, len(b2), len(b1)) array of u0, u1, u2 values and
    each contour is drawn at that player's reference level.
    """
    b1 = np.asarray(b1, float)
    b2 = np.asarray(b2, float)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    colors = ("tab:gray", "tab:blue", "tab:red")
    for k in range(3):
        grid = np.asarray(levels[k], float)
        span = grid.max() - grid.min()
        if b1.size < 2 or b2.size < 2 or span <= 0:
            continue
        cs = ax.contour(b1, b2, grid, levels=[float(ref_levels[k])],
                        colors=[colors[k]])
        label = "agent" if k == 0 else f"principal {k}"
        try:
            cs.collections[0].set_label(label)
        except (AttributeError, IndexError):
            pass
    ax.plot([ref_bids[0]], [ref_bids[1]], "ko", label="reference")
    ax.set_xlabel("b1")
    ax.set_ylabel("b2")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def battery_figure(names, columns, table, path: str) -> str:
    """Verdict matrix, one row per game, green pass / red fail."""
    table = np.asarray(table, bool)
    fig, ax = plt.subplots(figsize=(1.2 + 0.7 * len(columns),
                                    0.8 + 0.45 * len(names)))
    shades = np.where(table, 0.8, 0.25)
    ax.imshow(shades, cmap="RdYlGn", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(columns)), columns)
    ax.set_yticks(range(len(names)), names)
    for r in range(table.shape[0]):
        for c in range(table.shape[1]):
            ax.text(c, r, "+" if table[r, c] else "x",
                    ha="center", va="center", fontsize=9)
    ax.set_title("assumption battery")
    return _save(fig, path)


def margins_figure(labels, values, path: str, title: str = "") -> str:
    """Signed margins as horizontal bars; negative means a failed check."""
    values = np.asarray(values, float)
    fig, ax = plt.subplots(figsize=(6, 0.8 + 0.4 * len(labels)))
    ypos = np.arange(len(labels))
    ax.barh(ypos, values,
            color=["tab:green" if v >= 0 else "tab:red" for v in values])
    ax.set_yticks(ypos, labels)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("margin")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def frontier_figure(utilities, path: str, title: str = "") -> str:
    """Undominated utility vectors: principal 1 vs 2, shaded by the agent."""
    pts = np.asarray(utilities, float)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    if pts.shape[1] >= 3:
        sc = ax.scatter(pts[:, 1], pts[:, 2], c=pts[:, 0], s=12, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="u0")
        ax.set_xlabel("u1")
        ax.set_ylabel("u2")
    else:
        ax.scatter(pts[:, 0], pts[:, 1] if pts.shape[1] > 1 else pts[:, 0], s=12)
    if title:
        ax.set_title(title)
    return _save(fig, path)
