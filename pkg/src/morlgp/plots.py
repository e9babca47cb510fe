"""Matplotlib figure rendering for the report path (written next to the CSVs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

GRID_MOVE_VECTORS = {0: (0, 0.35), 1: (0.35, 0), 2: (0, -0.35), 3: (-0.35, 0)}


def save_value_heatmaps(path: str, actual: np.ndarray, predicted: np.ndarray,
                        weight: float) -> None:
    """Side-by-side actual vs predicted value heatmaps for one eval weight."""
    vmin = np.nanmin([actual, predicted])
    vmax = np.nanmax([actual, predicted])
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), constrained_layout=True)
    for ax, grid, title in ((axes[0], actual, "actual"),
                            (axes[1], predicted, "predicted")):
        im = ax.imshow(grid, vmin=vmin, vmax=vmax, cmap="viridis")
        ax.set_title(f"{title} V (weight {weight:g})")
        ax.set_xlabel("col")
        ax.set_ylabel("row")
    fig.colorbar(im, ax=axes, shrink=0.85)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_policy_plot(path: str, policy_grid: np.ndarray,
                     value_grid: np.ndarray, weight: float) -> None:
    """Greedy-policy arrows over the value heatmap (NaN cells are walls)."""
    fig, ax = plt.subplots(figsize=(5, 5), constrained_layout=True)
    im = ax.imshow(value_grid, cmap="viridis")
    n_rows, n_cols = policy_grid.shape
    for r in range(n_rows):
        for c in range(n_cols):
            a = policy_grid[r, c]
            if np.isnan(a):
                continue
            dx, dy = GRID_MOVE_VECTORS[int(a)]
            ax.annotate("", xy=(c + dx, r - dy), xytext=(c, r),
                        arrowprops=dict(arrowstyle="->", color="white", lw=1.2))
    ax.set_title(f"greedy policy (weight {weight:g})")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_episode_boxplot(path: str, reports) -> None:
    """Per-episode boxplots of the fractional Q-prediction error."""
    data = [r.fractions if r.fractions.size else np.array([0.0]) for r in reports]
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    ax.boxplot(data, tick_labels=[str(r.episode) for r in reports],
               showfliers=False)
    ax.axhline(1.0, color="red", ls="--", lw=0.8)
    ax.set_xlabel("episode")
    ax.set_ylabel("|Q_pred - Q_actual| / |Q_actual|")
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bounds_scatter(path: str, report) -> None:
    """Observed max value differences against the theoretical bounds."""
    obs = np.array([p.observed_dv for p in report.pairs])
    bnd = np.array([p.bound_v for p in report.pairs])
    fig, ax = plt.subplots(figsize=(5, 5), constrained_layout=True)
    ax.scatter(bnd, obs, s=12, alpha=0.7)
    lim = max(bnd.max(), obs.max()) * 1.05 if len(bnd) else 1.0
    ax.plot([0, lim], [0, lim], color="red", ls="--", lw=0.8)
    ax.set_xlabel("bound")
    ax.set_ylabel("observed max |dV*|")
    ax.set_title("weight-difference bound check")
    fig.savefig(path, dpi=150)
    plt.close(fig)
