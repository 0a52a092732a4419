"""
Static SVG figures: end-effector paths with the obstacle, h over time and
grid-search score maps.

SVG output is made reproducible by dropping the date stamp and fixing the hash
salt; run timestamps live in the metadata sidecar instead.
"""

import logging
import os
from typing import Optional, Sequence

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.simulation.engine import RunResult  # noqa: E402
from src.simulation.scoring import ScoreBoard  # noqa: E402
from src.safety.cbf_filter import Obstacle  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams['svg.hashsalt'] = 'ecbf-arm'
SVG_METADATA = {'Date': None}


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format='svg', metadata=SVG_METADATA)
    plt.close(fig)
    logger.info(f"Wrote figure {path}")
    return path


def plot_run(result: RunResult, obstacle: Obstacle, path: str,
             reference: Optional[RunResult] = None, title: Optional[str] = None) -> str:
    """
    End-effector path in the x-y and x-z planes plus h(t).

    Args:
        result: Run to draw
        obstacle: Obstacle drawn as a circle of radius r_o in both views
        path: Output SVG path
        reference: Optional second run (for example the unfiltered one) drawn dashed
        title: Figure title

    Returns:
        str: path
    """
    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))
    views = (('x', 'y', 0, 1), ('x', 'z', 0, 2))

    for ax, (label_a, label_b, a, b) in zip(axes[:2], views):
        desired = result.ee_desired
        ax.plot(desired[:, a], desired[:, b], color='0.6', linestyle=':', label='desired')
        if reference is not None and len(reference.log):
            ax.plot(reference.ee_path[:, a], reference.ee_path[:, b], linestyle='--', label='reference')
        ax.plot(result.ee_path[:, a], result.ee_path[:, b], label='filtered')
        ax.add_patch(plt.Circle((obstacle.center[a], obstacle.center[b]), obstacle.radius,
                                color='tab:red', alpha=0.3))
        ax.set_xlabel(f'{label_a} (m)')
        ax.set_ylabel(f'{label_b} (m)')
        ax.set_aspect('equal', adjustable='datalim')
        ax.grid(True)
        ax.legend(loc='best')

    axes[2].plot(result.times, result.h, label='h')
    axes[2].axhline(y=0.0, color='tab:red', linestyle='--')
    axes[2].set_xlabel('t (s)')
    axes[2].set_ylabel('h (m^2)')
    axes[2].grid(True)

    fig.suptitle(title or f"r_o={result.r_o} kappa1={result.kappa1} kappa2={result.kappa2}")
    fig.tight_layout()
    return _save(fig, path)


def plot_scores(board: ScoreBoard, path: str, radii: Optional[Sequence[float]] = None) -> str:
    """
    Score heat map over (kappa1, kappa2), one panel per radius.

    Args:
        board: Scored board
        path: Output SVG path
        radii: Radii to draw, all by default

    Returns:
        str: path
    """
    radii = list(radii) if radii is not None else board.radii()
    if not radii:
        raise ValueError("Scoreboard is empty, nothing to plot")

    fig, axes = plt.subplots(1, len(radii), figsize=(4.5 * len(radii), 4), squeeze=False)
    for ax, r_o in zip(axes[0], radii):
        subset = board.subset(r_o)
        k1_values = sorted({run.kappa1 for run in subset.runs})
        k2_values = sorted({run.kappa2 for run in subset.runs})
        grid = np.full((len(k2_values), len(k1_values)), np.nan)
        for run in subset.runs:
            grid[k2_values.index(run.kappa2), k1_values.index(run.kappa1)] = run.score

        image = ax.imshow(grid, origin='lower', vmin=0.0, vmax=1.0, cmap='viridis', aspect='auto')
        ax.set_xticks(range(len(k1_values)))
        ax.set_xticklabels([f'{k:g}' for k in k1_values], rotation=90)
        ax.set_yticks(range(len(k2_values)))
        ax.set_yticklabels([f'{k:g}' for k in k2_values])
        ax.set_xlabel('kappa1')
        ax.set_ylabel('kappa2')
        ax.set_title(f'r_o = {r_o:g} m')
        fig.colorbar(image, ax=ax, label='score')

    fig.tight_layout()
    return _save(fig, path)
