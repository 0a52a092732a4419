"""
Exhaustive grid search over (r_o, kappa1, kappa2).
"""

import itertools
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.manipulator.model import ConfigurationError
from src.simulation.pool import evaluate_all
from src.simulation.scenario import Scenario
from src.simulation.scoring import RunRecord, ScoreBoard

logger = logging.getLogger(__name__)


def _check_values(values: Sequence[float], name: str) -> Tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if not values:
        raise ConfigurationError(f"{name} must not be empty")
    if any(v <= 0 for v in values):
        raise ConfigurationError(f"{name} must be positive, got {values}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigurationError(f"{name} must be strictly increasing, got {values}")
    return values


@dataclass(frozen=True)
class GridSpec:
    """Obstacle radii and the kappa values shared by kappa1 and kappa2."""

    r_o_values: Tuple[float, ...]
    kappa_values: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'r_o_values', _check_values(self.r_o_values, "r_o_values"))
        object.__setattr__(self, 'kappa_values', _check_values(self.kappa_values, "kappa_values"))

    @property
    def size(self) -> int:
        return len(self.r_o_values) * len(self.kappa_values) ** 2

    def combinations(self) -> List[Tuple[float, float, float]]:
        return list(itertools.product(self.r_o_values, self.kappa_values, self.kappa_values))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridSpec":
        for key in ("r_o_values", "kappa_values"):
            if key not in data:
                raise ConfigurationError(f"Missing '{key}' in grid config")
        return cls(tuple(data["r_o_values"]), tuple(data["kappa_values"]))

    def to_dict(self) -> Dict[str, Any]:
        return {"r_o_values": list(self.r_o_values), "kappa_values": list(self.kappa_values)}


def load_grid(path: str) -> GridSpec:
    """Load a grid config JSON file."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Grid config not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return GridSpec.from_dict(json.load(f))


def grid_search(grid: GridSpec, base_scenario: Scenario, workers: int = 1,
                board: Optional[ScoreBoard] = None, shuffle_seed: Optional[int] = None,
                evaluator: Optional[Callable[[float, float, float], RunRecord]] = None,
                on_result: Optional[Callable[[RunRecord], None]] = None) -> ScoreBoard:
    """
    Evaluate every grid combination and score the population.

    Args:
        grid: Grid values
        base_scenario: Scenario every run is derived from
        workers: Worker processes for the simulations
        board: Existing board; combinations already on it are skipped (resume)
        shuffle_seed: Evaluate in a seeded random order instead of grid order
        evaluator: Replaces the simulation, called as evaluator(r_o, kappa1, kappa2)
        on_result: Called after each finished run (checkpointing)

    Returns:
        ScoreBoard: Runs sorted by (r_o, kappa1, kappa2), rescored once

    Raises:
        UnsafeInitialStateError: If a radius puts the start inside the obstacle
    """
    board = board if board is not None else ScoreBoard()
    for r_o in grid.r_o_values:
        base_scenario.with_radius(r_o)

    pending = [combo for combo in grid.combinations() if board.find(*combo) is None]
    skipped = grid.size - len(pending)
    if skipped:
        logger.info(f"Resuming grid search: {skipped} of {grid.size} runs already on the board")
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(pending))
        pending = [pending[i] for i in order]

    def record(run: RunRecord) -> None:
        board.add(run, rescore=False)
        if on_result is not None:
            on_result(run)

    if evaluator is None:
        evaluate_all(base_scenario, pending, workers=workers, on_result=record)
    else:
        for r_o, k1, k2 in pending:
            record(evaluator(r_o, k1, k2))

    board.sort().rescore()
    good = sum(1 for run in board.runs if run.good_run)
    logger.info(f"Grid search finished: {len(board)} runs, {good} good")
    return board
