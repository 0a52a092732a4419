"""
Guided (kappa1, kappa2) search for a single obstacle radius.

The search walks kappa1 in columns. Within a column kappa2 climbs in steps of
gamma while runs keep improving on the best score so far; a column closes when
its scores fall i_limit times in a row or kappa2 reaches the cap ratio times
kappa1. The search ends after j_limit consecutive columns whose best score fell
below the previous column's best. The board is rescored after every run, so all
comparisons use current scores.
"""

import functools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from src.manipulator.model import ConfigurationError
from src.safety.cbf_filter import CbfParams
from src.search.dataset import export_dataset
from src.simulation.pool import evaluate_combination
from src.simulation.scenario import Scenario
from src.simulation.scoring import RunRecord, ScoreBoard, same_radius

logger = logging.getLogger(__name__)

Evaluator = Callable[[float, float, float], RunRecord]

TERMINATION = {
    'J_LIMIT': 'j_limit',
    'KAPPA_MAX': 'kappa_max',
    'BUDGET': 'budget'
}


@dataclass(frozen=True)
class GuidedConfig:
    """Step size, decrease limits, kappa2 cap ratio and safety bounds of the guided search."""

    gamma: float = 2.0
    i_limit: int = 3
    j_limit: int = 3
    kappa2_cap_ratio: float = 1.3
    kappa_start: float = 1.0
    kappa_max: float = 100.0
    budget: int = 200
    radii: Tuple[float, ...] = (0.2,)

    def __post_init__(self):
        object.__setattr__(self, 'radii', tuple(float(r) for r in self.radii))
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.i_limit < 1 or self.j_limit < 1:
            raise ConfigurationError(f"i_limit and j_limit must be at least 1, got {self.i_limit}, {self.j_limit}")
        if not (self.kappa_start > 0 and self.kappa2_cap_ratio > 0):
            raise ConfigurationError("kappa_start and kappa2_cap_ratio must be positive")
        if self.kappa_max < self.kappa_start:
            raise ConfigurationError(f"kappa_max {self.kappa_max} is below kappa_start {self.kappa_start}")
        if self.budget < 1:
            raise ConfigurationError(f"budget must be at least 1, got {self.budget}")
        if any(r <= 0 for r in self.radii):
            raise ConfigurationError(f"radii must be positive, got {self.radii}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GuidedConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown guided search settings: {sorted(unknown)}")
        values = dict(data)
        if "radii" in values:
            values["radii"] = tuple(values["radii"])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma,
            "i_limit": self.i_limit,
            "j_limit": self.j_limit,
            "kappa2_cap_ratio": self.kappa2_cap_ratio,
            "kappa_start": self.kappa_start,
            "kappa_max": self.kappa_max,
            "budget": self.budget,
            "radii": list(self.radii)
        }


def load_guided_config(path: str) -> GuidedConfig:
    """Load a guided search config JSON file."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Guided search config not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return GuidedConfig.from_dict(json.load(f))


@dataclass
class GuidedResult:
    """Outcome of one guided search."""

    r_o: float
    best_params: Optional[CbfParams]
    best_score: float
    board: ScoreBoard
    evals: int
    truncated: bool = False
    termination: str = ''
    sequence: List[Tuple[float, float]] = field(default_factory=list)


class _Replay:
    """Serves stored runs while the search requests them in the stored order."""

    def __init__(self, history: Sequence[RunRecord], evaluator: Evaluator):
        self.history = list(history)
        self.evaluator = evaluator
        self.position = 0
        self.replayed = 0

    def __call__(self, r_o: float, kappa1: float, kappa2: float) -> RunRecord:
        if self.position < len(self.history):
            stored = self.history[self.position]
            if same_radius(stored.r_o, r_o) and stored.kappa1 == kappa1 and stored.kappa2 == kappa2:
                self.position += 1
                self.replayed += 1
                return RunRecord(**stored.to_dict())
            logger.warning(
                f"Stored history diverges at run {self.position + 1}: expected ({stored.kappa1}, {stored.kappa2}), "
                f"search asked for ({kappa1}, {kappa2}); evaluating from here on"
            )
            self.position = len(self.history)
        return self.evaluator(r_o, kappa1, kappa2)


def guided_search(config: GuidedConfig, r_o: float, base_scenario: Optional[Scenario] = None,
                  evaluator: Optional[Evaluator] = None,
                  history: Optional[Sequence[RunRecord]] = None) -> GuidedResult:
    """
    Guided parameter search at one obstacle radius.

    Args:
        config: Search settings
        r_o: Obstacle radius (m)
        base_scenario: Scenario runs are derived from; needed unless evaluator is given
        evaluator: Replaces the simulation, called as evaluator(r_o, kappa1, kappa2)
        history: Runs from an earlier search at this radius, replayed before evaluating

    Returns:
        GuidedResult: Best parameters on the final rescored board, board, evaluation count
    """
    if evaluator is None:
        if base_scenario is None:
            raise ConfigurationError("guided_search needs a base scenario or an evaluator")
        base_scenario.with_radius(r_o)
        evaluator = functools.partial(evaluate_combination, base_scenario)
    replay = _Replay(history or [], evaluator)

    gamma = config.gamma
    board = ScoreBoard()
    sequence: List[Tuple[float, float]] = []
    column: List[RunRecord] = []
    previous_column: List[RunRecord] = []

    kappa1 = kappa2 = config.kappa_start
    i_count = j_count = 0
    truncated = False
    termination = ''

    def close_column() -> bool:
        """Move to the next kappa1; True when the search should stop."""
        nonlocal kappa1, kappa2, i_count, j_count, column, previous_column
        column_best = max(run.score for run in column)
        if previous_column and column_best < max(run.score for run in previous_column):
            j_count += 1
        else:
            j_count = 0
        logger.debug(f"Closed column kappa1={kappa1} with best score {column_best:.4f}, j_count={j_count}")
        if j_count >= config.j_limit:
            return True
        previous_column = column
        column = []
        kappa1 += gamma
        kappa2 = config.kappa_start
        i_count = 0
        return False

    def advance_kappa2() -> bool:
        nonlocal kappa2
        kappa2 += gamma
        if kappa2 >= config.kappa2_cap_ratio * kappa1 + gamma or kappa2 > config.kappa_max:
            return close_column()
        return False

    while True:
        if kappa1 > config.kappa_max:
            termination = TERMINATION['KAPPA_MAX']
            break
        if len(sequence) >= config.budget:
            truncated = True
            termination = TERMINATION['BUDGET']
            logger.warning(f"Guided search at r_o={r_o} stopped at the budget of {config.budget} runs")
            break

        record = replay(r_o, kappa1, kappa2)
        board.add(record)
        sequence.append((kappa1, kappa2))
        this_score = record.score
        previous_best = max((run.score for run in board.runs[:-1]), default=0.0)

        if column and this_score < column[-1].score:
            i_count += 1
        else:
            i_count = 0
        column.append(record)
        improved = this_score > previous_best
        logger.info(
            f"Guided r_o={r_o} kappa1={kappa1:g} kappa2={kappa2:g}: score={this_score:.4f} "
            f"good_run={record.good_run} improved={improved} i={i_count} j={j_count}"
        )

        if improved:
            stop = advance_kappa2()
        elif i_count >= config.i_limit or kappa2 >= config.kappa2_cap_ratio * kappa1:
            stop = close_column()
        else:
            stop = advance_kappa2()
        if stop:
            termination = TERMINATION['J_LIMIT']
            break

    best = board.best()
    if replay.replayed:
        logger.info(f"Replayed {replay.replayed} stored runs at r_o={r_o}")
    return GuidedResult(
        r_o=r_o,
        best_params=CbfParams(best.kappa1, best.kappa2) if best else None,
        best_score=best.score if best else 0.0,
        board=board,
        evals=len(sequence),
        truncated=truncated,
        termination=termination,
        sequence=sequence
    )


def reachable_lattice(config: GuidedConfig) -> List[Tuple[float, float]]:
    """
    Every (kappa1, kappa2) pair the guided search can visit, column by column.

    Values are accumulated the way the search accumulates them, so the pairs
    compare equal to the ones in a search sequence.
    """
    pairs: List[Tuple[float, float]] = []
    kappa1 = config.kappa_start
    while kappa1 <= config.kappa_max:
        kappa2 = config.kappa_start
        while True:
            pairs.append((kappa1, kappa2))
            kappa2 += config.gamma
            if kappa2 >= config.kappa2_cap_ratio * kappa1 + config.gamma or kappa2 > config.kappa_max:
                break
        kappa1 += config.gamma
    return pairs


def _guided_task(task) -> GuidedResult:
    config, r_o, scenario, history = task
    return guided_search(config, r_o, scenario, history=history)


def run_guided_radii(config: GuidedConfig, base_scenario: Scenario, workers: int = 1,
                     histories: Optional[Dict[float, Sequence[RunRecord]]] = None) -> List[GuidedResult]:
    """
    Guided search at every configured radius, radii in parallel when workers > 1.

    Args:
        config: Search settings, including the radii
        base_scenario: Scenario runs are derived from
        workers: Worker processes (one radius per process)
        histories: Stored runs per radius for resuming

    Returns:
        list: One GuidedResult per radius, in config order
    """
    histories = histories or {}
    tasks = []
    for r_o in config.radii:
        history = next((runs for r, runs in histories.items() if same_radius(r, r_o)), None)
        tasks.append((config, r_o, base_scenario, history))

    if workers <= 1 or len(tasks) <= 1:
        return [_guided_task(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as executor:
        return list(executor.map(_guided_task, tasks))


def merge_boards(results: Sequence[GuidedResult]) -> ScoreBoard:
    """Single board holding every run of several guided searches, rescored."""
    board = ScoreBoard()
    for result in results:
        board.runs.extend(RunRecord(**run.to_dict()) for run in result.board.runs)
    return board.sort().rescore()


@dataclass(frozen=True)
class GridComparison:
    """Guided best rated inside the exhaustive population at the same radius."""

    r_o: float
    guided_score: float
    grid_best_score: float
    ratio: float
    guided_evals: int
    grid_evals: int

    @property
    def eval_fraction(self) -> float:
        return self.guided_evals / self.grid_evals if self.grid_evals else float('inf')


def compare_with_grid(guided: GuidedResult, grid_board: ScoreBoard) -> GridComparison:
    """
    Score the guided best parameters against the grid runs of the same radius.

    The guided best run joins the grid population (unless the grid already holds
    that pair) and the population is rescored, so both scores share one pair of
    minima.
    """
    population = grid_board.subset(guided.r_o)
    grid_evals = len(population)
    if grid_evals == 0:
        raise ConfigurationError(f"Grid board has no runs at r_o={guided.r_o}")

    guided_score = 0.0
    best = guided.board.best()
    if best is not None:
        match = population.find(guided.r_o, best.kappa1, best.kappa2)
        if match is None:
            match = population.add(RunRecord(**best.to_dict()))
        else:
            population.rescore()
        guided_score = match.score

    grid_best_score = max(run.score for run in population.runs)
    ratio = guided_score / grid_best_score if grid_best_score > 0 else 0.0
    return GridComparison(
        r_o=guided.r_o,
        guided_score=guided_score,
        grid_best_score=grid_best_score,
        ratio=ratio,
        guided_evals=guided.evals,
        grid_evals=grid_evals
    )


def guided_dataset(config: GuidedConfig, base_scenario: Scenario, k: int = 5, workers: int = 1,
                   histories: Optional[Dict[float, Sequence[RunRecord]]] = None):
    """
    Guided search at every configured radius, merged into one training dataset.

    Args:
        config: Search settings, radii included
        base_scenario: Scenario runs are derived from
        k: Dataset rows per radius
        workers: Worker processes (one radius per process)
        histories: Stored runs per radius for resuming

    Returns:
        tuple: (per-radius GuidedResults, merged ScoreBoard, DatasetRows)
    """
    results = run_guided_radii(config, base_scenario, workers=workers, histories=histories)
    board = merge_boards(results)
    return results, board, export_dataset(board, k)
