"""
Parallel evaluation of parameter combinations.

Combinations are cut into batches of consecutive runs with the same obstacle
radius. Each worker process integrates a whole batch in lockstep; only the run
summaries travel back to the caller, which owns the scoreboard.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from config.ecbf_config import BATCH_SIZE
from src.manipulator.model import ConfigurationError
from src.simulation.engine import simulate, simulate_batch
from src.simulation.scenario import Scenario
from src.simulation.scoring import RunRecord, same_radius

logger = logging.getLogger(__name__)

Combination = Tuple[float, float, float]


def evaluate_combination(scenario: Scenario, r_o: float, kappa1: float, kappa2: float) -> RunRecord:
    """Simulate one (r_o, kappa1, kappa2) combination on top of a base scenario."""
    run = scenario.with_radius(r_o).with_params(kappa1, kappa2)
    return RunRecord.from_result(simulate(run))


def batch_combinations(combinations: Sequence[Combination], batch_size: int) -> List[List[Combination]]:
    """Split combinations, in order, into runs of at most batch_size sharing one radius."""
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be at least 1, got {batch_size}")
    batches: List[List[Combination]] = []
    for combo in combinations:
        current = batches[-1] if batches else None
        if current is not None and len(current) < batch_size and same_radius(current[0][0], combo[0]):
            current.append(combo)
        else:
            batches.append([combo])
    return batches


def _evaluate_batch(task: Tuple[Scenario, List[Combination]]) -> List[RunRecord]:
    scenario, combos = task
    radius = scenario.with_radius(combos[0][0])
    return simulate_batch([radius.with_params(k1, k2) for _, k1, k2 in combos])


def evaluate_all(scenario: Scenario, combinations: Sequence[Combination], workers: int = 1,
                 on_result: Optional[Callable[[RunRecord], None]] = None,
                 batch_size: int = BATCH_SIZE) -> List[RunRecord]:
    """
    Evaluate combinations, in parallel when workers > 1.

    Args:
        scenario: Base scenario
        combinations: (r_o, kappa1, kappa2) triples
        workers: Worker-process count
        on_result: Called in the parent process for each finished run, in input order
        batch_size: Largest number of runs integrated together

    Returns:
        list: RunRecords in the order of combinations
    """
    tasks = [(scenario, combos) for combos in batch_combinations(combinations, batch_size)]
    total = len(combinations)
    records: List[RunRecord] = []

    def collect(results: Iterable[List[RunRecord]]) -> None:
        for batch in results:
            for record in batch:
                records.append(record)
                logger.info(
                    f"[{len(records)}/{total}] r_o={record.r_o} kappa1={record.kappa1} kappa2={record.kappa2} "
                    f"good_run={record.good_run} min_h={record.min_h:.4g} fault={record.fault}"
                )
                if on_result is not None:
                    on_result(record)

    if workers <= 1 or len(tasks) <= 1:
        collect(_evaluate_batch(task) for task in tasks)
    else:
        logger.info(f"Evaluating {total} runs in {len(tasks)} batches on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            collect(executor.map(_evaluate_batch, tasks))
    return records
