"""
Simulation Package

Scenarios, closed-loop integration, run scoring and parallel evaluation.
"""

from .scenario import Scenario, UnsafeInitialStateError, load_scenario, scenario_from_dict
from .engine import (
    RunResult,
    evaluate_good_run,
    simulate,
    simulate_batch,
    wrist_deviation,
    write_summary,
    write_trajectory
)
from .scoring import RunRecord, ScoreBoard, score_runs
from .pool import evaluate_all, evaluate_combination

__all__ = [
    'Scenario', 'UnsafeInitialStateError', 'load_scenario', 'scenario_from_dict',
    'RunResult', 'evaluate_good_run', 'simulate', 'simulate_batch', 'wrist_deviation', 'write_summary',
    'write_trajectory',
    'RunRecord', 'ScoreBoard', 'score_runs',
    'evaluate_all', 'evaluate_combination'
]
