"""
Run scoring.

score = good_run * (0.5 ctrl_min / run_ctrl + 0.5 tsep_min / run_tsep), where
the minima are taken over the good runs currently on the board. Every insertion
can lower a minimum, so scores are always recomputed for the whole board.
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import pandas as pd

from config.ecbf_config import FLOAT_FORMAT, RESULT_COLUMNS

logger = logging.getLogger(__name__)

RADIUS_ATOL = 1e-12


@dataclass
class RunRecord:
    """Summary of one evaluated (r_o, kappa1, kappa2) combination."""

    r_o: float
    kappa1: float
    kappa2: float
    min_h: float
    run_ctrl: float
    run_tsep: float
    final_err: float
    good_run: bool
    fault: Optional[str] = None
    score: float = 0.0

    @classmethod
    def from_result(cls, result) -> "RunRecord":
        return cls(
            r_o=result.r_o,
            kappa1=result.kappa1,
            kappa2=result.kappa2,
            min_h=result.min_h,
            run_ctrl=result.run_ctrl,
            run_tsep=result.run_tsep,
            final_err=result.final_err,
            good_run=result.good_run,
            fault=result.fault
        )

    @property
    def key(self) -> Tuple[float, float, float]:
        return (self.r_o, self.kappa1, self.kappa2)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _ratio(minimum: float, value: float) -> float:
    # a zero-effort good run sets the minimum itself
    if value <= 0.0:
        return 1.0
    return minimum / value


def same_radius(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=RADIUS_ATOL)


@dataclass
class ScoreBoard:
    """Evaluated runs in evaluation order plus the current population minima."""

    runs: List[RunRecord] = field(default_factory=list)
    ctrl_min: float = math.inf
    tsep_min: float = math.inf

    def __len__(self) -> int:
        return len(self.runs)

    def add(self, record: RunRecord, rescore: bool = True) -> RunRecord:
        self.runs.append(record)
        if rescore:
            self.rescore()
        return record

    def extend(self, records: Iterable[RunRecord]) -> None:
        self.runs.extend(records)
        self.rescore()

    def rescore(self) -> "ScoreBoard":
        good = [run for run in self.runs if run.good_run]
        if not good:
            self.ctrl_min = math.inf
            self.tsep_min = math.inf
            for run in self.runs:
                run.score = 0.0
            return self

        self.ctrl_min = min(run.run_ctrl for run in good)
        self.tsep_min = min(run.run_tsep for run in good)
        for run in self.runs:
            if run.good_run:
                run.score = 0.5 * _ratio(self.ctrl_min, run.run_ctrl) + 0.5 * _ratio(self.tsep_min, run.run_tsep)
            else:
                run.score = 0.0
        return self

    def radii(self) -> List[float]:
        values: List[float] = []
        for run in self.runs:
            if not any(same_radius(run.r_o, r) for r in values):
                values.append(run.r_o)
        return sorted(values)

    def subset(self, r_o: float) -> "ScoreBoard":
        """Copy of the runs at one radius, rescored among themselves."""
        board = ScoreBoard([RunRecord(**run.to_dict()) for run in self.runs if same_radius(run.r_o, r_o)])
        return board.rescore()

    def find(self, r_o: float, kappa1: float, kappa2: float) -> Optional[RunRecord]:
        for run in self.runs:
            if same_radius(run.r_o, r_o) and run.kappa1 == kappa1 and run.kappa2 == kappa2:
                return run
        return None

    def best(self, r_o: Optional[float] = None) -> Optional[RunRecord]:
        """Highest-scoring good run, ties to the smaller kappa1 then kappa2."""
        candidates = [run for run in self.runs
                      if run.good_run and (r_o is None or same_radius(run.r_o, r_o))]
        if not candidates:
            return None
        return min(candidates, key=lambda run: (-run.score, run.kappa1, run.kappa2))

    def sort(self) -> "ScoreBoard":
        self.runs.sort(key=lambda run: run.key)
        return self

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([run.to_dict() for run in self.runs],
                            columns=RESULT_COLUMNS + ['fault'])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ctrl_min": None if math.isinf(self.ctrl_min) else self.ctrl_min,
            "tsep_min": None if math.isinf(self.tsep_min) else self.tsep_min,
            "runs": [run.to_dict() for run in self.runs]
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScoreBoard":
        board = cls([RunRecord(**run) for run in data.get("runs", [])])
        return board.rescore()

    def save(self, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2)
        logger.debug(f"Saved {len(self.runs)} runs to {path}")
        return path

    @classmethod
    def load(cls, path: str) -> "ScoreBoard":
        if not os.path.exists(path):
            raise FileNotFoundError(f"Scoreboard file not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))

    def write_results(self, path: str) -> str:
        """Results CSV, one row per run."""
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.to_frame()[RESULT_COLUMNS].to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path


def score_runs(board: ScoreBoard) -> ScoreBoard:
    """Recompute the population minima and every score on the board."""
    return board.rescore()
