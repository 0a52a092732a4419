"""
Training dataset export: the top-k good runs per obstacle radius.
"""

import logging
import os
from dataclasses import asdict, dataclass
from typing import List

import pandas as pd

from config.ecbf_config import DATASET_COLUMNS, FLOAT_FORMAT
from src.manipulator.model import ConfigurationError
from src.simulation.scoring import ScoreBoard, same_radius

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetRow:
    r_o: float
    kappa1: float
    kappa2: float
    rank: int
    score: float


def export_dataset(board: ScoreBoard, k: int) -> List[DatasetRow]:
    """
    Top-k good runs per radius, ranked by score.

    Ties go to the smaller kappa1, then the smaller kappa2. Radii without good
    runs contribute no rows.

    Args:
        board: Scored board
        k: Rows per radius

    Returns:
        list: DatasetRows ordered by radius then rank
    """
    if k < 1:
        raise ConfigurationError(f"k must be at least 1, got {k}")

    rows: List[DatasetRow] = []
    for r_o in board.radii():
        good = [run for run in board.runs if run.good_run and same_radius(run.r_o, r_o)]
        if not good:
            logger.warning(f"No good runs at r_o={r_o}; the dataset has no rows for it")
            continue
        good.sort(key=lambda run: (-run.score, run.kappa1, run.kappa2))
        for rank, run in enumerate(good[:k], 1):
            rows.append(DatasetRow(r_o=run.r_o, kappa1=run.kappa1, kappa2=run.kappa2,
                                   rank=rank, score=run.score))
    return rows


def write_dataset(rows: List[DatasetRow], path: str) -> str:
    """Write the dataset CSV."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame = pd.DataFrame([asdict(row) for row in rows], columns=DATASET_COLUMNS)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(rows)} dataset rows to {path}")
    return path


def load_dataset(path: str) -> List[DatasetRow]:
    """
    Read a dataset CSV.

    Raises:
        FileNotFoundError: If the file is missing
        ConfigurationError: If columns are missing
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Dataset file not found: {path}")
    frame = pd.read_csv(path)
    missing = [column for column in DATASET_COLUMNS if column not in frame.columns]
    if missing:
        raise ConfigurationError(f"Dataset {path} lacks columns {missing}")
    return [
        DatasetRow(r_o=float(row.r_o), kappa1=float(row.kappa1), kappa2=float(row.kappa2),
                   rank=int(row.rank), score=float(row.score))
        for row in frame.itertuples(index=False)
    ]
