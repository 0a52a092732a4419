"""
Full-batch gradient descent training of the gain predictor, and running the
filter with predicted gains.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.ecbf_config import FLOAT_FORMAT, LOSS_COLUMNS
from src.manipulator.model import ConfigurationError
from src.predictor.mlp import MlpModel, forward, gradients, init_model, normalize_inputs, normalized_targets
from src.search.dataset import DatasetRow
from src.simulation.engine import RunResult, simulate
from src.simulation.scenario import Scenario

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    """
    Gradient descent settings. The step uses the loss averaged over rows, so the
    learning rate does not depend on the dataset size. patience=0 disables
    early stopping.
    """

    learning_rate: float = 0.05
    epochs: int = 5000
    seed: int = 0
    patience: int = 0
    min_delta: float = 0.0
    hidden_layers: Tuple[int, ...] = (16, 16)
    kappa_max: float = 100.0
    log_every: int = 500

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be at least 1, got {self.epochs}")
        if self.patience < 0:
            raise ConfigurationError(f"patience must be non-negative, got {self.patience}")
        if not self.kappa_max > 0:
            raise ConfigurationError(f"kappa_max must be positive, got {self.kappa_max}")
        if any(width < 1 for width in self.hidden_layers):
            raise ConfigurationError(f"Hidden layer widths must be positive, got {self.hidden_layers}")

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (1,) + tuple(self.hidden_layers) + (2,)


def dataset_arrays(rows: Sequence[DatasetRow]) -> Tuple[np.ndarray, np.ndarray]:
    """(N,) radii and (N, 2) raw kappa targets."""
    if not rows:
        raise ConfigurationError("Training dataset is empty")
    r_o = np.array([row.r_o for row in rows], dtype=float)
    kappas = np.array([[row.kappa1, row.kappa2] for row in rows], dtype=float)
    return r_o, kappas


def train(rows: Sequence[DatasetRow], config: TrainConfig = TrainConfig(),
          model: Optional[MlpModel] = None) -> MlpModel:
    """
    Fit the predictor to a dataset.

    Args:
        rows: Dataset rows
        config: Training settings
        model: Starting model; a seeded fresh one by default

    Returns:
        MlpModel: Weights with the lowest recorded loss; loss_curve holds the
        per-epoch loss

    Raises:
        TrainingDivergedError: If the loss becomes non-finite
    """
    r_o, kappas = dataset_arrays(rows)
    if model is None:
        model = init_model(config.layer_sizes, (float(r_o.min()), float(r_o.max())), config.kappa_max, config.seed)
    x = normalize_inputs(model, r_o, warn=False)
    targets = normalized_targets(kappas, model.kappa_max)
    n_rows = len(rows)

    best = model.copy()
    best_loss = np.inf
    best_epoch = 0
    curve: List[float] = []
    stale = 0

    for epoch in range(1, config.epochs + 1):
        value, grad_w, grad_b = gradients(model, x, targets)
        if not np.isfinite(value):
            raise TrainingDivergedError(
                f"Loss became {value} at epoch {epoch}; lower the learning rate (now {config.learning_rate})"
            )
        curve.append(value)

        if value < best_loss - config.min_delta:
            best_loss = value
            best_epoch = epoch
            best = model.copy()
            stale = 0
        else:
            stale += 1
            if config.patience and stale >= config.patience:
                logger.info(f"Early stop at epoch {epoch}, no improvement for {config.patience} epochs")
                break

        if config.log_every and epoch % config.log_every == 0:
            logger.info(f"Epoch {epoch}: loss={value:.6f}")

        step = config.learning_rate / n_rows
        for i in range(len(model.weights)):
            model.weights[i] -= step * grad_w[i]
            model.biases[i] -= step * grad_b[i]

    best.metadata = {
        "seed": config.seed,
        "epochs": len(curve),
        "learning_rate": config.learning_rate,
        "best_epoch": best_epoch,
        "final_loss": curve[-1],
        "best_loss": best_loss,
        "rows": n_rows
    }
    best.loss_curve = curve
    logger.info(f"Training finished: best loss {best_loss:.6f} at epoch {best_epoch} of {len(curve)}")
    return best


def write_loss_curve(model: MlpModel, path: str) -> str:
    """Write the per-epoch loss as CSV."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame = pd.DataFrame({LOSS_COLUMNS[0]: np.arange(1, len(model.loss_curve) + 1),
                          LOSS_COLUMNS[1]: model.loss_curve})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def predict_and_filter(model: MlpModel, r_o: float, base_scenario: Scenario) -> RunResult:
    """
    Run the filtered simulation with gains predicted for r_o.

    Args:
        model: Trained predictor
        r_o: Obstacle radius (m)
        base_scenario: Scenario the run is derived from

    Returns:
        RunResult: Result of the simulation with the predicted gains
    """
    kappa1, kappa2 = forward(model, r_o)
    logger.info(f"Predicted kappa1={kappa1:.4f} kappa2={kappa2:.4f} for r_o={r_o}")
    return simulate(base_scenario.with_radius(r_o).with_params(kappa1, kappa2))
