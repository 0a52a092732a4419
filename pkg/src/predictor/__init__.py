"""
Predictor Package

Neural network predicting ECBF gains from the obstacle radius.
"""

from .mlp import (
    MlpModel,
    cross_entropy,
    entropy_floor,
    forward,
    gradients,
    init_model,
    load_model,
    loss,
    save_model
)
from .training import TrainConfig, TrainingDivergedError, predict_and_filter, train, write_loss_curve

__all__ = [
    'MlpModel', 'cross_entropy', 'entropy_floor', 'forward', 'gradients', 'init_model',
    'load_model', 'loss', 'save_model',
    'TrainConfig', 'TrainingDivergedError', 'predict_and_filter', 'train', 'write_loss_curve'
]
