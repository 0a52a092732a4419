"""
Multilayer perceptron mapping obstacle radius to ECBF gains.

Hidden layers use tanh. The output layer uses the logistic function written as
(tanh(y/2) + 1) / 2 so outputs live in (0, 1) where the cross-entropy loss is
defined; outputs are scaled by kappa_max to give (kappa1, kappa2).
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from src.manipulator.model import ConfigurationError

logger = logging.getLogger(__name__)

CLIP_EPS = 1e-6
DEFAULT_LAYERS = (1, 16, 16, 2)


def logistic(y: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * y) + 1.0)


@dataclass(eq=False)
class MlpModel:
    """Layer sizes, weights (fan_in x fan_out), biases and the input/output scaling."""

    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    input_scale: Tuple[float, float] = (0.0, 1.0)
    kappa_max: float = 100.0
    metadata: Dict[str, Any] = field(default_factory=dict)
    loss_curve: List[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float).reshape(-1) for b in self.biases]
        self.input_scale = (float(self.input_scale[0]), float(self.input_scale[1]))
        self.validate()

    def validate(self) -> None:
        sizes = self.layer_sizes
        if len(sizes) < 2 or sizes[0] != 1 or sizes[-1] != 2:
            raise ConfigurationError(f"Layer sizes must start at 1 and end at 2, got {sizes}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ConfigurationError("One weight matrix and bias vector per layer transition expected")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ConfigurationError(
                    f"Layer {i + 1} has weights {w.shape} and bias {b.shape}, "
                    f"expected ({sizes[i]}, {sizes[i + 1]}) and ({sizes[i + 1]},)"
                )
        if not self.kappa_max > 0:
            raise ConfigurationError(f"kappa_max must be positive, got {self.kappa_max}")
        if self.input_scale[1] < self.input_scale[0]:
            raise ConfigurationError(f"Invalid input range {self.input_scale}")

    def copy(self) -> "MlpModel":
        return MlpModel(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.input_scale, self.kappa_max, dict(self.metadata))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "input_scale": list(self.input_scale),
            "output_scale": self.kappa_max,
            "metadata": self.metadata
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MlpModel":
        for key in ("layer_sizes", "weights", "biases", "input_scale", "output_scale"):
            if key not in data:
                raise ConfigurationError(f"Model file lacks '{key}'")
        return cls(
            layer_sizes=tuple(data["layer_sizes"]),
            weights=[np.array(w, dtype=float) for w in data["weights"]],
            biases=[np.array(b, dtype=float) for b in data["biases"]],
            input_scale=tuple(data["input_scale"]),
            kappa_max=float(data["output_scale"]),
            metadata=data.get("metadata", {})
        )


def init_model(layer_sizes: Sequence[int] = DEFAULT_LAYERS, input_scale: Tuple[float, float] = (0.0, 1.0),
               kappa_max: float = 100.0, seed: int = 0) -> MlpModel:
    """Weights and biases drawn uniformly from +-1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpModel(tuple(layer_sizes), weights, biases, input_scale, kappa_max)


def normalize_inputs(model: MlpModel, r_o, warn: bool = True) -> np.ndarray:
    """
    Map radii to [-1, 1] using the training range, clamping outside it.

    Returns:
        np.ndarray: (N, 1) network inputs
    """
    r = np.atleast_1d(np.asarray(r_o, dtype=float))
    lo, hi = model.input_scale
    outside = (r < lo) | (r > hi)
    if warn and np.any(outside):
        logger.warning(f"r_o {r[outside].tolist()} outside the trained range [{lo}, {hi}]; clamping")
    r = np.clip(r, lo, hi)
    span = hi - lo
    x = np.zeros_like(r) if span == 0 else 2.0 * (r - lo) / span - 1.0
    return x.reshape(-1, 1)


def forward_pass(model: MlpModel, x: np.ndarray) -> List[np.ndarray]:
    """
    Activations of every layer for inputs x of shape (N, 1).

    The last entry is the logistic output in (0, 1); earlier entries are the
    input followed by the tanh hidden activations.
    """
    activations = [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        y = a @ w + b
        a = logistic(y) if i == last else np.tanh(y)
        activations.append(a)
    return activations


def predict_normalized(model: MlpModel, r_o, warn: bool = True) -> np.ndarray:
    """(N, 2) network outputs in (0, 1)."""
    return forward_pass(model, normalize_inputs(model, r_o, warn=warn))[-1]


def forward(model: MlpModel, r_o: float) -> Tuple[float, float]:
    """
    Predicted gains for one obstacle radius.

    Args:
        model: Trained model
        r_o: Obstacle radius (m); clamped to the trained range with a warning

    Returns:
        tuple: (kappa1_hat, kappa2_hat), both in (0, kappa_max]
    """
    out = np.clip(predict_normalized(model, r_o)[0], CLIP_EPS, 1.0)
    return float(model.kappa_max * out[0]), float(model.kappa_max * out[1])


def normalized_targets(kappas: np.ndarray, kappa_max: float) -> np.ndarray:
    return np.clip(np.asarray(kappas, dtype=float) / kappa_max, CLIP_EPS, 1.0 - CLIP_EPS)


def cross_entropy(outputs: np.ndarray, targets: np.ndarray) -> float:
    """Summed binary cross-entropy of clipped outputs against normalized targets."""
    p = np.clip(outputs, CLIP_EPS, 1.0 - CLIP_EPS)
    return float(np.sum(-targets * np.log(p) - (1.0 - targets) * np.log(1.0 - p)))


def entropy_floor(targets: np.ndarray) -> float:
    """Smallest reachable loss: the binary entropy of the targets."""
    return cross_entropy(targets, targets)


def loss(model: MlpModel, r_o, kappas) -> float:
    """
    Cross-entropy loss of the model over a dataset.

    Args:
        model: Model
        r_o: (N,) radii
        kappas: (N, 2) raw kappa targets, normalized by kappa_max here

    Returns:
        float: J summed over rows and both outputs
    """
    targets = normalized_targets(kappas, model.kappa_max)
    return cross_entropy(predict_normalized(model, r_o, warn=False), targets)


def gradients(model: MlpModel, x: np.ndarray, targets: np.ndarray) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """
    Loss and its gradients by backpropagation.

    Args:
        model: Model
        x: (N, 1) normalized inputs
        targets: (N, 2) normalized targets

    Returns:
        tuple: (J, weight gradients, bias gradients)
    """
    activations = forward_pass(model, x)
    output = activations[-1]
    # logistic output + cross-entropy: dJ/dy = p - t, zero where the output is clipped
    inside = (output > CLIP_EPS) & (output < 1.0 - CLIP_EPS)
    delta = np.where(inside, output - targets, 0.0)

    grad_w: List[np.ndarray] = [None] * len(model.weights)
    grad_b: List[np.ndarray] = [None] * len(model.biases)
    for i in reversed(range(len(model.weights))):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = np.sum(delta, axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (1.0 - activations[i] ** 2)
    return cross_entropy(output, targets), grad_w, grad_b


def save_model(model: MlpModel, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(model.to_dict(), f, indent=2)
    logger.info(f"Saved model to {path}")
    return path


def load_model(path: str) -> MlpModel:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Model file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Model file {path} is not valid JSON: {e}")
    return MlpModel.from_dict(data)
