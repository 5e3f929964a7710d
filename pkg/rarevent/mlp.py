"""
Small fully-connected regression network, used as a data-driven low-fidelity model.

Hidden layers use `tanh`, the output layer is linear. Training is full-batch gradient
descent on the mean-squared error plus an L2 penalty on the weights (not the biases).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict
from dataclasses import dataclass
from typing import TYPE_CHECKING
from typing import Any

import numpy as np

from rarevent._numerics.scaling import Standardizer
from rarevent.exceptions import InvalidParameterError
from rarevent.exceptions import TrainingError
from rarevent.utils import as_matrix
from rarevent.utils import as_vector
from rarevent.utils import require_count
from rarevent.utils import require_positive

if TYPE_CHECKING:
    from typing_extensions import Self

    from rarevent.typing import FloatArray

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlpConfig:
    hidden_layers: int = 3
    neurons_per_layer: int = 20
    l2_lambda: float = 1e-3
    learning_rate: float = 0.002
    epochs: int = 5000
    seed: int = 0

    def __post_init__(self) -> None:
        require_count(self.hidden_layers, "hidden_layers")
        require_count(self.neurons_per_layer, "neurons_per_layer")
        require_count(self.epochs, "epochs")
        require_positive(self.learning_rate, "learning_rate")
        require_positive(self.l2_lambda, "l2_lambda", strict=False)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def init_parameters(
    sizes: list[int], rng: np.random.Generator
) -> tuple[list[FloatArray], list[FloatArray]]:
    """Glorot-uniform weights and zero biases for consecutive layer `sizes`."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(
    weights: list[FloatArray], biases: list[FloatArray], X: FloatArray
) -> tuple[FloatArray, list[FloatArray]]:
    """Network output for standardized inputs, plus the activations of every layer."""
    activations = [X]
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.tanh(h @ W + b)
        activations.append(h)
    out = h @ weights[-1] + biases[-1]
    return out[:, 0], activations


def loss_and_gradients(
    weights: list[FloatArray],
    biases: list[FloatArray],
    X: FloatArray,
    y: FloatArray,
    l2_lambda: float,
) -> tuple[float, list[FloatArray], list[FloatArray]]:
    """
    Regularized mean-squared error and its back-propagated gradients.

    Arguments:
        weights: Layer weight matrices, shape `(fan_in, fan_out)` each.
        biases: Layer bias vectors.
        X: Standardized inputs, shape `(n, D)`.
        y: Standardized targets, shape `(n,)`.
        l2_lambda: Weight of `sum(||W||^2)` in the loss.

    Returns:
        The loss, the weight gradients and the bias gradients.
    """
    out, activations = forward(weights, biases, X)
    n = X.shape[0]
    resid = out - y
    penalty = sum(float(np.sum(W * W)) for W in weights)
    loss = float(np.mean(resid**2)) + l2_lambda * penalty

    grad_w: list[FloatArray] = [np.empty(0)] * len(weights)
    grad_b: list[FloatArray] = [np.empty(0)] * len(biases)
    delta = (2.0 / n) * resid[:, None]
    for layer in range(len(weights) - 1, -1, -1):
        a = activations[layer]
        grad_w[layer] = a.T @ delta + 2.0 * l2_lambda * weights[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ weights[layer].T) * (1.0 - a * a)
    return loss, grad_w, grad_b


class MlpModel:
    def __init__(
        self,
        weights: list[FloatArray],
        biases: list[FloatArray],
        *,
        x_scaler: Standardizer,
        y_scaler: Standardizer,
        losses: list[float] | None = None,
        config: MlpConfig | None = None,
    ) -> None:
        if len(weights) != len(biases) or not weights:
            msg = "Expected one bias vector per weight matrix"
            raise InvalidParameterError(msg)
        self._weights = [np.asarray(W, dtype=np.float64) for W in weights]
        self._biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self._x_scaler = x_scaler
        self._y_scaler = y_scaler
        self._losses = list(losses or [])
        self._config = config

    def __repr__(self) -> str:
        sizes = [W.shape[0] for W in self._weights] + [self._weights[-1].shape[1]]
        return f"MlpModel(sizes={sizes})"

    @property
    def dimension(self) -> int:
        return int(self._weights[0].shape[0])

    @property
    def weights(self) -> list[FloatArray]:
        return [W.copy() for W in self._weights]

    @property
    def biases(self) -> list[FloatArray]:
        return [b.copy() for b in self._biases]

    @property
    def losses(self) -> list[float]:
        return list(self._losses)

    @property
    def final_loss(self) -> float:
        return self._losses[-1] if self._losses else math.nan

    @property
    def output_scale(self) -> tuple[float, float]:
        """Mean and spread that map raw network output back to target units."""
        return float(self._y_scaler.mean[0]), float(self._y_scaler.spread[0])

    def weight_norm(self) -> float:
        return sum(float(np.sum(W * W)) for W in self._weights)

    def predict(self, x: Any) -> float:
        vec = as_vector(x, dimension=self.dimension)
        return float(self.predict_many(vec[None, :])[0])

    def predict_many(self, X: Any) -> FloatArray:
        Xs = self._x_scaler.transform(as_matrix(X, dimension=self.dimension))
        out, _ = forward(self._weights, self._biases, Xs)
        mean, spread = self.output_scale
        return mean + spread * out  # type: ignore[no-any-return]

    def to_dict(self) -> dict[str, Any]:
        return {
            "weights": [W.tolist() for W in self._weights],
            "biases": [b.tolist() for b in self._biases],
            "x_scaler": self._x_scaler.to_dict(),
            "y_scaler": self._y_scaler.to_dict(),
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(
            [np.asarray(W, dtype=np.float64) for W in data["weights"]],
            [np.asarray(b, dtype=np.float64) for b in data["biases"]],
            x_scaler=Standardizer.from_dict(data["x_scaler"]),
            y_scaler=Standardizer.from_dict(data["y_scaler"]),
            losses=[data["final_loss"]],
        )


def train(X: Any, y: Any, config: MlpConfig | None = None) -> MlpModel:
    """
    Train a network on `(X, y)` by full-batch gradient descent.

    Arguments:
        X: Inputs, shape `(n, D)`.
        y: Targets, shape `(n,)`.
        config: Architecture and optimizer settings; defaults to `MlpConfig()`.

    Returns:
        The trained model. `losses` holds the loss evaluated before every update.

    Raises:
        TrainingError: if the loss becomes non-finite.
    """
    config = config or MlpConfig()
    X = as_matrix(X)
    y = as_vector(y, dimension=X.shape[0], name="y")
    if X.shape[0] < 1:
        msg = "Cannot train on an empty data set"
        raise InvalidParameterError(msg)
    x_scaler = Standardizer.fit(X)
    y_scaler = Standardizer.fit(y, collapse_constant=True)
    Xs = x_scaler.transform(X)
    ys = (y - y_scaler.mean[0]) / y_scaler.divisor[0]

    sizes = [X.shape[1]] + [config.neurons_per_layer] * config.hidden_layers + [1]
    weights, biases = init_parameters(sizes, np.random.default_rng(config.seed))
    losses: list[float] = []
    lr = config.learning_rate
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            loss, grad_w, grad_b = loss_and_gradients(
                weights, biases, Xs, ys, config.l2_lambda
            )
            if not math.isfinite(loss):
                msg = f"Training diverged at epoch {epoch} (loss {loss})"
                raise TrainingError(msg, epoch=epoch)
            losses.append(loss)
            weights = [W - lr * g for W, g in zip(weights, grad_w)]
            biases = [b - lr * g for b, g in zip(biases, grad_b)]
    _logger.debug("Trained MLP %s, final loss %.3e", sizes, losses[-1])
    return MlpModel(
        weights,
        biases,
        x_scaler=x_scaler,
        y_scaler=y_scaler,
        losses=losses,
        config=config,
    )


def predict(model: MlpModel, x: Any) -> float:
    return model.predict(x)


__all__ = [
    "MlpConfig",
    "MlpModel",
    "loss_and_gradients",
    "predict",
    "train",
]
