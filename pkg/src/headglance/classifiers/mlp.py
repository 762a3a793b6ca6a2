"""Multilayer perceptron: 3 inputs, one logistic hidden layer, softmax output.

Trained by seeded mini-batch gradient descent on cross-entropy. The
forward/gradient math lives in pure functions over a parameter dict so
gradients can be checked against finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import TrainingError
from ..seeds import substream


@dataclass(frozen=True)
class MlpParams:
    hidden_units: int = 16
    batch_size: int = 32
    learning_rate: float = 0.05
    epochs: int = 200
    init_scale: float = 0.5  # weights drawn uniform(-scale, +scale)


def init_params(params: MlpParams, n_inputs: int, n_outputs: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    s = params.init_scale
    return {
        "w1": rng.uniform(-s, s, size=(n_inputs, params.hidden_units)),
        "b1": np.zeros(params.hidden_units),
        "w2": rng.uniform(-s, s, size=(params.hidden_units, n_outputs)),
        "b2": np.zeros(n_outputs),
    }


def forward(weights: dict[str, np.ndarray], x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (hidden activations, softmax probabilities)."""
    h = expit(x @ weights["w1"] + weights["b1"])
    logits = h @ weights["w2"] + weights["b2"]
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return h, e / e.sum(axis=1, keepdims=True)


def cross_entropy(weights: dict[str, np.ndarray], x: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-probability of the true labels."""
    _, probs = forward(weights, x)
    p = probs[np.arange(len(y)), y]
    return float(-np.log(np.clip(p, 1e-300, None)).mean())


def gradients(weights: dict[str, np.ndarray], x: np.ndarray, y: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients of the mean cross-entropy wrt every parameter."""
    n = len(x)
    h, probs = forward(weights, x)
    delta_out = probs.copy()
    delta_out[np.arange(n), y] -= 1.0
    delta_out /= n
    delta_hidden = (delta_out @ weights["w2"].T) * h * (1.0 - h)
    return {
        "w2": h.T @ delta_out,
        "b2": delta_out.sum(axis=0),
        "w1": x.T @ delta_hidden,
        "b1": delta_hidden.sum(axis=0),
    }


@dataclass
class MlpModel:
    weights: dict[str, np.ndarray]
    params: MlpParams
    seed: int
    loss_trace: list[float]

    def as_dict(self) -> dict:
        return {
            "kind": "mlp",
            "version": 1,
            "seed": self.seed,
            "params": self.params.__dict__,
            "weights": {k: v.tolist() for k, v in self.weights.items()},
            "loss_trace": self.loss_trace,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpModel":
        return cls(
            {k: np.asarray(v, dtype=float) for k, v in doc["weights"].items()},
            MlpParams(**doc["params"]),
            int(doc["seed"]),
            list(doc.get("loss_trace", [])),
        )


def mlp_train(
    train_x: np.ndarray,
    train_y: np.ndarray,
    params: MlpParams = MlpParams(),
    seed: int = 0,
    n_outputs: int = 2,
) -> MlpModel:
    """Mini-batch gradient descent; epoch shuffles are seeded per epoch.

    Raises TrainingError when the loss diverges to a non-finite value
    (the usual fix is a lower learning rate).
    """
    x = np.asarray(train_x, dtype=float)
    y = np.asarray(train_y, dtype=np.int64)
    weights = init_params(params, x.shape[1], n_outputs, substream(seed, "mlp-init"))
    trace: list[float] = []
    rate = params.learning_rate
    for epoch in range(params.epochs):
        order = substream(seed, "mlp-epoch", epoch).permutation(len(x))
        for start in range(0, len(x), params.batch_size):
            batch = order[start : start + params.batch_size]
            grads = gradients(weights, x[batch], y[batch])
            for key in weights:
                weights[key] -= rate * grads[key]
        loss = cross_entropy(weights, x, y)
        if not np.isfinite(loss):
            raise TrainingError(
                f"MLP training diverged at epoch {epoch}; try a lower learning rate than {rate}"
            )
        trace.append(loss)
    return MlpModel(weights, params, seed, trace)


def mlp_classify_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    _, probs = forward(model.weights, np.atleast_2d(np.asarray(x, dtype=float)))
    return probs.argmax(axis=1)


def mlp_classify(model: MlpModel, x: np.ndarray) -> int:
    return int(mlp_classify_batch(model, x)[0])
