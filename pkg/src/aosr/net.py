"""Small fully-connected softmax classifier with a from-scratch trainer.

Hidden layers use the rectifier, the output is a softmax over K classes,
and the per-sample loss is weighted cross-entropy with the target
probability clamped at 1e-12 (so a single loss value never exceeds
~27.6 times its weight). The trainer minimizes the *sum* of weighted
per-sample losses with mini-batch gradient steps; callers encode any
1/n style averaging into the sample weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import Divergence, InvalidArgument, ParseError
from .rng import Rng

PROB_CLAMP = 1e-12
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class MlpModel:
    """Value-semantic MLP: layer dims plus per-layer weights and biases.

    weights[i] has shape (dims[i], dims[i+1]); biases[i] has shape
    (dims[i+1],). Instances copy their parameters on construction and are
    safe to share across threads.
    """

    dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise InvalidArgument(f"dims must be >= 2 positive integers, got {dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise InvalidArgument("need one weight matrix and bias per layer")
        ws, bs = [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64)
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise InvalidArgument(
                    f"layer {i}: expected shapes {(dims[i], dims[i + 1])} and "
                    f"({dims[i + 1]},), got {w.shape} and {b.shape}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidArgument(f"layer {i}: non-finite parameters")
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    @property
    def num_hidden(self) -> int:
        return len(self.dims) - 2


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # "adam" | "sgd"
    seed: int = 0
    clip_norm: float = 10.0

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidArgument(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidArgument(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise InvalidArgument("learning_rate must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidArgument(f"unknown optimizer {self.optimizer!r}")
        if self.clip_norm <= 0:
            raise InvalidArgument("clip_norm must be > 0")


def mlp_init(dims: Sequence[int], rng: Rng) -> MlpModel:
    """Fan-in scaled Gaussian weights (variance 2/fan_in), zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InvalidArgument(f"dims must be >= 2 positive integers, got {dims}")
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        ws.append(math.sqrt(2.0 / fan_in) * rng.standard_normal((fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return MlpModel(dims, tuple(ws), tuple(bs))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_full(weights, biases, x: np.ndarray):
    """All post-activation layer outputs for a batch; last entry is softmax."""
    acts = [x]
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
        acts.append(a)
    acts.append(_softmax(a @ weights[-1] + biases[-1]))
    return acts


def _as_batch(model_dim: int, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model_dim:
        raise InvalidArgument(
            f"input has {x.shape[1]} features, model expects {model_dim}"
        )
    return x, single


def forward(model: MlpModel, x) -> np.ndarray:
    """Class probabilities for one input vector or a batch of rows."""
    xb, single = _as_batch(model.input_dim, x)
    probs = _forward_full(model.weights, model.biases, xb)[-1]
    return probs[0] if single else probs


def encode(model: MlpModel, x) -> np.ndarray:
    """Post-activation output of the last hidden layer."""
    if model.num_hidden < 1:
        raise InvalidArgument("model has no hidden layer to encode with")
    xb, single = _as_batch(model.input_dim, x)
    a = xb
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
    return a[0] if single else a


def predict(model: MlpModel, x) -> int | np.ndarray:
    """Argmax class with lowest-index tie-break."""
    probs = forward(model, x)
    if probs.ndim == 1:
        return int(np.argmax(probs))
    return np.argmax(probs, axis=1)


def weighted_cross_entropy(probs: np.ndarray, target: int, weight: float) -> float:
    """weight * -log(max(p_target, 1e-12))."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise InvalidArgument("probs must be a single probability vector")
    if not 0 <= target < probs.shape[0]:
        raise InvalidArgument(f"target {target} out of range for {probs.shape[0]} classes")
    if weight < 0:
        raise InvalidArgument("weight must be >= 0")
    return float(weight * -math.log(max(probs[target], PROB_CLAMP)))


def _batch_losses(probs: np.ndarray, targets: np.ndarray, weights: np.ndarray):
    p_target = probs[np.arange(probs.shape[0]), targets]
    return weights * -np.log(np.maximum(p_target, PROB_CLAMP))


def total_loss(weights, biases, x: np.ndarray, targets: np.ndarray,
               sample_weights: np.ndarray) -> float:
    """Sum of weighted per-sample losses, forward pass only."""
    probs = _forward_full(weights, biases, x)[-1]
    return float(_batch_losses(probs, targets, sample_weights).sum())


def loss_and_gradients(weights, biases, x: np.ndarray, targets: np.ndarray,
                       sample_weights: np.ndarray):
    """Total weighted loss over the batch and its parameter gradients."""
    acts = _forward_full(weights, biases, x)
    probs = acts[-1]
    n = x.shape[0]
    idx = np.arange(n)
    losses = _batch_losses(probs, targets, sample_weights)

    # exact softmax cross-entropy derivative; the value clamp is ignored here
    # so fully saturated samples keep a recovery signal
    dlogits = probs.copy()
    dlogits[idx, targets] -= 1.0
    dlogits *= sample_weights[:, None]

    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    delta = dlogits
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (acts[layer] > 0.0)
    return float(losses.sum()), grad_w, grad_b


def _clip_gradients(grads_flat: list[np.ndarray], clip_norm: float) -> None:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads_flat))
    if total > clip_norm:
        scale = clip_norm / total
        for g in grads_flat:
            g *= scale


@dataclass(frozen=True)
class TrainResult:
    model: MlpModel
    loss_trace: tuple[float, ...]


def train(
    model: MlpModel,
    features: np.ndarray,
    targets: np.ndarray,
    sample_weights: np.ndarray,
    config: TrainConfig,
    weight_schedule: Callable[[MlpModel, int], np.ndarray] | None = None,
) -> TrainResult:
    """Mini-batch training of the summed weighted cross-entropy objective.

    Shuffling, batching, and parameter updates are fully determined by
    config.seed. `weight_schedule`, when given, is called at the start of
    every epoch with (current model, epoch index) and must return the
    sample-weight vector to use for that epoch. The loss trace records the
    full-data objective at the end of each epoch under that epoch's
    weights.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    sample_weights = np.asarray(sample_weights, dtype=np.float64)
    n = features.shape[0]
    if n == 0:
        raise InvalidArgument("training set must be nonempty")
    if features.ndim != 2 or features.shape[1] != model.input_dim:
        raise InvalidArgument("feature matrix does not match model input dim")
    if targets.shape != (n,) or sample_weights.shape != (n,):
        raise InvalidArgument("targets and sample_weights must have one entry per row")
    if targets.min() < 0 or targets.max() >= model.output_dim:
        raise InvalidArgument("targets out of range for model output width")

    ws = [w.copy() for w in model.weights]
    bs = [b.copy() for b in model.biases]
    rng = Rng(config.seed)
    lr = config.learning_rate

    if config.optimizer == "adam":
        m_w = [np.zeros_like(w) for w in ws]
        v_w = [np.zeros_like(w) for w in ws]
        m_b = [np.zeros_like(b) for b in bs]
        v_b = [np.zeros_like(b) for b in bs]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0

    trace = []
    weights_now = sample_weights
    for epoch in range(config.epochs):
        if weight_schedule is not None:
            current = MlpModel(model.dims, tuple(ws), tuple(bs))
            weights_now = np.asarray(
                weight_schedule(current, epoch), dtype=np.float64
            )
            if weights_now.shape != (n,):
                raise InvalidArgument("weight_schedule returned wrong-length vector")

        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            scale = n / batch.size
            loss, gw, gb = loss_and_gradients(
                ws, bs, features[batch], targets[batch], weights_now[batch]
            )
            if not math.isfinite(loss):
                raise Divergence("non-finite loss", epoch)
            flat = gw + gb
            for g in flat:
                g *= scale
                if not np.all(np.isfinite(g)):
                    raise Divergence("non-finite gradient", epoch)
            _clip_gradients(flat, config.clip_norm)

            if config.optimizer == "sgd":
                for w, g in zip(ws, gw):
                    w -= lr * g
                for b, g in zip(bs, gb):
                    b -= lr * g
            else:
                step += 1
                correction1 = 1.0 - beta1**step
                correction2 = 1.0 - beta2**step
                for params, grads, ms, vs in (
                    (ws, gw, m_w, v_w),
                    (bs, gb, m_b, v_b),
                ):
                    for p, g, m, v in zip(params, grads, ms, vs):
                        m *= beta1
                        m += (1.0 - beta1) * g
                        v *= beta2
                        v += (1.0 - beta2) * g * g
                        p -= lr * (m / correction1) / (
                            np.sqrt(v / correction2) + eps
                        )

        epoch_loss = total_loss(ws, bs, features, targets, weights_now)
        if not math.isfinite(epoch_loss):
            raise Divergence("non-finite loss", epoch)
        trace.append(epoch_loss)

    return TrainResult(MlpModel(model.dims, tuple(ws), tuple(bs)), tuple(trace))


# -- serialization ---------------------------------------------------------


def model_to_dict(model: MlpModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "dims": list(model.dims),
        "activation": "relu",
        "layers": [
            {"w": w.tolist(), "b": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
    }


def model_from_dict(obj: dict) -> MlpModel:
    try:
        version = obj["version"]
        if version != MODEL_FORMAT_VERSION:
            raise ParseError(f"unsupported model version {version!r}")
        if obj["activation"] != "relu":
            raise ParseError(f"unsupported activation {obj['activation']!r}")
        dims = tuple(obj["dims"])
        layers = obj["layers"]
        ws = tuple(np.array(layer["w"], dtype=np.float64) for layer in layers)
        bs = tuple(np.array(layer["b"], dtype=np.float64) for layer in layers)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed model object: {exc}") from exc
    try:
        return MlpModel(dims, ws, bs)
    except InvalidArgument as exc:
        raise ParseError(f"inconsistent model parameters: {exc}") from exc


def save_model(model: MlpModel, path: str) -> None:
    from .dataio import atomic_write_text

    atomic_write_text(path, json.dumps(model_to_dict(model)) + "\n")


def load_model(path: str) -> MlpModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    return model_from_dict(obj)
