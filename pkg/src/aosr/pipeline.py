"""End-to-end open-set training: encode, generate, weigh, reweight, train.

The run proceeds in five stages: (1) train a closed-set classifier on S
and keep its last hidden layer as an encoder, (2) re-encode S and draw
uniform auxiliary samples T over a padded bounding box of the input
features, pushing them through the same encoder, (3) estimate known-ness
weights for encoded T against encoded S, (4) pick the threshold tau from
the weights, (5) train a fresh (C+1)-way head on encoded S plus encoded
T with the unknown term scaled by the mu schedule. A single seed in the
config determines every stage.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, replace

import numpy as np

from . import net
from .dataio import Box, Dataset, bounding_box
from .errors import InvalidArgument, NumericalFailure
from .net import MlpModel, TrainConfig
from .ratio import (
    iforest_fit,
    kulsif_fit,
    median_bandwidth,
    ratio_predict,
    weights_from_iforest,
)
from .reweight import (
    WeightParams,
    estimate_u_zero_mass,
    l_minus_transform,
    mu_schedule,
    select_tau,
)
from .rng import Rng

WEIGHT_METHODS = ("iforest", "kulsif")


@dataclass(frozen=True)
class AosrConfig:
    """Knobs for one full open-set training run."""

    closed_train: TrainConfig = TrainConfig()
    open_train: TrainConfig = TrainConfig()
    aux_multiple: int = 3
    box_margin: float = 0.2
    weight_method: str = "iforest"
    beta: float = 0.05
    t: float = 0.10
    recompute_mu: bool = True
    kulsif_lambda: float = 1e-2
    hidden_width: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.aux_multiple < 1:
            raise InvalidArgument("aux_multiple must be >= 1")
        if self.box_margin < 0:
            raise InvalidArgument("box_margin must be >= 0")
        if self.weight_method not in WEIGHT_METHODS:
            raise InvalidArgument(
                f"weight_method must be one of {WEIGHT_METHODS}"
            )
        if self.beta <= 0:
            raise InvalidArgument("beta must be > 0")
        if not 0.0 < self.t < 1.0:
            raise InvalidArgument("t must be in (0, 1)")
        if self.kulsif_lambda <= 0:
            raise InvalidArgument("kulsif_lambda must be > 0")
        if self.hidden_width < 1:
            raise InvalidArgument("hidden_width must be >= 1")


@dataclass(frozen=True)
class AosrModel:
    """Encoder plus open-set head, with the weighting used to train it."""

    closed: MlpModel
    open: MlpModel
    weight_params: WeightParams
    box: Box

    def __post_init__(self):
        if self.closed.num_hidden < 1:
            raise InvalidArgument("closed model needs a hidden layer to encode")
        if self.open.input_dim != self.closed.dims[-2]:
            raise InvalidArgument(
                "open model input dim must equal the encoder's penultimate width"
            )

    @property
    def num_known_classes(self) -> int:
        return self.open.output_dim - 1


@contextmanager
def _stage(name: str):
    """Prefix pipeline-stage names onto raised error messages."""
    try:
        yield
    except (InvalidArgument, NumericalFailure) as exc:
        exc.args = (f"{name}: {exc.args[0] if exc.args else exc!r}",)
        raise


@dataclass(frozen=True)
class PretrainResult:
    model: MlpModel
    train_accuracy: float
    loss_trace: tuple[float, ...]


def pretrain_closed(config: AosrConfig, s: Dataset) -> PretrainResult:
    """Stage 1: closed-set classifier whose hidden stack becomes the encoder."""
    s.require_known_only()
    c = s.num_known_classes
    dims = [s.dim, config.hidden_width, config.hidden_width, c]
    rng = Rng(config.seed)
    model = net.mlp_init(dims, rng.derive("closed-init"))
    train_cfg = replace(config.closed_train, seed=rng.derive("closed-train").seed)
    result = net.train(
        model,
        s.features,
        s.labels,
        np.full(s.n, 1.0 / s.n),
        train_cfg,
    )
    preds = net.predict(result.model, s.features)
    accuracy = float(np.mean(preds == s.labels))
    return PretrainResult(result.model, accuracy, result.loss_trace)


def encode_dataset(closed: MlpModel, s: Dataset) -> Dataset:
    """Stage 2a: replace features with last-hidden-layer activations."""
    return Dataset(net.encode(closed, s.features), s.labels, s.num_known_classes)


def generate_aux(
    features: np.ndarray,
    multiple: int,
    margin: float,
    rng: Rng,
) -> tuple[np.ndarray, Box]:
    """Stage 2b: multiple*n uniform rows over the padded feature box.

    The pipeline samples in the network's input space and pushes the
    samples through the encoder afterwards; sampling the encoder-output
    box directly leaves the generated points far from the image of the
    input space, where they constrain nothing.
    """
    if multiple < 1:
        raise InvalidArgument("multiple must be >= 1")
    box = bounding_box(features, margin)
    m = multiple * features.shape[0]
    t = rng.uniform(0.0, 1.0, (m, box.dim)) * (box.upper - box.lower) + box.lower
    return t, box


def estimate_weights(
    method: str,
    s_features: np.ndarray,
    t_features: np.ndarray,
    rng: Rng,
    kulsif_lambda: float = 1e-2,
) -> np.ndarray:
    """Stage 3: known-ness weight per auxiliary row."""
    if method == "iforest":
        forest = iforest_fit(s_features, rng=rng)
        return weights_from_iforest(forest, t_features)
    if method == "kulsif":
        sigma = median_bandwidth(np.vstack([s_features, t_features]))
        model = kulsif_fit(s_features, t_features, kulsif_lambda, sigma)
        return ratio_predict(model, t_features)
    raise InvalidArgument(f"weight method must be one of {WEIGHT_METHODS}")


@dataclass(frozen=True)
class OpenTrainResult:
    model: MlpModel
    objective_trace: tuple[float, ...]
    mu_trace: tuple[float, ...]


def train_open(
    config: AosrConfig,
    encoded_s: Dataset,
    t_features: np.ndarray,
    weights: np.ndarray,
    tau: float,
    beta: float,
) -> OpenTrainResult:
    """Stage 5: (C+1)-way head on encoded S plus weighted auxiliary rows.

    Each S row carries weight 1/n toward its own label; each T row
    carries weight mu * Lminus(w)/m toward the unknown label. mu follows
    the schedule n*beta/(n'+1e-4) where n' counts how many of the
    combined training rows (S and T) the current model labels unknown,
    refreshed each epoch when configured (otherwise fixed from the
    initial model). Counting n' over S alone creates runaway feedback:
    once the model labels all of S known, n' sticks at 0 and mu jams at
    its cap, which flips the model to all-unknown. Counting T as well
    keeps the feedback negative, since a healthy model labels most of T
    unknown.
    """
    encoded_s.require_known_only()
    c = encoded_s.num_known_classes
    t_features = np.atleast_2d(np.asarray(t_features, dtype=np.float64))
    if t_features.shape[1] != encoded_s.dim:
        raise InvalidArgument("auxiliary rows do not match encoded feature dim")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (t_features.shape[0],):
        raise InvalidArgument("need one weight per auxiliary row")
    n, m = encoded_s.n, t_features.shape[0]

    rng = Rng(config.seed)
    open_model = net.mlp_init(
        [encoded_s.dim, config.hidden_width, config.hidden_width, c + 1],
        rng.derive("open-init"),
    )
    train_cfg = replace(config.open_train, seed=rng.derive("open-train").seed)

    all_features = np.vstack([encoded_s.features, t_features])
    all_targets = np.concatenate(
        [encoded_s.labels, np.full(m, c, dtype=np.int64)]
    )
    s_part = np.full(n, 1.0 / n)
    t_loss_weights = l_minus_transform(weights, tau, beta) / m

    mu_trace: list[float] = []

    def schedule(model: MlpModel, epoch: int) -> np.ndarray:
        if config.recompute_mu or epoch == 0:
            n_prime = int(np.sum(net.predict(model, all_features) == c))
            mu = mu_schedule(n, beta, n_prime)
        else:
            mu = mu_trace[-1]
        mu_trace.append(mu)
        return np.concatenate([s_part, mu * t_loss_weights])

    result = net.train(
        open_model, all_features, all_targets, np.ones(n + m), train_cfg,
        weight_schedule=schedule,
    )
    return OpenTrainResult(result.model, result.loss_trace, tuple(mu_trace))


@dataclass(frozen=True)
class AosrRunResult:
    """Fitted model plus the intermediates needed for risk reporting."""

    model: AosrModel
    closed_accuracy: float
    encoded: Dataset
    t_features: np.ndarray
    aux_weights: np.ndarray
    objective_trace: tuple[float, ...]
    mu_trace: tuple[float, ...]


def run_aosr(config: AosrConfig, s: Dataset) -> AosrRunResult:
    """All five stages; every stage's randomness derives from config.seed."""
    rng = Rng(config.seed)
    with _stage("closed-set pretraining"):
        pre = pretrain_closed(config, s)
    with _stage("feature encoding"):
        encoded = encode_dataset(pre.model, s)
    with _stage("auxiliary generation"):
        t_raw, box = generate_aux(
            s.features, config.aux_multiple, config.box_margin,
            rng.derive("aux"),
        )
        t_features = net.encode(pre.model, t_raw)
    with _stage("weight estimation"):
        weights = estimate_weights(
            config.weight_method, encoded.features, t_features,
            rng.derive("weights"), config.kulsif_lambda,
        )
        tau = select_tau(weights, config.t)
        params = WeightParams(
            tau=tau, beta=config.beta, t=config.t,
            u_zero_mass=estimate_u_zero_mass(weights, tau),
        )
    with _stage("open-set training"):
        opened = train_open(config, encoded, t_features, weights, tau, config.beta)
    model = AosrModel(pre.model, opened.model, params, box)
    return AosrRunResult(
        model, pre.train_accuracy, encoded, t_features, weights,
        opened.objective_trace, opened.mu_trace,
    )


def aosr_predict(model: AosrModel, x) -> int | np.ndarray:
    """Class in {0..C}, where C means unknown. Accepts a row or a batch."""
    encoded = net.encode(model.closed, x)
    return net.predict(model.open, encoded)


# -- serialization ---------------------------------------------------------


def aosr_model_to_dict(model: AosrModel) -> dict:
    return {
        "version": 1,
        "closed_model": net.model_to_dict(model.closed),
        "open_model": net.model_to_dict(model.open),
        "tau": model.weight_params.tau,
        "beta": model.weight_params.beta,
        "t": model.weight_params.t,
        "u_zero_mass": model.weight_params.u_zero_mass,
        "box": {
            "lower": model.box.lower.tolist(),
            "upper": model.box.upper.tolist(),
        },
    }


def aosr_model_from_dict(obj: dict) -> AosrModel:
    from .errors import ParseError

    try:
        if obj["version"] != 1:
            raise ParseError(f"unsupported model version {obj['version']!r}")
        closed = net.model_from_dict(obj["closed_model"])
        opened = net.model_from_dict(obj["open_model"])
        params = WeightParams(
            tau=float(obj["tau"]),
            beta=float(obj["beta"]),
            t=float(obj["t"]),
            u_zero_mass=float(obj["u_zero_mass"]),
        )
        box = Box(np.array(obj["box"]["lower"]), np.array(obj["box"]["upper"]))
    except (KeyError, TypeError, InvalidArgument) as exc:
        raise ParseError(f"malformed open-set model file: {exc}") from exc
    return AosrModel(closed, opened, params, box)


def save_aosr_model(model: AosrModel, path: str) -> None:
    import json

    from .dataio import atomic_write_text

    atomic_write_text(path, json.dumps(aosr_model_to_dict(model)) + "\n")


def load_aosr_model(path: str) -> AosrModel:
    import json

    from .errors import ParseError

    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    return aosr_model_from_dict(obj)
