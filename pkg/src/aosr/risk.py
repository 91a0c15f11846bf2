"""Empirical risk functionals for the open-set training objective.

All risks are means of the clamped cross-entropy loss from `net`. The
auxiliary construction compares the unknown-class loss on reweighted
generated samples T against the same loss on the training samples S; the
positive part of that difference is what a hypothesis pays for not
rejecting the region T covers beyond S.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .dataio import Dataset
from .errors import InvalidArgument
from .net import MlpModel, PROB_CLAMP, forward
from .reweight import IadParams, WeightParams, l_minus_transform, l_transform


def _clamped_log_loss(h: MlpModel, features: np.ndarray, targets) -> np.ndarray:
    probs = forward(h, features)
    targets = np.broadcast_to(np.asarray(targets, dtype=np.int64), (probs.shape[0],))
    p = probs[np.arange(probs.shape[0]), targets]
    return -np.log(np.maximum(p, PROB_CLAMP))


def _check_open_width(h: MlpModel, num_known_classes: int) -> int:
    if h.output_dim < num_known_classes + 1:
        raise InvalidArgument(
            f"model has {h.output_dim} outputs; need at least "
            f"{num_known_classes + 1} to score the unknown class"
        )
    return num_known_classes


def empirical_risk_s(h: MlpModel, s: Dataset) -> float:
    """Mean loss of h at the true known-class labels of S."""
    s.require_known_only()
    if h.output_dim < s.num_known_classes:
        raise InvalidArgument("model output width below number of known classes")
    return float(np.mean(_clamped_log_loss(h, s.features, s.labels)))


def empirical_risk_s_unknown(h: MlpModel, s: Dataset) -> float:
    """Mean loss of h against the fixed unknown label, over S's features."""
    c = _check_open_width(h, s.num_known_classes)
    return float(np.mean(_clamped_log_loss(h, s.features, c)))


def _check_weights(t_features: np.ndarray, weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (np.atleast_2d(t_features).shape[0],):
        raise InvalidArgument("need exactly one weight per auxiliary row")
    return weights


def empirical_risk_t_unknown(
    h: MlpModel,
    t_features: np.ndarray,
    weights: np.ndarray,
    tau: float,
    beta: float,
    unknown_class: int | None = None,
) -> float:
    """Mean boosted-weight unknown-class loss over the auxiliary rows."""
    weights = _check_weights(t_features, weights)
    c = h.output_dim - 1 if unknown_class is None else unknown_class
    losses = _clamped_log_loss(h, t_features, c)
    return float(np.mean(l_transform(weights, tau, beta) * losses))


def delta(
    h: MlpModel,
    s: Dataset,
    t_features: np.ndarray,
    weights: np.ndarray,
    tau: float,
    beta: float,
) -> float:
    """Positive part of (auxiliary unknown risk) - (training unknown risk)."""
    r_t = empirical_risk_t_unknown(
        h, t_features, weights, tau, beta, unknown_class=s.num_known_classes
    )
    r_s_u = empirical_risk_s_unknown(h, s)
    return max(r_t - r_s_u, 0.0)


def auxiliary_risk(
    h: MlpModel,
    s: Dataset,
    t_features: np.ndarray,
    weights: np.ndarray,
    tau: float,
    beta: float,
) -> float:
    """Known-class risk plus the unknown-side gap: R_S + Delta."""
    return empirical_risk_s(h, s) + delta(h, s, t_features, weights, tau, beta)


def proxy_unknown_risk(
    h: MlpModel,
    t_features: np.ndarray,
    weights: np.ndarray,
    tau: float,
    beta: float,
    unknown_class: int | None = None,
) -> float:
    """Unknown-class loss weighted by the low-ratio-only transform."""
    weights = _check_weights(t_features, weights)
    c = h.output_dim - 1 if unknown_class is None else unknown_class
    losses = _clamped_log_loss(h, t_features, c)
    return float(np.mean(l_minus_transform(weights, tau, beta) * losses))


def proxy_auxiliary_risk(
    h: MlpModel,
    s: Dataset,
    t_features: np.ndarray,
    weights: np.ndarray,
    params: WeightParams,
    iad: IadParams | None = None,
) -> float:
    """R_S plus the analytically scaled proxy unknown risk.

    The scale is alpha * gamma_prime / (1 - alpha), which requires a
    positive zero-ratio mass; alpha >= 1 is rejected defensively.
    """
    if iad is None:
        iad = params.iad()
    if iad.alpha >= 1.0:
        raise InvalidArgument("alpha must be < 1")
    if not iad.has_gamma_prime:
        raise InvalidArgument(
            "proxy risk undefined: zero-ratio mass estimate is 0"
        )
    coeff = iad.alpha * iad.gamma_prime / (1.0 - iad.alpha)
    return empirical_risk_s(h, s) + coeff * proxy_unknown_risk(
        h, t_features, weights, params.tau, params.beta,
        unknown_class=s.num_known_classes,
    )


def training_objective(
    h: MlpModel,
    s: Dataset,
    t_features: np.ndarray,
    weights: np.ndarray,
    tau: float,
    beta: float,
    mu: float,
) -> float:
    """R_S + mu * proxy unknown risk: the quantity the open trainer minimizes."""
    if mu < 0:
        raise InvalidArgument(f"mu must be >= 0, got {mu}")
    return empirical_risk_s(h, s) + mu * proxy_unknown_risk(
        h, t_features, weights, tau, beta, unknown_class=s.num_known_classes
    )


@dataclass(frozen=True)
class RiskReport:
    """Named risk values for one (model, S, T, weights) evaluation."""

    r_s: float
    r_s_unknown: float
    r_t_unknown: float
    delta: float
    auxiliary_risk: float
    proxy_unknown: float
    proxy_auxiliary: float
    objective: float

    def __post_init__(self):
        values = asdict(self)
        for name, value in values.items():
            if not np.isfinite(value):
                raise InvalidArgument(f"{name} must be finite, got {value}")
            if value < 0:
                raise InvalidArgument(f"{name} must be >= 0, got {value}")
        if self.delta != max(self.r_t_unknown - self.r_s_unknown, 0.0):
            raise InvalidArgument("delta must equal max(r_t_unknown - r_s_unknown, 0)")
        if self.auxiliary_risk != self.r_s + self.delta:
            raise InvalidArgument("auxiliary_risk must equal r_s + delta")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RiskReport":
        return cls(**json.loads(text))


def compute_risk_report(
    h: MlpModel,
    s: Dataset,
    t_features: np.ndarray,
    weights: np.ndarray,
    params: WeightParams,
    mu: float,
) -> RiskReport:
    """Evaluate every risk once and bundle them with exact identities.

    The proxy-auxiliary scale uses the continuous extension beta when the
    estimated zero-ratio mass is 0, so reports stay finite.
    """
    r_s = empirical_risk_s(h, s)
    r_s_u = empirical_risk_s_unknown(h, s)
    r_t_u = empirical_risk_t_unknown(
        h, t_features, weights, params.tau, params.beta,
        unknown_class=s.num_known_classes,
    )
    d = max(r_t_u - r_s_u, 0.0)
    proxy_u = proxy_unknown_risk(
        h, t_features, weights, params.tau, params.beta,
        unknown_class=s.num_known_classes,
    )
    coeff = params.iad().proxy_coefficient()
    return RiskReport(
        r_s=r_s,
        r_s_unknown=r_s_u,
        r_t_unknown=r_t_u,
        delta=d,
        auxiliary_risk=r_s + d,
        proxy_unknown=proxy_u,
        proxy_auxiliary=r_s + coeff * proxy_u,
        objective=r_s + mu * proxy_u,
    )
