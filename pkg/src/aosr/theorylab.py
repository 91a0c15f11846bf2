"""Estimators for the population-level quantities, on analytic fixtures.

The synthetic tasks here are 1-D distributions with piecewise-constant
densities, so the density ratio, the zero-ratio mass, and the label rule
are all known in closed form. That makes the reweighted population risk
computable by plain Monte Carlo, which in turn lets the empirical
auxiliary risk be checked against its target at different sample sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .dataio import Dataset
from .errors import InvalidArgument
from .net import MlpModel, PROB_CLAMP, forward
from .ratio import kulsif_fit, median_bandwidth, ratio_predict
from .risk import auxiliary_risk
from .rng import Rng


@dataclass(frozen=True)
class PiecewiseDensity:
    """1-D density that is constant on each interval between breakpoints."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if bp.ndim != 1 or bp.size < 2 or not np.all(np.diff(bp) > 0):
            raise InvalidArgument("breakpoints must be ascending, length >= 2")
        if vals.shape != (bp.size - 1,) or np.any(vals < 0):
            raise InvalidArgument("need one nonnegative value per segment")

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1,
                      0, self.values.size - 1)
        inside = (x >= self.breakpoints[0]) & (x <= self.breakpoints[-1])
        return np.where(inside, self.values[idx], 0.0)

    def segment_masses(self) -> np.ndarray:
        return self.values * np.diff(self.breakpoints)

    def mass(self) -> float:
        return float(self.segment_masses().sum())

    def sample(self, n: int, rng: Rng) -> np.ndarray:
        """Inverse-CDF sampling: pick a segment, then uniform within it."""
        masses = self.segment_masses()
        cdf = np.cumsum(masses) / masses.sum()
        u = rng.uniform(0.0, 1.0, n)
        seg = np.searchsorted(cdf, u, side="left")
        lo = self.breakpoints[seg]
        hi = self.breakpoints[seg + 1]
        return lo + rng.uniform(0.0, 1.0, n) * (hi - lo)


@dataclass(frozen=True)
class SyntheticTask:
    """Known-class density p, sampling density q, and a deterministic label rule.

    The rule maps a feature value to a label in {0..num_known_classes},
    with the top value marking the unknown region. The zero-ratio mass
    under q is derived from the densities, not supplied.
    """

    p: PiecewiseDensity
    q: PiecewiseDensity
    label_rule: Callable[[np.ndarray], np.ndarray]
    num_known_classes: int
    u_zero_mass: float = field(init=False)

    def __post_init__(self):
        if self.num_known_classes < 1:
            raise InvalidArgument("num_known_classes must be >= 1")
        # common refinement of both breakpoint grids
        cuts = np.union1d(self.p.breakpoints, self.q.breakpoints)
        mids = (cuts[:-1] + cuts[1:]) / 2.0
        p_vals = self.p.pdf(mids)
        q_vals = self.q.pdf(mids)
        if np.any((p_vals > 0) & (q_vals == 0)):
            raise InvalidArgument("support of p must lie inside support of q")
        zero_mass = float(np.sum((q_vals * np.diff(cuts))[p_vals == 0.0]))
        object.__setattr__(self, "u_zero_mass", zero_mass)

    def validate_masses(self, tol: float = 1e-6) -> None:
        """Check both densities integrate to 1 by adaptive quadrature."""
        for name, dens in (("p", self.p), ("q", self.q)):
            lo, hi = dens.breakpoints[0], dens.breakpoints[-1]
            total, _ = integrate.quad(
                lambda x: float(dens.pdf(x)), lo, hi,
                points=list(dens.breakpoints), limit=200,
            )
            if abs(total - 1.0) > tol:
                raise InvalidArgument(f"density {name} integrates to {total}")

    def ratio(self, x) -> np.ndarray:
        q = self.q.pdf(x)
        p = self.p.pdf(x)
        return np.where(q > 0, p / np.maximum(q, 1e-300), 0.0)

    def labels_of(self, x) -> np.ndarray:
        return np.asarray(self.label_rule(np.asarray(x)), dtype=np.int64)

    def sample_p(self, n: int, rng: Rng) -> np.ndarray:
        return self.p.sample(n, rng)

    def sample_u(self, n: int, rng: Rng) -> np.ndarray:
        return self.q.sample(n, rng)

    def sample_known_dataset(self, n: int, rng: Rng) -> Dataset:
        x = self.sample_p(n, rng)
        return Dataset(x[:, None], self.labels_of(x), self.num_known_classes)


def uniform_gap_task() -> SyntheticTask:
    """Default fixture: p uniform on [0,2], q uniform on [0,4].

    The ratio is exactly 2 on the known region and 0 above it, the
    zero-ratio mass is 1/2, and no mass falls in (0, 2*tau] for tau < 1,
    so threshold effects vanish and pure sampling error remains.
    """

    def rule(x):
        return np.where(x <= 1.0, 0, np.where(x <= 2.0, 1, 2))

    return SyntheticTask(
        p=PiecewiseDensity(np.array([0.0, 2.0]), np.array([0.5])),
        q=PiecewiseDensity(np.array([0.0, 4.0]), np.array([0.25])),
        label_rule=rule,
        num_known_classes=2,
    )


# -- hypothesis pools --------------------------------------------------------

Hypothesis = "MlpModel | Callable[[np.ndarray], np.ndarray]"


@dataclass(frozen=True)
class HypothesisPool:
    """Finite stand-in for a hypothesis class: MLPs or batch-prob callables."""

    members: tuple

    def __post_init__(self):
        if len(self.members) == 0:
            raise InvalidArgument("hypothesis pool must be nonempty")


def _member_probs(member, x: np.ndarray) -> np.ndarray:
    if isinstance(member, MlpModel):
        return np.atleast_2d(forward(member, x))
    return np.atleast_2d(np.asarray(member(x), dtype=np.float64))


def _loss_at(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    p = probs[np.arange(probs.shape[0]), targets]
    return -np.log(np.maximum(p, PROB_CLAMP))


def alpha_risk_empirical(
    h: MlpModel,
    known: Dataset,
    unknown_features: np.ndarray,
    alpha: float,
) -> float:
    """(1-alpha) * known-class risk + alpha * unknown-class risk."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument(f"alpha must be in [0, 1], got {alpha}")
    known.require_known_only()
    c = known.num_known_classes
    known_term = float(np.mean(_loss_at(forward(h, known.features), known.labels)))
    unknown_features = np.atleast_2d(np.asarray(unknown_features, dtype=np.float64))
    probs = np.atleast_2d(forward(h, unknown_features))
    unknown_term = float(np.mean(_loss_at(probs, np.full(probs.shape[0], c))))
    return (1.0 - alpha) * known_term + alpha * unknown_term


def disparity_discrepancy_empirical(
    h: MlpModel,
    pool: HypothesisPool,
    samples_p: np.ndarray,
    samples_q: np.ndarray,
) -> float:
    """Worst pool member's |mean_P loss(h vs h') - mean_Q loss(h vs h')|.

    loss(h, h') at x is h's clamped cross-entropy against h''s argmax
    label, so a pool member that disagrees with h on one sample set but
    not the other drives the value up.
    """
    samples_p = np.atleast_2d(np.asarray(samples_p, dtype=np.float64))
    samples_q = np.atleast_2d(np.asarray(samples_q, dtype=np.float64))
    if samples_p.shape[0] == 0 or samples_q.shape[0] == 0:
        raise InvalidArgument("sample sets must be nonempty")
    probs_p = np.atleast_2d(forward(h, samples_p))
    probs_q = np.atleast_2d(forward(h, samples_q))
    best = 0.0
    for member in pool.members:
        lab_p = np.argmax(_member_probs(member, samples_p), axis=1)
        lab_q = np.argmax(_member_probs(member, samples_q), axis=1)
        gap = abs(
            float(np.mean(_loss_at(probs_p, lab_p)))
            - float(np.mean(_loss_at(probs_q, lab_q)))
        )
        best = max(best, gap)
    return best


def combined_risk_empirical(
    pool: HypothesisPool,
    p_unknown_samples: np.ndarray,
    q_unknown_samples: np.ndarray,
    unknown_class: int,
) -> float:
    """Smallest summed unknown-class risk any pool member achieves."""
    p_rows = np.atleast_2d(np.asarray(p_unknown_samples, dtype=np.float64))
    q_rows = np.atleast_2d(np.asarray(q_unknown_samples, dtype=np.float64))
    if p_rows.shape[0] == 0 or q_rows.shape[0] == 0:
        raise InvalidArgument("sample sets must be nonempty")
    best = math.inf
    for member in pool.members:
        probs_p = _member_probs(member, p_rows)
        probs_q = _member_probs(member, q_rows)
        total = float(
            np.mean(_loss_at(probs_p, np.full(probs_p.shape[0], unknown_class)))
            + np.mean(_loss_at(probs_q, np.full(probs_q.shape[0], unknown_class)))
        )
        best = min(best, total)
    return best


# -- reweighted population risk by Monte Carlo -------------------------------


def _iad_gamma(beta: float, u_zero_mass: float) -> float:
    # continuous in beta; beta = 0 gives plain importance weighting
    if beta < 0:
        raise InvalidArgument(f"beta must be >= 0, got {beta}")
    return 1.0 / (1.0 + beta * u_zero_mass)


def iad_weight(r_value, beta: float, gamma_value: float):
    """Reweighted sampling density value gamma * (r + beta * [r <= 0])."""
    if beta < 0:
        raise InvalidArgument(f"beta must be >= 0, got {beta}")
    r = np.asarray(r_value, dtype=np.float64)
    out = gamma_value * np.where(r <= 0.0, r + beta, r)
    return float(out) if out.ndim == 0 else out


def mc_iad_weight_mass(
    task: SyntheticTask, beta: float, n_mc: int, rng: Rng
) -> float:
    """Monte Carlo total mass of the reweighted measure (should be 1)."""
    if n_mc < 1:
        raise InvalidArgument("n_mc must be >= 1")
    x = task.sample_u(n_mc, rng)
    g = _iad_gamma(beta, task.u_zero_mass)
    return float(np.mean(iad_weight(task.ratio(x), beta, g)))


def mc_iad_risk(
    h: MlpModel, task: SyntheticTask, beta: float, n_mc: int, rng: Rng
) -> float:
    """Monte Carlo reweighted population risk of h under the task."""
    if n_mc < 1:
        raise InvalidArgument("n_mc must be >= 1")
    x = task.sample_u(n_mc, rng)
    g = _iad_gamma(beta, task.u_zero_mass)
    w = iad_weight(task.ratio(x), beta, g)
    losses = _loss_at(np.atleast_2d(forward(h, x[:, None])), task.labels_of(x))
    return float(np.mean(w * losses))


# -- convergence-rate experiment ---------------------------------------------


def mlp_for_rate_experiment(task: SyntheticTask, rng: Rng) -> MlpModel:
    """Fixed randomly initialized scorer over the task's 1-D feature space.

    The rate experiment needs the hypothesis held constant across sample
    sizes; any finite-output scorer works, so a small untrained net is
    used.
    """
    from .net import mlp_init

    return mlp_init([1, 32, task.num_known_classes + 1], rng)


@dataclass(frozen=True)
class RateExperimentConfig:
    beta: float = 0.05
    tau: float = 0.25
    n_grid: tuple[int, ...] = (100, 400, 1600, 6400)
    trials: int = 10
    ratio_source: str = "true"  # "true" | "kulsif"
    n_mc_oracle: int = 10**6
    rate_delta: float = 0.1

    def __post_init__(self):
        if self.beta <= 0 or self.tau <= 0:
            raise InvalidArgument("beta and tau must be > 0")
        if len(self.n_grid) < 3 or list(self.n_grid) != sorted(set(self.n_grid)):
            raise InvalidArgument("n_grid must be ascending with >= 3 points")
        if self.trials < 5:
            raise InvalidArgument("trials must be >= 5")
        if self.ratio_source not in ("true", "kulsif"):
            raise InvalidArgument("ratio_source must be 'true' or 'kulsif'")
        if not 0.0 < self.rate_delta < 1.0:
            raise InvalidArgument("rate_delta must be in (0, 1)")

    def lambda_schedule(self, n: int) -> float:
        """Regularization decaying like n^-(1 - rate_delta)."""
        return float(n) ** -(1.0 - self.rate_delta)


@dataclass(frozen=True)
class RateExperimentResult:
    rows: tuple[tuple[int, int, float], ...]  # (n, trial, gap)
    median_gaps: tuple[tuple[int, float], ...]
    slope: float
    oracle: float


def theorem_gap_slope(median_gaps: Sequence[tuple[int, float]]) -> float:
    """Least-squares slope of log(median gap) against log(n)."""
    ns = np.array([n for n, _ in median_gaps], dtype=np.float64)
    gaps = np.array([g for _, g in median_gaps], dtype=np.float64)
    if np.any(gaps <= 0):
        raise InvalidArgument("median gaps must be positive for a log-log fit")
    coeffs = np.polyfit(np.log(ns), np.log(gaps), 1)
    return float(coeffs[0])


def rate_gap_experiment(
    h: MlpModel,
    task: SyntheticTask,
    config: RateExperimentConfig,
    rng: Rng,
) -> RateExperimentResult:
    """Gap between the scaled empirical auxiliary risk and its target vs n.

    For each n (with m = n) the empirical side draws S from p and T from
    q, weighs T either by the true ratio or by a kernel least-squares
    fit, and evaluates (1-alpha) * auxiliary risk. The target is a
    high-precision Monte Carlo estimate of the reweighted population
    risk, computed once.
    """
    oracle = mc_iad_risk(h, task, config.beta, config.n_mc_oracle,
                         rng.derive("oracle"))
    g = _iad_gamma(config.beta, task.u_zero_mass)
    rows = []
    medians = []
    for n in config.n_grid:
        gaps = []
        for trial in range(config.trials):
            trial_rng = rng.derive("gap", n, trial)
            s = task.sample_known_dataset(n, trial_rng.derive("s"))
            x_t = task.sample_u(n, trial_rng.derive("t"))
            t_features = x_t[:, None]
            if config.ratio_source == "true":
                weights = task.ratio(x_t)
            else:
                sigma = median_bandwidth(np.vstack([s.features, t_features]))
                model = kulsif_fit(
                    s.features, t_features, config.lambda_schedule(n), sigma
                )
                weights = ratio_predict(model, t_features)
            emp = auxiliary_risk(h, s, t_features, weights, config.tau, config.beta)
            gap = abs(g * emp - oracle)
            gaps.append(gap)
            rows.append((n, trial, gap))
        medians.append((n, float(np.median(gaps))))
    return RateExperimentResult(
        tuple(rows), tuple(medians), theorem_gap_slope(medians), oracle
    )
