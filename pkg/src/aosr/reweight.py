"""Piecewise-linear weight transforms and the parameters built on them.

The transforms reshape estimated density-ratio weights before they enter
the risk sums: `l0_transform` lifts exactly-zero ratios to a floor beta,
`l_transform` does the same with a linear ramp between tau and 2*tau, and
`l_minus_transform` keeps only the low-weight (unknown-looking) part,
decaying to zero above 2*tau. All three agree at the branch points, so
they are continuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, UndefinedNormalizer

TAU_FLOOR = 1e-6
MU_CAP = 1e6


def _check_tau_beta(tau: float, beta: float) -> None:
    if tau <= 0:
        raise InvalidArgument(f"tau must be > 0, got {tau}")
    if beta <= 0:
        raise InvalidArgument(f"beta must be > 0, got {beta}")


def l0_transform(x, beta: float):
    """x + beta for x <= 0, identity above. Vectorized over x."""
    if beta <= 0:
        raise InvalidArgument(f"beta must be > 0, got {beta}")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x <= 0.0, x + beta, x)
    return float(out) if out.ndim == 0 else out


def l_transform(x, tau: float, beta: float):
    """Ratio boost: x + beta below tau, identity above 2*tau, linear between."""
    _check_tau_beta(tau, beta)
    x = np.asarray(x, dtype=np.float64)
    mid = (1.0 - beta / tau) * x + 2.0 * beta
    out = np.where(x <= tau, x + beta, np.where(x >= 2.0 * tau, x, mid))
    return float(out) if out.ndim == 0 else out


def l_minus_transform(x, tau: float, beta: float):
    """Unknown-side weight: x + beta below tau, zero above 2*tau, linear between.

    Clamped at 0 so inputs below -beta cannot go negative.
    """
    _check_tau_beta(tau, beta)
    x = np.asarray(x, dtype=np.float64)
    mid = -((tau + beta) / tau) * x + 2.0 * tau + 2.0 * beta
    out = np.where(x <= tau, x + beta, np.where(x >= 2.0 * tau, 0.0, mid))
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def gamma(beta: float, u_zero_mass: float) -> float:
    """Normalizer 1 / (1 + beta * u_zero_mass) of the reweighted measure."""
    if beta <= 0:
        raise InvalidArgument(f"beta must be > 0, got {beta}")
    if not 0.0 <= u_zero_mass <= 1.0:
        raise InvalidArgument(f"u_zero_mass must be in [0, 1], got {u_zero_mass}")
    return 1.0 / (1.0 + beta * u_zero_mass)


def gamma_prime(u_zero_mass: float) -> float:
    """Reciprocal zero-ratio mass; undefined when that mass is zero."""
    if not 0.0 <= u_zero_mass <= 1.0:
        raise InvalidArgument(f"u_zero_mass must be in [0, 1], got {u_zero_mass}")
    if u_zero_mass == 0.0:
        raise UndefinedNormalizer("gamma_prime undefined: u_zero_mass is 0")
    return 1.0 / u_zero_mass


@dataclass(frozen=True)
class IadParams:
    """Derived normalizers for a (beta, zero-ratio mass) pair.

    gamma scales the reweighted sampling measure into a probability
    measure, alpha = 1 - gamma is the implied unknown-class mass, and
    gamma_prime rescales the unknown-only risk term. gamma_prime is
    undefined when u_zero_mass is 0.
    """

    beta: float
    u_zero_mass: float

    def __post_init__(self):
        if self.beta <= 0:
            raise InvalidArgument(f"beta must be > 0, got {self.beta}")
        if not 0.0 <= self.u_zero_mass <= 1.0:
            raise InvalidArgument(
                f"u_zero_mass must be in [0, 1], got {self.u_zero_mass}"
            )

    @property
    def gamma(self) -> float:
        return gamma(self.beta, self.u_zero_mass)

    @property
    def alpha(self) -> float:
        return 1.0 - self.gamma

    @property
    def has_gamma_prime(self) -> bool:
        return self.u_zero_mass > 0.0

    @property
    def gamma_prime(self) -> float:
        return gamma_prime(self.u_zero_mass)

    def proxy_coefficient(self) -> float:
        """Coefficient alpha*gamma_prime/(1-alpha) of the unknown risk term.

        Algebraically this collapses to beta for every positive
        u_zero_mass, and beta is its continuous extension at 0, which is
        what we return there so reports stay finite.
        """
        if not self.has_gamma_prime:
            return self.beta
        return self.alpha * self.gamma_prime / (1.0 - self.alpha)


@dataclass(frozen=True)
class WeightParams:
    """Threshold and floor parameters attached to one fitted weight vector."""

    tau: float
    beta: float
    t: float
    u_zero_mass: float

    def __post_init__(self):
        _check_tau_beta(self.tau, self.beta)
        if not 0.0 < self.t < 1.0:
            raise InvalidArgument(f"t must be in (0, 1), got {self.t}")
        if not 0.0 <= self.u_zero_mass <= 1.0:
            raise InvalidArgument(
                f"u_zero_mass must be in [0, 1], got {self.u_zero_mass}"
            )

    def iad(self) -> IadParams:
        return IadParams(self.beta, self.u_zero_mass)


def estimate_u_zero_mass(weights: np.ndarray, tau: float) -> float:
    """Fraction of auxiliary weights at or below tau.

    Weights under the threshold are treated as lying outside the known
    support, which is the only observable stand-in for the zero-ratio mass.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        raise InvalidArgument("weights must be nonempty")
    return float(np.count_nonzero(weights <= tau)) / weights.size


def select_tau(weights: np.ndarray, t: float) -> float:
    """Threshold so that the fraction t with the lowest weights falls at or below it.

    Returns the ceil(t*m)-th smallest weight; ties at the threshold all
    count as selected. Floored at 1e-6 when the order statistic is 0.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        raise InvalidArgument("weights must be nonempty")
    if not 0.0 < t < 1.0:
        raise InvalidArgument(f"t must be in (0, 1), got {t}")
    k = math.ceil(t * weights.size)
    k = min(max(k, 1), weights.size)
    tau = float(np.sort(weights)[k - 1])
    return max(tau, TAU_FLOOR)


def mu_schedule(n: int, beta: float, n_prime: int) -> float:
    """Unknown-term multiplier n*beta / (n' + 1e-4), capped at 1e6."""
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if beta <= 0:
        raise InvalidArgument(f"beta must be > 0, got {beta}")
    if n_prime < 0:
        raise InvalidArgument(f"n_prime must be >= 0, got {n_prime}")
    return min(n * beta / (n_prime + 1e-4), MU_CAP)
