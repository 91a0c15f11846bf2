"""Density-ratio / known-ness weight estimation over generated samples.

Two interchangeable estimators:

* Kernel least-squares importance fitting: minimizes the quadratic
  (1/m) sum_T w(x)^2 - (2/n) sum_S w(x) + lambda ||w||_K^2 over a
  Gaussian-kernel expansion centered on the rows of S and T. Solved in
  closed form; predictions approximate the ratio p_S/p_T and are clamped
  at 0.
* Isolation forest: random partition trees fitted on a reference set;
  the standard path-length anomaly score in [0, 1] is flipped into a
  known-ness weight w = 1 - score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericalFailure
from .rng import Rng

KULSIF_JITTER = 1e-10
KULSIF_RESIDUAL_RTOL = 1e-8
EULER_MASCHERONI = 0.5772156649


def gaussian_gram(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    """Gram matrix with entries exp(-||a_i - b_j||^2 / (2 sigma^2))."""
    if sigma <= 0:
        raise InvalidArgument(f"sigma must be > 0, got {sigma}")
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise InvalidArgument("a and b must have the same number of columns")
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * sigma * sigma))


def median_bandwidth(points: np.ndarray, max_points: int = 1000) -> float:
    """Median pairwise distance, on a deterministic stride subsample.

    Falls back to 1.0 when the median distance is 0 (all points equal).
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] < 2:
        raise InvalidArgument("median_bandwidth needs at least 2 points")
    if points.shape[0] > max_points:
        stride = math.ceil(points.shape[0] / max_points)
        points = points[::stride]
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    iu = np.triu_indices(points.shape[0], k=1)
    med = float(np.median(dist[iu]))
    return med if med > 0 else 1.0


@dataclass(frozen=True)
class KulsifModel:
    """Fitted kernel expansion: w(x) = sum_i coef[i] * k(centers[i], x)."""

    centers: np.ndarray
    coefficients: np.ndarray
    sigma: float
    lam: float
    n_source: int
    n_aux: int

    def __post_init__(self):
        object.__setattr__(
            self, "centers", np.asarray(self.centers, dtype=np.float64)
        )
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=np.float64)
        )
        if self.sigma <= 0 or self.lam <= 0:
            raise InvalidArgument("sigma and lambda must be > 0")
        if self.coefficients.shape != (self.centers.shape[0],):
            raise InvalidArgument("one coefficient per center required")

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def kulsif_fit(
    s_features: np.ndarray,
    t_features: np.ndarray,
    lam: float = 1e-2,
    sigma: float | None = None,
) -> KulsifModel:
    """Closed-form ratio fit over centers Z = rows(S) ++ rows(T).

    Solves ((1/m) K_ZT K_TZ + lam K_ZZ + jitter I) c = (1/n) K_ZS 1 and
    checks the residual; a least-squares fallback guards ill-conditioned
    systems. sigma defaults to the median pairwise distance of Z.
    """
    s = np.atleast_2d(np.asarray(s_features, dtype=np.float64))
    t = np.atleast_2d(np.asarray(t_features, dtype=np.float64))
    if s.shape[0] < 1 or t.shape[0] < 1:
        raise InvalidArgument("need at least one source and one auxiliary row")
    if s.shape[1] != t.shape[1]:
        raise InvalidArgument("source and auxiliary dims differ")
    if lam <= 0:
        raise InvalidArgument(f"lambda must be > 0, got {lam}")
    n, m = s.shape[0], t.shape[0]
    centers = np.vstack([s, t])
    if sigma is None:
        sigma = median_bandwidth(centers)

    k_zz = gaussian_gram(centers, centers, sigma)
    k_zt = k_zz[:, n:]
    k_zs = k_zz[:, :n]
    a = (k_zt @ k_zt.T) / m + lam * k_zz
    a[np.diag_indices_from(a)] += KULSIF_JITTER
    rhs = k_zs.sum(axis=1) / n

    try:
        coef = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        coef = None
    rhs_norm = float(np.linalg.norm(rhs))
    tol = KULSIF_RESIDUAL_RTOL * max(rhs_norm, 1e-300)
    if coef is None or float(np.linalg.norm(a @ coef - rhs)) > tol:
        coef, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        if float(np.linalg.norm(a @ coef - rhs)) > tol:
            raise NumericalFailure(
                "ratio fit: linear system is singular beyond jitter repair"
            )
    return KulsifModel(centers, coef, sigma, lam, n, m)


def _expansion(model: KulsifModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise InvalidArgument(
            f"query has {x.shape[1]} columns, model expects {model.dim}"
        )
    return gaussian_gram(x, model.centers, model.sigma) @ model.coefficients


def ratio_predict(model: KulsifModel, x: np.ndarray) -> np.ndarray:
    """Estimated ratio at each row of x, clamped below at 0."""
    return np.maximum(_expansion(model, x), 0.0)


def kulsif_objective(
    model: KulsifModel,
    s_features: np.ndarray,
    t_features: np.ndarray,
    coefficients: np.ndarray | None = None,
) -> float:
    """Value of the fitted quadratic at the model's (or given) coefficients."""
    s = np.atleast_2d(np.asarray(s_features, dtype=np.float64))
    t = np.atleast_2d(np.asarray(t_features, dtype=np.float64))
    if s.shape[1] != model.dim or t.shape[1] != model.dim:
        raise InvalidArgument("feature dims do not match model centers")
    coef = model.coefficients if coefficients is None else np.asarray(coefficients)
    if coef.shape != (model.centers.shape[0],):
        raise InvalidArgument("coefficient vector has wrong length")
    w_t = gaussian_gram(t, model.centers, model.sigma) @ coef
    w_s = gaussian_gram(s, model.centers, model.sigma) @ coef
    k_zz = gaussian_gram(model.centers, model.centers, model.sigma)
    rkhs_sq = float(coef @ (k_zz @ coef))
    return float(
        np.sum(w_t * w_t) / t.shape[0]
        - 2.0 * np.sum(w_s) / s.shape[0]
        + model.lam * rkhs_sq
    )


# -- isolation forest -------------------------------------------------------


def _harmonic(i: float) -> float:
    return math.log(i) + EULER_MASCHERONI


def average_path_length(k: int) -> float:
    """Expected unsuccessful-search path length c(k) in a binary tree."""
    if k <= 1:
        return 0.0
    return 2.0 * _harmonic(k - 1) - 2.0 * (k - 1) / k


@dataclass(frozen=True)
class _Node:
    # leaf when split_dim is None; `size` is the leaf's sample count
    split_dim: int | None
    split_value: float
    left: "_Node | None"
    right: "_Node | None"
    size: int
    depth: int


@dataclass(frozen=True)
class IforestModel:
    trees: tuple[_Node, ...]
    subsample: int
    n_trees: int
    dim: int
    depth_limit: int


def _grow_tree(data: np.ndarray, depth: int, limit: int, rng: Rng) -> _Node:
    n = data.shape[0]
    if n <= 1 or depth >= limit:
        return _Node(None, 0.0, None, None, n, depth)
    lo = data.min(axis=0)
    hi = data.max(axis=0)
    usable = np.nonzero(hi > lo)[0]
    if usable.size == 0:
        return _Node(None, 0.0, None, None, n, depth)
    dim = int(usable[rng.integers(0, usable.size)])
    value = float(rng.uniform(lo[dim], hi[dim]))
    mask = data[:, dim] < value
    if not mask.any() or mask.all():
        return _Node(None, 0.0, None, None, n, depth)
    left = _grow_tree(data[mask], depth + 1, limit, rng)
    right = _grow_tree(data[~mask], depth + 1, limit, rng)
    return _Node(dim, value, left, right, n, depth)


def iforest_fit(
    reference_features: np.ndarray,
    n_trees: int = 100,
    subsample: int = 256,
    rng: Rng | None = None,
) -> IforestModel:
    """Fit an isolation forest on the reference rows.

    Each tree gets an independent subsample (capped at the reference
    size), uniform split dimensions and uniform split values within the
    node's data range, and depth capped at ceil(log2(subsample)).
    """
    ref = np.atleast_2d(np.asarray(reference_features, dtype=np.float64))
    if ref.shape[0] < 1:
        raise InvalidArgument("reference set must be nonempty")
    if n_trees < 1:
        raise InvalidArgument(f"n_trees must be >= 1, got {n_trees}")
    if subsample < 1:
        raise InvalidArgument(f"subsample must be >= 1, got {subsample}")
    if rng is None:
        raise InvalidArgument("rng is required")
    psi = min(subsample, ref.shape[0])
    limit = max(1, math.ceil(math.log2(psi))) if psi > 1 else 1
    trees = []
    for i in range(n_trees):
        tree_rng = rng.derive("tree", i)
        idx = tree_rng.choice(ref.shape[0], size=psi, replace=False)
        trees.append(_grow_tree(ref[idx], 0, limit, tree_rng))
    return IforestModel(tuple(trees), psi, n_trees, ref.shape[1], limit)


def _path_length(node: _Node, row: np.ndarray) -> float:
    while node.split_dim is not None:
        node = node.left if row[node.split_dim] < node.split_value else node.right
    return node.depth + average_path_length(node.size)


def iforest_anomaly_score(model: IforestModel, x: np.ndarray) -> np.ndarray:
    """Standard score 2^(-E[path length] / c(subsample)), in [0, 1]."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise InvalidArgument(
            f"query has {x.shape[1]} columns, model expects {model.dim}"
        )
    norm = average_path_length(model.subsample)
    if norm <= 0:
        # single-point subsamples isolate nothing; score is the midpoint
        return np.full(x.shape[0], 0.5)
    mean_path = np.array(
        [
            sum(_path_length(tree, row) for tree in model.trees) / model.n_trees
            for row in x
        ]
    )
    return np.power(2.0, -mean_path / norm)


def weights_from_iforest(model: IforestModel, x: np.ndarray) -> np.ndarray:
    """Known-ness weight 1 - anomaly score: high inside the reference mass."""
    return 1.0 - iforest_anomaly_score(model, x)
