"""Datasets, synthetic generators, and CSV serialization.

Feature matrices are plain float64 numpy arrays of shape (n, d). A
`Dataset` couples features with integer labels in {0..C}, where label C
is reserved for "unknown" and only appears in evaluation data.

CSV schemas (UTF-8, LF line endings, '.' decimal separator):
  dataset:        header ``f0,...,f{d-1},label``
  feature matrix: header ``f0,...,f{d-1}``
Floats are written with ``repr``, which round-trips float64 exactly.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleRegion, InvalidArgument, ParseError
from .rng import Rng

# Sampling region for unknown-class points around the two-moons layout.
DEFAULT_UNKNOWN_BOX_LOWER = (-1.5, -1.0)
DEFAULT_UNKNOWN_BOX_UPPER = (2.5, 1.5)
DEFAULT_EXCLUSION_MARGIN = 0.2


def check_features(rows: np.ndarray, name: str = "features") -> np.ndarray:
    """Validate an (m, d) feature matrix: 2-D, nonempty, finite."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise InvalidArgument(f"{name} must be 2-D, got shape {rows.shape}")
    if rows.shape[0] < 1 or rows.shape[1] < 1:
        raise InvalidArgument(f"{name} must be nonempty, got shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise InvalidArgument(f"{name} contains non-finite entries")
    return rows


@dataclass(frozen=True)
class Dataset:
    """Labeled feature matrix with a fixed number of known classes.

    Labels live in {0..num_known_classes}; the top value marks unknown
    and is only legal in evaluation-time data.
    """

    features: np.ndarray
    labels: np.ndarray
    num_known_classes: int

    def __post_init__(self):
        feats = check_features(self.features)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if self.num_known_classes < 1:
            raise InvalidArgument("num_known_classes must be >= 1")
        if labels.shape != (feats.shape[0],):
            raise InvalidArgument(
                f"labels shape {labels.shape} does not match {feats.shape[0]} rows"
            )
        if labels.size and (labels.min() < 0 or labels.max() > self.num_known_classes):
            raise InvalidArgument(
                f"labels must lie in [0, {self.num_known_classes}]"
            )
        feats.setflags(write=False)
        labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def require_known_only(self) -> None:
        """Reject datasets that contain the reserved unknown label."""
        if self.labels.size and self.labels.max() >= self.num_known_classes:
            raise InvalidArgument(
                "dataset contains unknown-class labels; expected training data "
                f"with labels < {self.num_known_classes}"
            )


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with strictly positive extent in every dimension."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise InvalidArgument("box lower/upper must be matching 1-D vectors")
        if not np.all(lower < upper):
            raise InvalidArgument("box requires lower[i] < upper[i] for all i")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        return np.all((rows >= self.lower) & (rows <= self.upper), axis=1)


def gen_double_moon(n: int, noise: float, rng: Rng) -> Dataset:
    """Two interleaved half-circle clusters with Gaussian jitter.

    Class 0 sits on the upper arc (cos t, sin t), class 1 on the lower
    arc (1 - cos t, 0.5 - sin t), t uniform on [0, pi], n/2 points each.
    """
    if n < 2 or n % 2 != 0:
        raise InvalidArgument(f"n must be a positive even count, got {n}")
    if noise < 0:
        raise InvalidArgument(f"noise must be >= 0, got {noise}")
    half = n // 2
    t0 = rng.uniform(0.0, math.pi, half)
    t1 = rng.uniform(0.0, math.pi, half)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    feats = np.vstack([upper, lower])
    if noise > 0:
        feats = feats + noise * rng.standard_normal((n, 2))
    labels = np.concatenate([np.zeros(half, np.int64), np.ones(half, np.int64)])
    return Dataset(feats, labels, num_known_classes=2)


def moon_centerline_distance(points: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearer noiseless moon arc."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))

    def arc_dist(p):
        # distance to the unit upper half-circle centered at the origin
        theta = np.arctan2(p[:, 1], p[:, 0])
        radial = np.abs(np.hypot(p[:, 0], p[:, 1]) - 1.0)
        d_end = np.minimum(
            np.hypot(p[:, 0] - 1.0, p[:, 1]), np.hypot(p[:, 0] + 1.0, p[:, 1])
        )
        return np.where((theta >= 0.0) & (theta <= math.pi), radial, d_end)

    d_upper = arc_dist(points)
    # the lower arc maps onto the upper one under (x, y) -> (1-x, 0.5-y)
    d_lower = arc_dist(np.column_stack([1.0 - points[:, 0], 0.5 - points[:, 1]]))
    return np.minimum(d_upper, d_lower)


def default_unknown_box() -> Box:
    return Box(np.array(DEFAULT_UNKNOWN_BOX_LOWER), np.array(DEFAULT_UNKNOWN_BOX_UPPER))


def gen_unknown_uniform(
    n: int,
    box: Box | None = None,
    exclusion_margin: float = DEFAULT_EXCLUSION_MARGIN,
    rng: Rng | None = None,
) -> np.ndarray:
    """Uniform samples over `box`, rejecting points near the moon arcs.

    Points at distance <= exclusion_margin from either noiseless
    centerline are redrawn. Raises InfeasibleRegion once the loop has
    burned 1000*n candidate draws without filling the request.
    """
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if exclusion_margin < 0:
        raise InvalidArgument("exclusion_margin must be >= 0")
    if rng is None:
        raise InvalidArgument("rng is required")
    if box is None:
        box = default_unknown_box()
    if box.dim != 2:
        raise InvalidArgument("unknown-sample box must be 2-D")

    accepted = np.empty((0, 2))
    drawn = 0
    budget = 1000 * n
    while accepted.shape[0] < n:
        batch = min(max(n, 256), budget - drawn)
        if batch <= 0:
            raise InfeasibleRegion(
                f"exclusion margin {exclusion_margin} rejects too much of the box: "
                f"{accepted.shape[0]}/{n} accepted after {drawn} draws"
            )
        cand = rng.uniform(0.0, 1.0, (batch, 2)) * (box.upper - box.lower) + box.lower
        drawn += batch
        keep = moon_centerline_distance(cand) > exclusion_margin
        accepted = np.vstack([accepted, cand[keep]])
    return accepted[:n]


def gen_gaussian_blob(n: int, mean, std: float, rng: Rng) -> np.ndarray:
    """n i.i.d. draws from an isotropic Gaussian."""
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if std <= 0:
        raise InvalidArgument(f"std must be > 0, got {std}")
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    return mean + std * rng.standard_normal((n, mean.shape[0]))


def bounding_box(features: np.ndarray, margin_fraction: float) -> Box:
    """Per-dimension [min, max] expanded symmetrically by a fraction of the width.

    Zero-width dimensions are expanded by max(1e-6, margin_fraction) so the
    box is never degenerate.
    """
    features = check_features(features)
    if margin_fraction < 0:
        raise InvalidArgument("margin_fraction must be >= 0")
    lo = features.min(axis=0)
    hi = features.max(axis=0)
    width = hi - lo
    pad = np.where(width > 0, margin_fraction * width, max(1e-6, margin_fraction))
    return Box(lo - pad, hi + pad)


# -- CSV serialization ----------------------------------------------------


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _feature_header(d: int) -> list[str]:
    return [f"f{i}" for i in range(d)]


def _parse_float(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"not a decimal literal: {token!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value: {token!r}", lineno)
    return value


def save_dataset(dataset: Dataset, path: str) -> None:
    lines = [",".join(_feature_header(dataset.dim) + ["label"])]
    for row, label in zip(dataset.features, dataset.labels):
        lines.append(",".join([repr(float(v)) for v in row] + [str(int(label))]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_dataset(
    path: str,
    num_known_classes: int | None = None,
    allow_unknown: bool = False,
) -> Dataset:
    """Load a dataset CSV.

    When `num_known_classes` is given, labels are range-checked against it
    (strictly below C for training files, up to C when `allow_unknown`);
    otherwise C is inferred as max(label)+1.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ParseError("empty file", 1)
    header = raw[0].split(",")
    if len(header) < 2 or header[-1] != "label":
        raise ParseError(f"expected header 'f0,...,label', got {raw[0]!r}", 1)
    d = len(header) - 1
    if header[:-1] != _feature_header(d):
        raise ParseError(f"feature columns must be f0..f{d-1}", 1)

    feats, labels = [], []
    for lineno, line in enumerate(raw[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise ParseError(f"expected {d + 1} fields, got {len(parts)}", lineno)
        feats.append([_parse_float(tok, lineno) for tok in parts[:-1]])
        try:
            label = int(parts[-1])
        except ValueError:
            raise ParseError(f"label is not an integer: {parts[-1]!r}", lineno) from None
        if label < 0:
            raise ParseError(f"label must be nonnegative, got {label}", lineno)
        if num_known_classes is not None:
            limit = num_known_classes if allow_unknown else num_known_classes - 1
            if label > limit:
                raise ParseError(
                    f"label {label} out of range (max allowed {limit})", lineno
                )
        labels.append(label)
    if not feats:
        raise ParseError("no data rows", 2)
    c = num_known_classes if num_known_classes is not None else max(labels) + 1
    return Dataset(np.array(feats), np.array(labels, np.int64), c)


def save_features(rows: np.ndarray, path: str) -> None:
    rows = check_features(rows)
    lines = [",".join(_feature_header(rows.shape[1]))]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_features(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ParseError("empty file", 1)
    header = raw[0].split(",")
    d = len(header)
    if header != _feature_header(d):
        raise ParseError(f"expected header 'f0,...,f{d-1}', got {raw[0]!r}", 1)
    rows = []
    for lineno, line in enumerate(raw[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != d:
            raise ParseError(f"expected {d} fields, got {len(parts)}", lineno)
        rows.append([_parse_float(tok, lineno) for tok in parts])
    if not rows:
        raise ParseError("no data rows", 2)
    return np.array(rows)
