"""Open-set evaluation metrics and the sample-size sweep experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dataio import (
    DEFAULT_EXCLUSION_MARGIN,
    Dataset,
    default_unknown_box,
    gen_double_moon,
    gen_unknown_uniform,
)
from .errors import InvalidArgument
from .pipeline import AosrConfig, aosr_predict, run_aosr
from .rng import Rng


@dataclass(frozen=True)
class ConfusionMatrix:
    """(K x K) count matrix, rows = true class, columns = predicted."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise InvalidArgument("confusion matrix must be square")
        if np.any(counts < 0):
            raise InvalidArgument("confusion counts must be nonnegative")
        counts.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(y_true, y_pred, num_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise InvalidArgument("y_true and y_pred must be matching 1-D vectors")
    if y_true.size == 0:
        raise InvalidArgument("need at least one sample")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise InvalidArgument(f"{name} labels out of range [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise InvalidArgument("empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean over classes of 2PR/(P+R).

    A class with no true and no predicted samples contributes 0, which
    only ever lowers the average.
    """
    counts = cm.counts
    total_f1 = 0.0
    for c in range(cm.num_classes):
        tp = float(counts[c, c])
        predicted = float(counts[:, c].sum())
        actual = float(counts[c, :].sum())
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / actual if actual > 0 else 0.0
        if precision + recall > 0:
            total_f1 += 2.0 * precision * recall / (precision + recall)
    return total_f1 / cm.num_classes


# -- sample-size sweep -------------------------------------------------------


def make_mixed_test_set(n: int, noise: float, rng: Rng,
                        margin: float = DEFAULT_EXCLUSION_MARGIN) -> Dataset:
    """n/2 labeled moon points plus n/2 unknown points labeled 2."""
    if n < 4 or n % 4 != 0:
        raise InvalidArgument(
            f"mixed test size must be a positive multiple of 4, got {n}"
        )
    known = gen_double_moon(n // 2, noise, rng.derive("known"))
    unknown = gen_unknown_uniform(
        n // 2, default_unknown_box(), margin, rng.derive("unknown")
    )
    features = np.vstack([known.features, unknown])
    labels = np.concatenate(
        [known.labels, np.full(n // 2, 2, dtype=np.int64)]
    )
    return Dataset(features, labels, num_known_classes=2)


@dataclass(frozen=True)
class SweepResult:
    """Per-trial errors of full training runs across training-set sizes."""

    rows: tuple[tuple[int, int, float], ...]  # (n, trial, error)
    summary: tuple[tuple[int, float, float], ...]  # (n, mean_error, stderr)
    bounds: tuple[tuple[int, float, float], ...]  # (n, 0.5/sqrt(n), 8/sqrt(n))

    def errors_at(self, n: int) -> np.ndarray:
        return np.array([e for nn, _, e in self.rows if nn == n])

    def median_error(self, n: int) -> float:
        return float(np.median(self.errors_at(n)))


def sweep_error_curve(
    sizes,
    trials: int,
    config: AosrConfig,
    rng: Rng,
    noise: float = 0.05,
) -> SweepResult:
    """Train on fresh moons at each size and score a fresh mixed test set.

    Every (size, trial) cell derives its own seeds, so cells are
    independent and the whole sweep is reproducible from one rng.
    """
    sizes = [int(n) for n in sizes]
    if sizes != sorted(set(sizes)):
        raise InvalidArgument("sizes must be ascending and distinct")
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    for n in sizes:
        if n < 4 or n % 4 != 0:
            raise InvalidArgument(
                f"sweep sizes must be multiples of 4 (test split), got {n}"
            )

    rows = []
    for n in sizes:
        for trial in range(trials):
            cell = rng.derive("sweep", n, trial)
            try:
                train_data = gen_double_moon(n, noise, cell.derive("train"))
                run = run_aosr(
                    replace(config, seed=cell.derive("model").seed), train_data
                )
                test = make_mixed_test_set(n, noise, cell.derive("test"))
                preds = aosr_predict(run.model, test.features)
                err = 1.0 - accuracy(confusion(test.labels, preds, 3))
            except Exception as exc:
                exc.args = (f"sweep n={n} trial={trial}: {exc}",)
                raise
            rows.append((n, trial, err))

    summary = []
    for n in sizes:
        errs = np.array([e for nn, _, e in rows if nn == n])
        stderr = float(errs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        summary.append((n, float(errs.mean()), stderr))
    bounds = [(n, 0.5 / math.sqrt(n), 8.0 / math.sqrt(n)) for n in sizes]
    return SweepResult(tuple(rows), tuple(summary), tuple(bounds))
