"""Evaluation statistics: Spearman, Pearson, AUC, R2, MAE, and percentile
bootstrap confidence intervals.

Tie conventions are the standard ones: average ranks for Spearman, half
credit for tied score pairs in AUC. Rank values are exact multiples of 0.5,
so the fast rank-sum AUC agrees bitwise with the definitional pair count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_N_BOOT = 1000
DEFAULT_LEVEL = 0.95
MAX_REDRAWS = 100


class MetricError(Exception):
    pass


class ConstantInput(MetricError):
    pass


class SingleClass(MetricError):
    pass


class ConstantTruth(MetricError):
    pass


class DegenerateResampling(MetricError):
    pass


@dataclass(frozen=True)
class MetricReport:
    """Point estimate with a percentile bootstrap interval."""

    metric: str
    point: float
    ci_low: float
    ci_high: float
    n: int
    n_boot: int
    seed: int


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties replaced by the group average rank."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    boundary = np.empty(n, dtype=bool)
    boundary[0] = True
    boundary[1:] = sx[1:] != sx[:-1]
    group = np.cumsum(boundary) - 1
    starts = np.flatnonzero(boundary)
    counts = np.diff(np.append(starts, n))
    group_avg = starts + (counts + 1) / 2.0  # 1-based average rank per group
    ranks = np.empty(n)
    ranks[order] = group_avg[group]
    return ranks


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Plain product-moment correlation; raises ConstantInput on zero variance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) != len(b) or len(a) < 2:
        raise MetricError(f"need two equal-length vectors of size >= 2, got {len(a)} and {len(b)}")
    am = a - a.mean()
    bm = b - b.mean()
    denom = math.sqrt(float((am * am).sum()) * float((bm * bm).sum()))
    if denom == 0.0:
        raise ConstantInput("correlation undefined for a constant input")
    return float((am * bm).sum()) / denom


def spearman(pred: np.ndarray, truth: np.ndarray) -> float:
    """Pearson correlation of average-rank-transformed vectors."""
    return pearson(average_ranks(pred), average_ranks(truth))


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney probability that a positive outranks a negative, ties
    counted half. Computed from the positive rank sum in O(n log n)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes present")
    ranks = average_ranks(scores)
    rank_sum_pos = float(ranks[pos].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class RegressionFit:
    r2: float
    mae: float
    truth_constant: bool = False


def r2_mae(pred: np.ndarray, truth: np.ndarray) -> RegressionFit:
    """Coefficient of determination and mean absolute error. A constant truth
    leaves R2 undefined: the flag is set and r2 is NaN."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if len(pred) != len(truth) or len(truth) < 2:
        raise MetricError("need two equal-length vectors of size >= 2")
    mae = float(np.abs(truth - pred).mean())
    ss_tot = float(((truth - truth.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return RegressionFit(r2=math.nan, mae=mae, truth_constant=True)
    ss_res = float(((truth - pred) ** 2).sum())
    return RegressionFit(r2=1.0 - ss_res / ss_tot, mae=mae)


def bootstrap_ci(
    metric_fn,
    columns,
    metric_name: str = "metric",
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
    level: float = DEFAULT_LEVEL,
) -> MetricReport:
    """Percentile bootstrap over rows resampled uniformly with replacement.

    ``columns`` is a tuple of equal-length arrays resampled jointly;
    ``metric_fn(*resampled)`` produces one replicate. Replicates on which the
    metric is undefined (e.g. a single-class label resample) are redrawn from
    the same substream, up to MAX_REDRAWS attempts. Each replicate uses an
    independent substream of ``seed``, so results do not depend on scheduling.
    """
    columns = tuple(np.asarray(c) for c in columns)
    n = len(columns[0])
    for c in columns:
        if len(c) != n:
            raise MetricError("bootstrap columns must have equal length")
    point = float(metric_fn(*columns))

    root = np.random.SeedSequence(seed)
    children = root.spawn(n_boot)
    replicates = np.empty(n_boot)
    for i in range(n_boot):
        rng = np.random.default_rng(children[i])
        for _ in range(MAX_REDRAWS):
            idx = rng.integers(0, n, size=n)
            try:
                replicates[i] = float(metric_fn(*(c[idx] for c in columns)))
                break
            except MetricError:
                continue
        else:
            raise DegenerateResampling(
                f"replicate {i}: metric undefined on {MAX_REDRAWS} consecutive resamples"
            )

    alpha = (1.0 - level) / 2.0
    ci_low, ci_high = np.percentile(replicates, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return MetricReport(
        metric=metric_name,
        point=point,
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        n=n,
        n_boot=n_boot,
        seed=int(seed),
    )


@dataclass(frozen=True)
class MeanStd:
    mean: float
    std: float


def aggregate_mean_std(values) -> MeanStd:
    """Arithmetic mean and population standard deviation (divide by k)."""
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise MetricError("need at least one value to aggregate")
    return MeanStd(mean=float(values.mean()), std=float(values.std()))
