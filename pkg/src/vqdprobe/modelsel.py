"""Validation-split selection of the regularization strength, and score
binarization targeting roughly 20% positive labels."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import linmod, metrics
from .corpus import SCORE_MAX, Dimension
from .embedstore import DesignMatrix
from .linmod import ProbeModel, Standardizer, Task, TrainMeta

log = logging.getLogger(__name__)

TARGET_POSITIVE_RATE = 0.20
THRESHOLD_CANDIDATES = tuple(range(2, SCORE_MAX + 1))


class SelectionError(Exception):
    pass


class EmptyValidation(SelectionError):
    pass


class SingleClass(SelectionError):
    pass


@dataclass(frozen=True)
class SelectionResult:
    chosen_lambda: float
    val_metric_by_lambda: tuple[tuple[float, float], ...]  # (lambda, metric), grid order
    selection_metric: str  # "spearman_val" or "auc_val"


def _val_metric(task: Task, preds: np.ndarray, y_val: np.ndarray) -> float:
    """Validation score of one candidate. Constant predictions carry no ranking
    information: scored 0.0 for Spearman; AUC's tie rule already yields 0.5."""
    if task == Task.REGRESSION:
        try:
            return metrics.spearman(preds, y_val)
        except metrics.ConstantInput:
            return 0.0
    return metrics.auc(preds, y_val.astype(int))


def select_lambda(
    train: DesignMatrix,
    val: DesignMatrix,
    task: Task,
    dimension: Dimension,
    backend_name: str,
    seed: int = 0,
    binarization_threshold: int | None = None,
    grid: np.ndarray | None = None,
) -> tuple[SelectionResult, ProbeModel]:
    """Fit the full warm-started path on the train split, score every lambda on
    the validation split, and refit the winner on the train split only.

    For classification ``train.y``/``val.y`` must already be binary labels and
    ``binarization_threshold`` records the cut that produced them. Ties in the
    validation metric resolve toward the larger lambda.
    """
    if len(val) == 0:
        raise EmptyValidation("validation split is empty")
    std = linmod.fit_standardizer(train.X)
    Xtr = std.transform(train.X)
    Xva = std.transform(val.X)

    if task == Task.CLASSIFICATION:
        for name, y in (("train", train.y), ("validation", val.y)):
            classes = np.unique(y)
            if len(classes) < 2:
                raise SingleClass(f"{name} labels contain a single class")

    if grid is None:
        grid = linmod.lambda_grid(Xtr, train.y, task)
    if task == Task.REGRESSION:
        fits = linmod.lasso_path(Xtr, train.y, grid)
    else:
        fits = linmod.logistic_path(Xtr, train.y, grid)

    trace: list[tuple[float, float]] = []
    best_i = 0
    best_metric = -np.inf
    for i, (lam, fit) in enumerate(zip(grid, fits)):
        preds = Xva @ fit.weights + fit.intercept
        m = _val_metric(task, preds, val.y)
        trace.append((float(lam), float(m)))
        if m > best_metric:  # strict: earlier (larger) lambda wins ties
            best_metric = m
            best_i = i

    chosen_lam = float(grid[best_i])
    # cold refit on train only at the chosen lambda
    if task == Task.REGRESSION:
        final = linmod.lasso_fit(Xtr, train.y, chosen_lam)
    else:
        final = linmod.logistic_fit(Xtr, train.y, chosen_lam)

    model = ProbeModel(
        task=task,
        weights=final.weights,
        intercept=final.intercept,
        lam=chosen_lam,
        standardizer=std,
        dimension=dimension,
        backend_name=backend_name,
        train_meta=TrainMeta(n_train=len(train), seed=int(seed), solver_iterations=final.n_iter),
        binarization_threshold=binarization_threshold,
        converged=final.converged,
    )
    result = SelectionResult(
        chosen_lambda=chosen_lam,
        val_metric_by_lambda=tuple(trace),
        selection_metric="spearman_val" if task == Task.REGRESSION else "auc_val",
    )
    return result, model


def positive_rate(scores, threshold: int) -> float:
    scores = np.asarray(scores)
    return float((scores >= threshold).mean())


def binarize_threshold(scores) -> int:
    """Cut t in {2..7} whose positive rate (score >= t) is closest to 20%,
    ties resolved toward the smaller t (more positives)."""
    scores = np.asarray(scores)
    if scores.size < 1:
        raise SelectionError("need at least one score")
    best_t = THRESHOLD_CANDIDATES[0]
    best_gap = abs(positive_rate(scores, best_t) - TARGET_POSITIVE_RATE)
    for t in THRESHOLD_CANDIDATES[1:]:
        gap = abs(positive_rate(scores, t) - TARGET_POSITIVE_RATE)
        if gap < best_gap:  # strict: smaller t wins ties
            best_gap = gap
            best_t = t
    rate = positive_rate(scores, best_t)
    if rate == 0.0 or rate == 1.0:
        log.warning("degenerate binarization at t=%d (positive rate %.2f)", best_t, rate)
    return best_t


def apply_binarization(scores, threshold: int) -> np.ndarray:
    """Binary labels: 1 iff score >= threshold."""
    if threshold not in THRESHOLD_CANDIDATES:
        raise SelectionError(f"threshold must be in {THRESHOLD_CANDIDATES}, got {threshold}")
    return (np.asarray(scores) >= threshold).astype(int)
