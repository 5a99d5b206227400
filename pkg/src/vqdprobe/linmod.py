"""Numerical core: standardization, Lasso via cyclic coordinate descent,
L2-regularized logistic regression via damped Newton, and regularization paths.

Objectives (n samples, d features, unpenalized intercept b):

* Lasso:     (1/2n) ||y - Xw - b||^2 + lam * ||w||_1
* Logistic:  (1/n) sum_i log(1 + exp(-s_i (x_i.w + b))) + (lam/2) ||w||^2,
  with s_i in {-1,+1}.

The 1/n scaling keeps lam comparable across training subsets of different
sizes. Regression targets are the raw 1..7 scores.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Dimension

log = logging.getLogger(__name__)

#: Floor for per-column standard deviations; constant columns standardize to 0.
STD_EPS = 1e-8

LASSO_TOL = 1e-6
LASSO_MAX_SWEEPS = 10000
LASSO_KKT_TOL = 1e-6
LOGISTIC_GRAD_TOL = 1e-6
LOGISTIC_MAX_ITER = 200
GRID_SIZE = 50
GRID_RATIO = 1e-3
LOGISTIC_LAMBDA_MAX = 1.0


class LinmodError(Exception):
    pass


class TooFewRows(LinmodError):
    pass


class SingleClass(LinmodError):
    pass


class DimMismatch(LinmodError):
    pass


class NonConvergence(LinmodError):
    pass


class Task(enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class Standardizer:
    """Per-column mean/std computed on the training split only."""

    means: np.ndarray
    stds: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.means)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimMismatch(f"expected {self.dim} columns, got shape {X.shape}")
        return (X - self.means) / self.stds


def fit_standardizer(X: np.ndarray) -> Standardizer:
    """Column means and population stds; stds below STD_EPS are clamped so the
    transform of a constant column is exactly zero."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows(f"need at least 2 rows to standardize, got shape {X.shape}")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds < STD_EPS, STD_EPS, stds)
    return Standardizer(means=means, stds=stds)


@dataclass(frozen=True)
class FitResult:
    weights: np.ndarray
    intercept: float
    n_iter: int
    converged: bool


def _soft_threshold(z: float, g: float) -> float:
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


def _center(X: np.ndarray, y: np.ndarray):
    """Shared centering used by both the grid and the solver so that the
    lambda_max boundary is bit-exact (soft-threshold kills every coordinate)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    xbar = X.mean(axis=0)
    ybar = float(y.mean())
    Xc = np.asfortranarray(X - xbar)
    yc = y - ybar
    return Xc, yc, xbar, ybar


def lasso_objective(X: np.ndarray, y: np.ndarray, weights: np.ndarray, intercept: float, lam: float) -> float:
    r = np.asarray(y, float) - np.asarray(X, float) @ weights - intercept
    n = len(y)
    return float(r @ r) / (2.0 * n) + lam * float(np.abs(weights).sum())


def lasso_kkt_violation(X, y, weights, intercept, lam) -> float:
    """Worst first-order optimality violation: for active coordinates
    |g_j + lam*sign(w_j)|, for inactive ones max(|g_j| - lam, 0), with
    g_j = (1/n) x_j . (Xw + b - y)."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n = len(y)
    g = X.T @ (X @ weights + intercept - y) / n
    active = weights != 0.0
    worst = 0.0
    if active.any():
        worst = float(np.abs(g[active] + lam * np.sign(weights[active])).max())
    if (~active).any():
        worst = max(worst, float(np.maximum(np.abs(g[~active]) - lam, 0.0).max()))
    return worst


def lasso_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    w0: np.ndarray | None = None,
    tol: float = LASSO_TOL,
    max_sweeps: int = LASSO_MAX_SWEEPS,
    objective_trace: list | None = None,
) -> FitResult:
    """Cyclic coordinate descent with soft-thresholding.

    Converges when the largest coordinate change in a sweep drops below tol
    and the KKT residual is certified; on sweep exhaustion the best iterate is
    returned with converged=False. The intercept is recovered as mean(y - Xw).
    """
    if lam < 0:
        raise LinmodError(f"lambda must be nonnegative, got {lam}")
    Xc, yc, xbar, ybar = _center(X, y)
    n, d = Xc.shape
    col_norm = np.einsum("ij,ij->j", Xc, Xc) / n
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=float)
    r = yc - Xc @ w

    sweeps = 0
    converged = False
    sweep_tol = tol
    last_violation = math.inf
    while sweeps < max_sweeps:
        sweeps += 1
        delta_max = 0.0
        for j in range(d):
            nj = col_norm[j]
            wj = w[j]
            if nj <= 0.0:
                # standardized constant column: only w_j = 0 is optimal
                if wj != 0.0:
                    r += wj * Xc[:, j]
                    w[j] = 0.0
                continue
            rho = (Xc[:, j] @ r) / n + nj * wj
            wn = _soft_threshold(rho, lam) / nj
            if wn != wj:
                r -= (wn - wj) * Xc[:, j]
                w[j] = wn
                change = abs(wn - wj)
                if change > delta_max:
                    delta_max = change
        if objective_trace is not None:
            b = ybar - float(xbar @ w)
            objective_trace.append(lasso_objective(X, y, w, b, lam))
        if delta_max < sweep_tol:
            b = ybar - float(xbar @ w)
            violation = lasso_kkt_violation(X, y, w, b, lam)
            if violation <= LASSO_KKT_TOL:
                converged = True
                break
            if delta_max == 0.0 or violation > 0.9 * last_violation:
                # exact fixed point, or the certificate has stalled (flat
                # directions of an underdetermined design): keep best iterate
                break
            last_violation = violation
            # tighten the sweep criterion until the certificate holds
            sweep_tol = max(sweep_tol / 10.0, 1e-15)

    intercept = ybar - float(xbar @ w)
    if not converged:
        log.warning("lasso did not certify convergence in %d sweeps (lam=%g)", sweeps, lam)
    return FitResult(weights=w, intercept=intercept, n_iter=sweeps, converged=converged)


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest lam at which the Lasso solution is entirely zero:
    max_j |x_j . (y - ybar)| / n on the centered design."""
    Xc, yc, _, _ = _center(X, y)
    n, d = Xc.shape
    best = 0.0
    for j in range(d):
        v = abs(float(Xc[:, j] @ yc)) / n
        if v > best:
            best = v
    return best


def lambda_grid(X: np.ndarray, y: np.ndarray, task: Task, size: int = GRID_SIZE) -> np.ndarray:
    """Log-spaced grid of size values, strictly decreasing from lambda_max down
    to lambda_max * 1e-3. For classification the anchor is fixed at 1.0."""
    if task == Task.CLASSIFICATION:
        lam_max = LOGISTIC_LAMBDA_MAX
    else:
        lam_max = lasso_lambda_max(X, y)
        if lam_max <= 0.0:
            lam_max = 1e-12  # degenerate constant target; keep the grid well formed
    return lam_max * np.logspace(0.0, math.log10(GRID_RATIO), num=size)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_objective(X, y, weights, intercept, lam) -> float:
    X = np.asarray(X, float)
    s = np.where(np.asarray(y, float) > 0.5, 1.0, -1.0)
    z = X @ weights + intercept
    return float(np.logaddexp(0.0, -s * z).mean()) + 0.5 * lam * float(weights @ weights)


def logistic_gradient(X, y, weights, intercept, lam):
    """Gradient of the logistic objective, (d+1,) with the intercept last."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n = len(y)
    p = _sigmoid(X @ weights + intercept)
    gw = X.T @ (p - y) / n + lam * weights
    gb = float((p - y).mean())
    return np.append(gw, gb)


def logistic_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    w0: np.ndarray | None = None,
    b0: float = 0.0,
    tol: float = LOGISTIC_GRAD_TOL,
    max_iter: int = LOGISTIC_MAX_ITER,
) -> FitResult:
    """Damped Newton iterations until the full-objective gradient norm is <= tol.

    y holds {0,1} labels; both classes must be present and lam must be > 0 so
    the weight block of the Hessian stays positive definite.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if lam <= 0:
        raise LinmodError(f"logistic regularization must be positive, got {lam}")
    n_pos = int((y > 0.5).sum())
    if n_pos == 0 or n_pos == n:
        raise SingleClass("labels contain a single class")

    w = np.zeros(d) if w0 is None else np.array(w0, dtype=float)
    b = float(b0)
    obj = logistic_objective(X, y, w, b, lam)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = X @ w + b
        p = _sigmoid(z)
        gw = X.T @ (p - y) / n + lam * w
        gb = float((p - y).mean())
        gnorm = math.sqrt(float(gw @ gw) + gb * gb)
        if gnorm <= tol:
            converged = True
            break

        dvec = np.maximum(p * (1.0 - p), 1e-12)
        Xd = X * dvec[:, None]
        H = np.empty((d + 1, d + 1))
        H[:d, :d] = X.T @ Xd / n + lam * np.eye(d)
        H[:d, d] = Xd.sum(axis=0) / n
        H[d, :d] = H[:d, d]
        H[d, d] = float(dvec.mean())
        g = np.append(gw, gb)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]

        # backtracking line search on the objective (Armijo)
        t = 1.0
        descent = float(g @ step)
        while t > 2.0**-40:
            w_new = w - t * step[:d]
            b_new = b - t * step[d]
            obj_new = logistic_objective(X, y, w_new, b_new, lam)
            if obj_new <= obj - 1e-4 * t * descent:
                break
            t /= 2.0
        w = w - t * step[:d]
        b = b - t * step[d]
        obj = logistic_objective(X, y, w, b, lam)

    if not converged:
        log.warning("logistic solver hit %d iterations (lam=%g)", max_iter, lam)
    return FitResult(weights=w, intercept=b, n_iter=it, converged=converged)


def lasso_path(X, y, lambdas, tol: float = LASSO_TOL) -> list[FitResult]:
    """Warm-started fits along a decreasing lambda sequence."""
    results = []
    w = None
    for lam in lambdas:
        fit = lasso_fit(X, y, float(lam), w0=w, tol=tol)
        results.append(fit)
        w = fit.weights
    return results


def logistic_path(X, y, lambdas) -> list[FitResult]:
    """Warm-started logistic fits along a decreasing lambda sequence."""
    results = []
    w = None
    b = 0.0
    for lam in lambdas:
        fit = logistic_fit(X, y, float(lam), w0=w, b0=b)
        results.append(fit)
        w, b = fit.weights, fit.intercept
    return results


@dataclass(frozen=True)
class TrainMeta:
    n_train: int
    seed: int
    solver_iterations: int


@dataclass(frozen=True)
class ProbeModel:
    """A fitted linear probe: standardizer, weights, intercept, and provenance."""

    task: Task
    weights: np.ndarray
    intercept: float
    lam: float
    standardizer: Standardizer
    dimension: Dimension
    backend_name: str
    train_meta: TrainMeta
    binarization_threshold: int | None = None
    converged: bool = True

    def __post_init__(self):
        if len(self.weights) != self.standardizer.dim:
            raise DimMismatch("weights length does not match standardizer dimension")
        if self.task == Task.CLASSIFICATION and self.binarization_threshold is None:
            raise LinmodError("classification probes must carry a binarization threshold")

    def n_active(self) -> int:
        return int(np.count_nonzero(self.weights))


def predict(model: ProbeModel, X_raw: np.ndarray) -> np.ndarray:
    """Probe output per row: the linear score for regression, the sigmoid of it
    for classification (a probability in (0,1))."""
    Z = model.standardizer.transform(X_raw)
    scores = Z @ model.weights + model.intercept
    if model.task == Task.CLASSIFICATION:
        return _sigmoid(scores)
    return scores


def model_to_dict(model: ProbeModel) -> dict:
    return {
        "task": model.task.value,
        "backend_name": model.backend_name,
        "dimension": model.dimension.value,
        "lambda": model.lam,
        "intercept": model.intercept,
        "weights": [float(v) for v in model.weights],
        "means": [float(v) for v in model.standardizer.means],
        "stds": [float(v) for v in model.standardizer.stds],
        "binarization_threshold": model.binarization_threshold,
        "train_meta": {
            "n_train": model.train_meta.n_train,
            "seed": model.train_meta.seed,
            "solver_iterations": model.train_meta.solver_iterations,
        },
        "converged": model.converged,
    }


def model_from_dict(doc: dict) -> ProbeModel:
    meta = doc["train_meta"]
    return ProbeModel(
        task=Task(doc["task"]),
        weights=np.array(doc["weights"], dtype=float),
        intercept=float(doc["intercept"]),
        lam=float(doc["lambda"]),
        standardizer=Standardizer(
            means=np.array(doc["means"], dtype=float),
            stds=np.array(doc["stds"], dtype=float),
        ),
        dimension=Dimension(doc["dimension"]),
        backend_name=doc["backend_name"],
        train_meta=TrainMeta(
            n_train=int(meta["n_train"]),
            seed=int(meta["seed"]),
            solver_iterations=int(meta["solver_iterations"]),
        ),
        binarization_threshold=doc.get("binarization_threshold"),
        converged=bool(doc.get("converged", True)),
    )


def save_model(model: ProbeModel, path) -> None:
    """JSON with full round-trip float precision (repr serialization)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> ProbeModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
