"""Stochastic gradient descent for square loss and sigmoid classification.

Per visited sample, every parameter theta with a nonzero coefficient
h_n = d y_hat_n / d theta moves by

    theta <- theta - step * (g_n * h_n + lambda_theta * theta)

with g_n the loss derivative in y_hat (the residual for square loss,
-y * sigma(-y y_hat) for the logistic loss on {-1,+1} labels). The decay is
applied per visit, which keeps the stochastic step an unbiased picture of
the full-batch regularized gradient exposed by loss_gradient below.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels as _k
from .base import BaseFMEstimator, build_config
from .exceptions import DataError, DivergenceError, NotFittedError
from .model import FitReport, FMParams, SolverConfig, build_caches, \
    init_params, predict
from .rng import Rng
from .sparse import LabeledData
from .validation import as_labeled_data, check_classification_labels

_LOSSES = ("square", "sigmoid", "bpr")


def sigmoid_stable(t: np.ndarray) -> np.ndarray:
    """Elementwise 1/(1+exp(-t)) without overflow on either tail."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def log_sigmoid_stable(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = -np.log1p(np.exp(-t[pos]))
    out[~pos] = t[~pos] - np.log1p(np.exp(t[~pos]))
    return out


def sgd_fit(data: LabeledData, config: SolverConfig,
            warm: FMParams | None = None, rng: Rng | None = None
            ) -> tuple[FMParams, FitReport]:
    """config.n_iter epochs over a seeded shuffled sample order."""
    if config.task == "classification":
        check_classification_labels(data.y)
        squared = False
    elif config.task == "regression":
        squared = True
    else:
        raise DataError("sgd_fit handles regression or classification")
    if rng is None:
        rng = Rng(config.seed)
    if warm is None:
        params = init_params(data.X.n_cols, config, rng)
    else:
        if warm.p != data.X.n_cols or warm.k != config.rank:
            raise DataError("warm-start dimensions do not match")
        params = warm.copy()
    X = data.X
    w0a = np.array([params.w0])
    sbuf = np.empty(config.rank)
    losses = np.empty(config.n_iter)
    t0 = time.perf_counter()
    for epoch in range(config.n_iter):
        order = rng.shuffled_indices(X.n_rows)
        total = _k.sgd_epoch(X.row_offsets, X.col_indices, X.values, data.y,
                             order, w0a, params.w, params.V,
                             config.l2_reg_w0, config.l2_reg_w,
                             config.l2_reg_V, config.step_size, squared,
                             sbuf)
        losses[epoch] = total / max(X.n_rows, 1)
        if not np.isfinite(losses[epoch]):
            raise DivergenceError(
                "SGD loss became non-finite; try a smaller step_size",
                iteration=epoch)
    params.w0 = float(w0a[0])
    if not (np.all(np.isfinite(params.w)) and np.all(np.isfinite(params.V))):
        raise DivergenceError(
            "SGD parameters became non-finite; try a smaller step_size",
            iteration=config.n_iter)
    return params, FitReport(objective_per_iter=losses,
                             n_iter_done=config.n_iter,
                             wall_time=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Full-batch analytic gradients (the finite-difference hook)
# ---------------------------------------------------------------------------

def _chain_gradient(params: FMParams, X, dloss_dyhat: np.ndarray
                    ) -> tuple[float, np.ndarray, np.ndarray]:
    """Backpropagate per-row loss derivatives through the model equation."""
    caches = build_caches(params, X)
    rows = X.row_ids()
    r = dloss_dyhat
    g_w0 = float(np.sum(r))
    rv = X.values * r[rows]                     # per-entry x * dL/dyhat
    g_w = np.bincount(X.col_indices, weights=rv, minlength=params.p)
    g_V = np.empty_like(params.V)
    x2r = X.values * rv                         # per-entry x^2 * dL/dyhat
    sq = np.bincount(X.col_indices, weights=x2r, minlength=params.p)
    for f in range(params.k):
        qf = caches.q[f]
        g_V[f] = np.bincount(X.col_indices, weights=rv * qf[rows],
                             minlength=params.p) - params.V[f] * sq
    return g_w0, g_w, g_V


def full_batch_loss(params: FMParams, data_or_pair, task: str,
                    config: SolverConfig | None = None) -> float:
    """Training loss matching loss_gradient, regularization included."""
    lam_w0, lam_w, lam_v = _lambdas(config)
    reg = 0.5 * (lam_w0 * params.w0 ** 2
                 + lam_w * float(np.dot(params.w, params.w))
                 + lam_v * float(np.sum(params.V * params.V)))
    if task == "square":
        data = data_or_pair
        e = predict(params, data.X, n_threads=1) - data.y
        return 0.5 * float(np.dot(e, e)) + reg
    if task == "sigmoid":
        data = data_or_pair
        m = data.y * predict(params, data.X, n_threads=1)
        return -float(np.sum(log_sigmoid_stable(m))) + reg
    if task == "bpr":
        X, winners, losers = data_or_pair
        yhat = predict(params, X, n_threads=1)
        delta = yhat[winners] - yhat[losers]
        return -float(np.sum(log_sigmoid_stable(delta))) + reg
    raise DataError(f"unknown task {task!r}; expected one of {_LOSSES}")


def _lambdas(config: SolverConfig | None):
    if config is None:
        return 0.0, 0.0, 0.0
    return config.l2_reg_w0, config.l2_reg_w, config.l2_reg_V


def loss_gradient(params: FMParams, data_or_pair, task: str,
                  config: SolverConfig | None = None) -> np.ndarray:
    """Analytic full-batch gradient, flat layout (w0, w, V row-major).

    task 'square' and 'sigmoid' take LabeledData; 'bpr' takes a tuple
    (X, winner_rows, loser_rows) covering every pair once.
    """
    lam_w0, lam_w, lam_v = _lambdas(config)
    if task == "square":
        data = data_or_pair
        r = predict(params, data.X, n_threads=1) - data.y
        X = data.X
    elif task == "sigmoid":
        data = data_or_pair
        yhat = predict(params, data.X, n_threads=1)
        r = -data.y * sigmoid_stable(-data.y * yhat)
        X = data.X
    elif task == "bpr":
        X, winners, losers = data_or_pair
        yhat = predict(params, X, n_threads=1)
        m = sigmoid_stable(-(yhat[winners] - yhat[losers]))
        r = np.zeros(X.n_rows)
        np.add.at(r, winners, -m)
        np.add.at(r, losers, m)
    else:
        raise DataError(f"unknown task {task!r}; expected one of {_LOSSES}")
    g_w0, g_w, g_V = _chain_gradient(params, X, r)
    if task == "bpr":
        g_w0 = 0.0  # d(delta)/d(w0) = 1 - 1 exactly; drop the summation dust
    g_w0 += lam_w0 * params.w0
    g_w = g_w + lam_w * params.w
    g_V = g_V + lam_v * params.V
    return np.concatenate(([g_w0], g_w, g_V.reshape(-1)))


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

class _SgdBase(BaseFMEstimator):
    _task = "regression"

    def __init__(self, rank=8, n_iter=100, init_std=0.1, l2_reg=None,
                 l2_reg_w=None, l2_reg_V=None, step_size=0.01,
                 random_state=123):
        self.rank = rank
        self.n_iter = n_iter
        self.init_std = init_std
        self.l2_reg = l2_reg
        self.l2_reg_w = l2_reg_w
        self.l2_reg_V = l2_reg_V
        self.step_size = step_size
        self.random_state = random_state
        self._params = None
        self._rng = None

    def _config(self, n_iter) -> SolverConfig:
        return build_config(self._task, rank=self.rank, n_iter=n_iter,
                            init_std=self.init_std, l2_reg=self.l2_reg,
                            l2_reg_w=self.l2_reg_w, l2_reg_V=self.l2_reg_V,
                            step_size=self.step_size,
                            random_state=self.random_state)

    def fit(self, X, y, n_more_iter=None):
        data = as_labeled_data(X, y, self._task)
        if n_more_iter is not None:
            if self._params is None:
                raise NotFittedError("cannot continue before the first fit")
            if n_more_iter == 0:
                return self
            self._params, self.fit_report_ = sgd_fit(
                data, self._config(n_more_iter), warm=self._params,
                rng=self._rng)
            return self
        self._rng = Rng(self.random_state)
        self._params, self.fit_report_ = sgd_fit(
            data, self._config(self.n_iter), rng=self._rng)
        return self

    def predict(self, X):
        self._require_fitted()
        from .validation import as_row_matrix

        return predict(self._params, as_row_matrix(X))


class FMRegression(_SgdBase):
    """Square-loss FM fitted by per-sample gradient steps."""

    _task = "regression"


class FMClassification(_SgdBase):
    """Sigmoid log-loss FM; labels in {-1, +1}."""

    _task = "classification"

    def predict_proba(self, X):
        """P(y = +1) = sigma(y_hat)."""
        self._require_fitted()
        from .validation import as_row_matrix

        raw = predict(self._params, as_row_matrix(X))
        return sigmoid_stable(raw)

    def predict(self, X):
        raw = super().predict(X)
        return np.where(raw >= 0.0, 1.0, -1.0)
