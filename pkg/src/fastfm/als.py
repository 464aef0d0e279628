"""Coordinate-descent solver (ALS) for regression and probit-MAP
classification.

Every scalar parameter theta with per-sample linear coefficient
h_n = d y_n / d theta and residual e_n = y_n - target_n is replaced by the
exact minimiser of the regularized squared loss in that coordinate:

    theta' = (theta * sum h^2 - sum h e) / (sum h^2 + lambda)

The update order is fixed (w0, then w by ascending feature, then V factor-
major) and the e/q caches are rebuilt at the start of every sweep, so a
warm-started continuation replays exactly the arithmetic of one long run.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels as _k
from .base import BaseFMEstimator, build_config
from .exceptions import DataError, DivergenceError, NotFittedError, \
    StaleCachesError
from .model import FitReport, FMParams, SampleCaches, SolverConfig, \
    build_caches, caches_max_deviation, init_params, predict, predict_proba
from .rng import Rng
from .sparse import LabeledData, SparseRowMatrix, to_column_major
from .validation import as_labeled_data, check_classification_labels

CACHE_CONSISTENCY_TOL = 1e-9


def regularized_objective(e: np.ndarray, params: FMParams,
                          config: SolverConfig) -> float:
    """0.5*sum e^2 + 0.5*(lam_w ||w||^2 + lam_V ||V||^2 + lam_w0 w0^2)."""
    return float(0.5 * np.dot(e, e)
                 + 0.5 * config.l2_reg_w * np.dot(params.w, params.w)
                 + 0.5 * config.l2_reg_V * np.sum(params.V * params.V)
                 + 0.5 * config.l2_reg_w0 * params.w0 ** 2)


def _check_warm(params: FMParams, X: SparseRowMatrix, config: SolverConfig):
    if params.p != X.n_cols:
        raise DataError(f"warm-start parameters cover {params.p} features, "
                        f"data has {X.n_cols}")
    if params.k != config.rank:
        raise DataError(f"warm-start rank {params.k} != config rank "
                        f"{config.rank}")


def _als_sweeps(data: LabeledData, config: SolverConfig, params: FMParams,
                n_sweeps: int, classify: bool) -> FitReport:
    """Run n_sweeps full coordinate sweeps in place; returns the report."""
    X = data.X
    Xc = to_column_major(X)
    w0a = np.array([params.w0])
    objectives = np.empty(n_sweeps)
    t0 = time.perf_counter()
    z = np.empty(X.n_rows)
    for sweep in range(n_sweeps):
        caches = build_caches(params, X)
        if classify:
            _k.probit_working_targets(caches.y_hat, data.y, z)
            target = z
        else:
            target = data.y
        e = caches.y_hat - target
        _k.als_sweep(Xc.col_offsets, Xc.row_indices, Xc.values, e, caches.q,
                     w0a, params.w, params.V,
                     config.l2_reg_w0, config.l2_reg_w, config.l2_reg_V)
        params.w0 = float(w0a[0])
        if not (np.isfinite(params.w0) and np.all(np.isfinite(e))):
            raise DivergenceError("non-finite residuals in ALS sweep",
                                  iteration=sweep)
        if classify:
            yhat = predict(params, X, n_threads=1)
            objectives[sweep] = float(
                _k.probit_nll(yhat, data.y)
                + 0.5 * config.l2_reg_w * np.dot(params.w, params.w)
                + 0.5 * config.l2_reg_V * np.sum(params.V * params.V)
                + 0.5 * config.l2_reg_w0 * params.w0 ** 2)
        else:
            objectives[sweep] = regularized_objective(e, params, config)
    return FitReport(objective_per_iter=objectives, n_iter_done=n_sweeps,
                     wall_time=time.perf_counter() - t0)


def als_fit(data: LabeledData, config: SolverConfig,
            warm: FMParams | None = None) -> tuple[FMParams, FitReport]:
    """Regression fit: config.n_iter full sweeps from warm or fresh init."""
    if config.task != "regression":
        raise DataError("als_fit handles task='regression'; use "
                        "als_fit_classification for labels")
    if warm is None:
        params = init_params(data.X.n_cols, config, Rng(config.seed))
    else:
        _check_warm(warm, data.X, config)
        params = warm.copy()
    report = _als_sweeps(data, config, params, config.n_iter, classify=False)
    return params, report


def als_fit_classification(data: LabeledData, config: SolverConfig,
                           warm: FMParams | None = None
                           ) -> tuple[FMParams, FitReport]:
    """Probit MAP: each outer iteration remaps labels onto the working
    targets (the mean of the sign-constrained unit normal around y_hat)
    and takes one regression sweep against them."""
    check_classification_labels(data.y)
    if warm is None:
        params = init_params(data.X.n_cols, config, Rng(config.seed))
    else:
        _check_warm(warm, data.X, config)
        params = warm.copy()
    report = _als_sweeps(data, config, params, config.n_iter, classify=True)
    return params, report


def als_continue(params: FMParams, caches: SampleCaches, data: LabeledData,
                 config: SolverConfig, n_more_iter: int
                 ) -> tuple[FMParams, FitReport]:
    """Continue a fitted model; bit-identical to a longer single run.

    caches must be consistent with (params, data.X); they are verified and
    then rebuilt sweep-by-sweep exactly as a fresh run would.
    """
    _check_warm(params, data.X, config)
    if caches.y_hat.shape[0] != data.X.n_rows or \
            caches.q.shape != (params.k, data.X.n_rows):
        raise StaleCachesError("cache shapes do not match the data")
    dev = caches_max_deviation(params, data.X, caches)
    if dev > CACHE_CONSISTENCY_TOL:
        raise StaleCachesError(
            f"caches disagree with parameters by {dev:.3e} relative "
            f"(tolerance {CACHE_CONSISTENCY_TOL:.0e})")
    out = params.copy()
    classify = config.task == "classification"
    if classify:
        check_classification_labels(data.y)
    report = _als_sweeps(data, config, out, n_more_iter, classify=classify)
    return out, report


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

class _AlsBase(BaseFMEstimator):
    _task = "regression"

    def __init__(self, rank=8, n_iter=100, init_std=0.1, l2_reg=None,
                 l2_reg_w=None, l2_reg_V=None, random_state=123):
        self.rank = rank
        self.n_iter = n_iter
        self.init_std = init_std
        self.l2_reg = l2_reg
        self.l2_reg_w = l2_reg_w
        self.l2_reg_V = l2_reg_V
        self.random_state = random_state
        self._params = None
        self._data = None

    def _config(self, n_iter) -> SolverConfig:
        return build_config(self._task, rank=self.rank, n_iter=n_iter,
                            init_std=self.init_std, l2_reg=self.l2_reg,
                            l2_reg_w=self.l2_reg_w, l2_reg_V=self.l2_reg_V,
                            random_state=self.random_state)

    def fit(self, X, y, n_more_iter=None):
        """Fit from scratch, or continue the previous solution when
        n_more_iter is given."""
        if n_more_iter is not None:
            if self._params is None:
                raise NotFittedError("cannot continue before the first fit")
            if n_more_iter == 0:
                return self
            data = as_labeled_data(X, y, self._task)
            caches = build_caches(self._params, data.X)
            self._params, self.fit_report_ = als_continue(
                self._params, caches, data, self._config(n_more_iter),
                n_more_iter)
            return self
        data = as_labeled_data(X, y, self._task)
        config = self._config(self.n_iter)
        if self._task == "classification":
            self._params, self.fit_report_ = als_fit_classification(
                data, config)
        else:
            self._params, self.fit_report_ = als_fit(data, config)
        return self

    def predict(self, X):
        self._require_fitted()
        return predict(self._params, self._as_matrix(X))

    @staticmethod
    def _as_matrix(X):
        from .validation import as_row_matrix

        return as_row_matrix(X)


class FMRegression(_AlsBase):
    """Least-squares factorization machine fitted by coordinate descent."""

    _task = "regression"


class FMClassification(_AlsBase):
    """Probit-MAP factorization machine; labels in {-1, +1}."""

    _task = "classification"

    def predict_proba(self, X):
        """P(y = +1) = Phi(y_hat)."""
        self._require_fitted()
        return predict_proba(self._params, self._as_matrix(X))

    def predict(self, X):
        raw = super().predict(X)
        return np.where(raw >= 0.0, 1.0, -1.0)
