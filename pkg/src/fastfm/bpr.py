"""Pairwise ranking via stochastic ascent on ln sigma(y_a - y_b).

Comparison data is explicit: an array of (winner_row, loser_row) indices
into the design matrix. Each epoch draws |pairs| pairs uniformly with
replacement from that array and reports the mean ln sigma(delta) over the
draws it made.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels as _k
from .base import BaseFMEstimator, build_config
from .exceptions import DataError, DivergenceError, NotFittedError
from .model import FitReport, FMParams, SolverConfig, init_params, predict
from .rng import Rng
from .sparse import SparseRowMatrix
from .validation import as_pairs, as_row_matrix


def bpr_fit(X: SparseRowMatrix, pairs, config: SolverConfig,
            warm: FMParams | None = None, rng: Rng | None = None
            ) -> tuple[FMParams, FitReport]:
    """config.n_iter epochs of |pairs| uniform pair draws each."""
    if config.task != "ranking":
        raise DataError("bpr_fit requires task='ranking'")
    X = as_row_matrix(X)
    winners, losers = as_pairs(pairs, X.n_rows)
    if rng is None:
        rng = Rng(config.seed)
    if warm is None:
        params = init_params(X.n_cols, config, rng)
    else:
        if warm.p != X.n_cols or warm.k != config.rank:
            raise DataError("warm-start dimensions do not match")
        params = warm.copy()
    w0a = np.array([params.w0])
    sa = np.empty(config.rank)
    sb = np.empty(config.rank)
    scores = np.empty(config.n_iter)
    t0 = time.perf_counter()
    for epoch in range(config.n_iter):
        scores[epoch] = _k.bpr_epoch(
            X.row_offsets, X.col_indices, X.values, winners, losers,
            winners.shape[0], rng.state_array, w0a, params.w, params.V,
            config.l2_reg_w0, config.l2_reg_w, config.l2_reg_V,
            config.step_size, sa, sb)
        if not np.isfinite(scores[epoch]):
            raise DivergenceError(
                "BPR objective became non-finite; try a smaller step_size",
                iteration=epoch)
    params.w0 = float(w0a[0])
    if not (np.all(np.isfinite(params.w)) and np.all(np.isfinite(params.V))):
        raise DivergenceError(
            "BPR parameters became non-finite; try a smaller step_size",
            iteration=config.n_iter)
    return params, FitReport(objective_per_iter=scores,
                             n_iter_done=config.n_iter,
                             wall_time=time.perf_counter() - t0)


def pairwise_accuracy(params: FMParams, X, pairs) -> float:
    """Fraction of pairs whose winner outscores its loser."""
    X = as_row_matrix(X)
    winners, losers = as_pairs(pairs, X.n_rows)
    yhat = predict(params, X)
    return float(np.mean(yhat[winners] > yhat[losers]))


def load_pairs_csv(path) -> np.ndarray:
    """`winner_row,loser_row` per line, 0-based; '#' lines skipped."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"bad pairs line {line!r}")
            rows.append((int(parts[0]), int(parts[1])))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def save_pairs_csv(path, pairs) -> None:
    arr = np.asarray(pairs, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in arr:
            fh.write(f"{a},{b}\n")


class FMRecommender(BaseFMEstimator):
    """BPR-trained FM scorer: fit on (X, pairs), rank rows by predict."""

    _task = "ranking"

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
        return build_config("ranking", rank=self.rank, n_iter=n_iter,
                            init_std=self.init_std, l2_reg=self.l2_reg,
                            l2_reg_w=self.l2_reg_w, l2_reg_V=self.l2_reg_V,
                            step_size=self.step_size,
                            random_state=self.random_state)

    def fit(self, X, pairs, n_more_iter=None):
        if n_more_iter is not None:
            if self._params is None:
                raise NotFittedError("cannot continue before the first fit")
            if n_more_iter == 0:
                return self
            self._params, self.fit_report_ = bpr_fit(
                X, pairs, self._config(n_more_iter), warm=self._params,
                rng=self._rng)
            return self
        self._rng = Rng(self.random_state)
        self._params, self.fit_report_ = bpr_fit(
            X, pairs, self._config(self.n_iter), rng=self._rng)
        return self

    def predict(self, X):
        self._require_fitted()
        return predict(self._params, as_row_matrix(X))
