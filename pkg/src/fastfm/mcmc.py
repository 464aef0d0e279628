"""Bayesian factorization machine fitted by Gibbs sampling.

Model: y_n ~ Normal(y_hat_n, 1/alpha), every parameter theta carries a
Normal(mu_g, 1/lambda_g) prior in one of k+2 groups ({w0}, {w_i}, and one
group per latent dimension), and each (lambda_g, mu_g) pair carries a
conjugate normal-gamma hyperprior with constants

    alpha  ~ Gamma(ALPHA_0, BETA_0)
    lambda ~ Gamma(A_LAMBDA, B_LAMBDA),  mu | lambda ~ Normal(MU_0, 1/(GAMMA_0 lambda))

all set to weakly informative ones below. Classification uses the probit
augmentation: a unit-variance latent response truncated to the label's
halfline replaces y, and the noise precision stays fixed at 1.

The single-site sweep cannot cross between the mirrored modes +-V[f, :]
the even pair term induces, so each iteration ends with an always-accepted
sign-flip move per factor (see factor_sign_flips); predictions are
invariant under it.

There is no standalone fit: fit_predict carries a McmcState so the
posterior-mean prediction accumulates across warm-started calls, and the
random stream consumption order is static (alpha, then each group's
lambda and mu, then parameters in coordinate order, then one sign-flip
uniform per factor, then the augmentation latents), which makes a split
run reproduce a long run exactly.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .base import BaseFMEstimator, build_config
from .exceptions import DataError, DivergenceError, FastFMError
from .model import FitReport, FMParams, SolverConfig, build_caches, \
    init_params, predict
from .rng import Rng
from .sparse import LabeledData, SparseRowMatrix, to_column_major
from .validation import as_labeled_data, as_row_matrix, \
    check_classification_labels

ALPHA_0 = 1.0
BETA_0 = 1.0
A_LAMBDA = 1.0
B_LAMBDA = 1.0
GAMMA_0 = 1.0
MU_0 = 0.0


@dataclass
class McmcOptions:
    """Sampler hooks; defaults reproduce the documented sampler.

    The non-default settings exist for validation harnesses: freezing the
    hyperparameters, scaling the parameter-draw standard deviation (used to
    prove the posterior-quantile test catches a broken sampler), and
    starting the chain from chosen values.
    """

    sample_hypers: bool = True
    sample_noise: bool = True
    theta_sd_scale: float = 1.0
    init_alpha: float = 1.0
    init_lambda: float | np.ndarray = 1.0
    init_mu: float | np.ndarray = 0.0
    init_params: FMParams | None = None


def hyper_group_names(rank: int) -> list[str]:
    return ["w0", "w"] + [f"v_{f}" for f in range(rank)]


@dataclass
class HyperGroup:
    """Read-only view of one prior group."""

    name: str
    size: int
    lam: float
    mu: float


@dataclass
class McmcState:
    """Everything a warm-started chain needs to continue."""

    params: FMParams
    alpha: float
    lambdas: np.ndarray
    mus: np.ndarray
    rng: Rng
    pred_sum: np.ndarray
    n_samples_accumulated: int
    task: str
    train_key: tuple
    test_key: tuple
    z: np.ndarray | None = None
    trace_alpha: list = field(default_factory=list)
    trace_lambdas: list = field(default_factory=list)
    trace_mus: list = field(default_factory=list)

    @property
    def n_iter_done(self) -> int:
        return len(self.trace_alpha)

    def groups(self) -> list[HyperGroup]:
        names = hyper_group_names(self.params.k)
        sizes = [1, self.params.p] + [self.params.p] * self.params.k
        return [HyperGroup(n, s, float(l), float(m))
                for n, s, l, m in zip(names, sizes, self.lambdas, self.mus)]


def matrix_fingerprint(X: SparseRowMatrix) -> tuple:
    # memoised: the arrays are frozen after construction
    if X._fingerprint is None:
        crc = zlib.crc32(np.ascontiguousarray(X.row_offsets).tobytes())
        crc = zlib.crc32(np.ascontiguousarray(X.col_indices).tobytes(), crc)
        crc = zlib.crc32(np.ascontiguousarray(X.values).tobytes(), crc)
        X._fingerprint = (X.n_rows, X.n_cols, X.nnz, crc)
    return X._fingerprint


def _expand(value, size, name) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(size, float(arr))
    if arr.shape != (size,):
        raise DataError(f"{name} must be scalar or length {size}")
    return arr.copy()


def _init_state(train: LabeledData, X_test: SparseRowMatrix,
                config: SolverConfig, task: str,
                options: McmcOptions) -> McmcState:
    p = train.X.n_cols
    n_groups = config.rank + 2
    rng = Rng(config.seed)
    if options.init_params is not None:
        if options.init_params.p != p or options.init_params.k != config.rank:
            raise DataError("init_params dimensions do not match")
        params = options.init_params.copy()
    else:
        params = init_params(p, config, rng)
    state = McmcState(
        params=params,
        alpha=float(options.init_alpha),
        lambdas=_expand(options.init_lambda, n_groups, "init_lambda"),
        mus=_expand(options.init_mu, n_groups, "init_mu"),
        rng=rng,
        pred_sum=np.zeros(X_test.n_rows),
        n_samples_accumulated=0,
        task=task,
        train_key=matrix_fingerprint(train.X),
        test_key=matrix_fingerprint(X_test),
    )
    if task == "classification":
        yhat = predict(params, train.X, n_threads=1)
        z = np.empty(train.n_rows)
        _k.draw_probit_latents(yhat, train.y, rng.state_array, z)
        state.z = z
    return state


def _check_state(state: McmcState, train: LabeledData,
                 X_test: SparseRowMatrix, config: SolverConfig, task: str):
    if state.task != task:
        raise DataError(f"state was built for task {state.task!r}")
    if state.params.p != train.X.n_cols or state.params.k != config.rank:
        raise DataError("state dimensions do not match train matrix/config")
    if state.train_key != matrix_fingerprint(train.X):
        raise DataError("training data changed between warm-started calls")
    if state.test_key != matrix_fingerprint(X_test):
        raise DataError("test matrix changed between warm-started calls; "
                        "start a fresh state to predict new rows")


def _run_chain(train: LabeledData, X_test: SparseRowMatrix,
               config: SolverConfig, state: McmcState, n_iter: int,
               options: McmcOptions, classify: bool) -> FitReport:
    X = train.X
    Xc = to_column_major(X)
    n = X.n_rows
    s = state.rng.state_array
    params = state.params
    w0a = np.empty(1)
    yp = np.empty(X_test.n_rows)
    proba = np.empty(X_test.n_rows) if classify else None
    objectives = np.empty(n_iter)
    t0 = time.perf_counter()
    for it in range(n_iter):
        caches = build_caches(params, X)
        target = state.z if classify else train.y
        e = caches.y_hat - target
        if not classify and options.sample_noise:
            sse = float(np.dot(e, e))
            shape = ALPHA_0 + 0.5 * n
            rate = BETA_0 + 0.5 * sse
            state.alpha = float(_k.rng_gamma(s, shape)) / rate
        w0a[0] = params.w0
        if options.sample_hypers:
            _k.gibbs_sample_hypers(s, w0a, params.w, params.V,
                                   state.lambdas, state.mus,
                                   A_LAMBDA, B_LAMBDA, GAMMA_0, MU_0)
        _k.gibbs_sweep(Xc.col_offsets, Xc.row_indices, Xc.values, e,
                       caches.q, w0a, params.w, params.V, state.alpha,
                       state.lambdas, state.mus, s, options.theta_sd_scale)
        _k.factor_sign_flips(s, params.V, state.mus)
        params.w0 = float(w0a[0])
        if not (np.isfinite(params.w0) and np.all(np.isfinite(e))
                and np.all(np.isfinite(state.lambdas))):
            raise DivergenceError("non-finite Gibbs draw",
                                  iteration=state.n_iter_done)
        if classify:
            yhat = predict(params, X, n_threads=1)
            _k.draw_probit_latents(yhat, train.y, s, state.z)
            objectives[it] = float(_k.probit_nll(yhat, train.y)) / max(n, 1)
        else:
            objectives[it] = float(np.sqrt(np.dot(e, e) / max(n, 1)))
        if X_test.n_rows:
            _k.csr_fm_predict(X_test.row_offsets, X_test.col_indices,
                              X_test.values, X_test.n_rows, params.w0,
                              params.w, params.V, yp)
            if classify:
                _k.normal_cdf_fill(yp, proba)
                state.pred_sum += proba
            else:
                state.pred_sum += yp
        state.n_samples_accumulated += 1
        state.trace_alpha.append(state.alpha)
        state.trace_lambdas.append(state.lambdas.copy())
        state.trace_mus.append(state.mus.copy())
    return FitReport(objective_per_iter=objectives, n_iter_done=n_iter,
                     wall_time=time.perf_counter() - t0)


_DEFAULT_OPTIONS = McmcOptions()


def _fit_predict(train, X_test, config, state, options, task):
    X_test = as_row_matrix(X_test)
    if X_test.n_cols > train.X.n_cols:
        raise DataError(
            f"test matrix has {X_test.n_cols} columns, train only "
            f"{train.X.n_cols}; drop the extra features or clip them")
    if X_test.n_cols < train.X.n_cols:
        X_test = X_test.with_n_cols(train.X.n_cols)
    if options is None:
        options = _DEFAULT_OPTIONS
    classify = task == "classification"
    if state is None:
        state = _init_state(train, X_test, config, task, options)
    else:
        _check_state(state, train, X_test, config, task)
    report = _run_chain(train, X_test, config, state, config.n_iter,
                        options, classify)
    if state.n_samples_accumulated == 0:
        # fresh zero-iteration call: expose the init-model prediction
        y_pred = predict(state.params, X_test)
        if classify:
            out = np.empty_like(y_pred)
            _k.normal_cdf_fill(y_pred, out)
            y_pred = out
    else:
        y_pred = state.pred_sum / state.n_samples_accumulated
    return y_pred, state, report


def mcmc_fit_predict(train: LabeledData, X_test, config: SolverConfig,
                     state: McmcState | None = None,
                     options: McmcOptions | None = None):
    """config.n_iter Gibbs iterations; returns the posterior-mean
    prediction over everything accumulated so far, the carried state, and
    the fit report."""
    return _fit_predict(train, X_test, config, state, options, "regression")


def mcmc_fit_predict_classification(train: LabeledData, X_test,
                                    config: SolverConfig,
                                    state: McmcState | None = None,
                                    options: McmcOptions | None = None):
    """Probit classification; the returned values are averaged
    Phi(y_hat) over the posterior draws, inside [0, 1]."""
    check_classification_labels(train.y)
    return _fit_predict(train, X_test, config, state, options,
                        "classification")


def reset_accumulator(state: McmcState) -> McmcState:
    """Discard accumulated predictions (burn-in support); traces stay."""
    state.pred_sum[:] = 0.0
    state.n_samples_accumulated = 0
    return state


def get_traces(state: McmcState) -> dict[str, np.ndarray]:
    """Per-iteration hyperparameter series, plus sigma_w = lambda_w^(-1/2)."""
    if state is None or state.n_iter_done == 0:
        return {}
    names = hyper_group_names(state.params.k)
    lam = np.asarray(state.trace_lambdas)
    mus = np.asarray(state.trace_mus)
    out = {"alpha": np.asarray(state.trace_alpha)}
    for g, name in enumerate(names):
        out[f"lambda_{name}"] = lam[:, g]
        out[f"mu_{name}"] = mus[:, g]
    out["sigma_w"] = out["lambda_w"] ** -0.5
    return out


def trace_csv_columns(rank: int) -> list[str]:
    cols = ["iter", "alpha", "lambda_w", "mu_w"]
    for f in range(rank):
        cols += [f"lambda_v_{f}", f"mu_v_{f}"]
    cols += ["lambda_w0", "mu_w0", "sigma_w"]
    return cols


def write_traces_csv(state: McmcState, path) -> None:
    """One row per iteration; full-precision decimals."""
    traces = get_traces(state)
    cols = trace_csv_columns(state.params.k)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(state.n_iter_done):
            row = [str(i + 1)]
            row += [repr(float(traces[c][i])) for c in cols[1:]]
            fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

class _McmcBase(BaseFMEstimator):
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
        self._state = None
        self._data_memo = None

    def _config(self, n_iter) -> SolverConfig:
        return build_config(self._task, rank=self.rank, n_iter=n_iter,
                            init_std=self.init_std, l2_reg=self.l2_reg,
                            l2_reg_w=self.l2_reg_w, l2_reg_V=self.l2_reg_V,
                            random_state=self.random_state)

    def fit(self, X, y):
        raise FastFMError(
            "the Gibbs sampler has no standalone fit: predictions are "
            "averaged over draws, so use fit_predict(X_train, y_train, "
            "X_test)")

    def fit_predict(self, X_train, y_train, X_test, n_more_iter=None):
        """Run the chain and return the accumulated posterior-mean
        prediction. n_more_iter continues the carried state; the test
        matrix must stay the same across continued calls."""
        # re-validating identical inputs would dominate a one-iteration
        # warm-started call, so the wrapped view is memoised by identity
        memo = self._data_memo
        if memo is not None and memo[0] is X_train and memo[1] is y_train:
            data = memo[2]
        else:
            data = as_labeled_data(X_train, y_train, self._task)
            self._data_memo = (X_train, y_train, data)
        if n_more_iter is None:
            self._state = None
            n_iter = self.n_iter
        else:
            n_iter = n_more_iter
        config = self._config(n_iter)
        fn = mcmc_fit_predict_classification \
            if self._task == "classification" else mcmc_fit_predict
        y_pred, self._state, self.fit_report_ = fn(
            data, X_test, config, state=self._state)
        self._params = self._state.params
        return y_pred

    @property
    def hyper_param_(self) -> np.ndarray:
        """[alpha, lambda_w, mu_w, lambda_V_0..k-1, mu_V_0..k-1]."""
        self._require_fitted()
        st = self._state
        return np.concatenate((
            [st.alpha, st.lambdas[1], st.mus[1]],
            st.lambdas[2:], st.mus[2:]))

    def get_state(self) -> McmcState:
        self._require_fitted()
        return self._state


class FMRegression(_McmcBase):
    """Bayesian least-squares FM; fit_predict returns posterior means."""

    _task = "regression"


class FMClassification(_McmcBase):
    """Bayesian probit FM; fit_predict returns P(y=+1) estimates."""

    _task = "classification"
