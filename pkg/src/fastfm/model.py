"""Model state, configuration, and the prediction kernels.

The prediction target is

    y(x) = w0 + sum_i w_i x_i + sum_{i<j} <v_i, v_j> x_i x_j

evaluated either literally (predict_naive, the reference oracle) or through
the factored identity

    sum_{i<j} <v_i,v_j> x_i x_j
        = 0.5 * sum_f [ (sum_i V[f,i] x_i)^2 - sum_i V[f,i]^2 x_i^2 ]

which costs O(nnz * k). V is stored factor-major (k x p): the coordinate
solvers sweep one latent dimension at a time and stream its row.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as _k
from .exceptions import DataError, ParseError
from .rng import Rng
from .sparse import SparseRowMatrix

TASKS = ("regression", "classification", "ranking")

MODEL_FORMAT_HEADER = "fastfm-model v1"


@dataclass
class SolverConfig:
    """Every solver knob in one place; validated on construction."""

    rank: int = 8
    n_iter: int = 100
    init_std: float = 0.1
    l2_reg_w: float = 0.0
    l2_reg_V: float = 0.0
    l2_reg_w0: float = 0.0
    step_size: float = 0.01
    seed: int = 123
    task: str = "regression"

    def __post_init__(self):
        if self.rank < 0:
            raise DataError("rank must be >= 0")
        if self.n_iter < 0:
            raise DataError("n_iter must be >= 0")
        if self.init_std < 0:
            raise DataError("init_std must be >= 0")
        for name in ("l2_reg_w", "l2_reg_V", "l2_reg_w0"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be >= 0")
        if self.step_size <= 0:
            raise DataError("step_size must be > 0")
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}; expected one of {TASKS}")

    def with_updates(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class FMParams:
    """w0, first-order weights w (p,), and latent factors V (k, p)."""

    w0: float
    w: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        self.V = np.ascontiguousarray(self.V, dtype=np.float64)
        if self.w.ndim != 1 or self.V.ndim != 2:
            raise DataError("w must be a vector and V a matrix")
        if self.V.shape[1] != self.w.shape[0]:
            raise DataError("V must have one column per feature")
        if not (np.isfinite(self.w0) and np.all(np.isfinite(self.w))
                and np.all(np.isfinite(self.V))):
            raise DataError("parameters must be finite")

    @property
    def p(self) -> int:
        return int(self.w.shape[0])

    @property
    def k(self) -> int:
        return int(self.V.shape[0])

    def copy(self) -> "FMParams":
        return FMParams(self.w0, self.w.copy(), self.V.copy())

    def flat(self) -> np.ndarray:
        """(w0, w, V row-major) as one vector; the gradient layout."""
        return np.concatenate(([self.w0], self.w, self.V.reshape(-1)))

    @classmethod
    def from_flat(cls, theta, p, k) -> "FMParams":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape[0] != 1 + p + k * p:
            raise DataError("flat parameter vector has the wrong length")
        return cls(float(theta[0]), theta[1:1 + p].copy(),
                   theta[1 + p:].reshape(k, p).copy())


@dataclass
class FitReport:
    """Per-iteration objective trace for a single fit call."""

    objective_per_iter: np.ndarray = field(
        default_factory=lambda: np.empty(0))
    n_iter_done: int = 0
    wall_time: float = 0.0


def init_params(p: int, config: SolverConfig, rng: Rng | None = None) -> FMParams:
    """Zero biases and weights; V ~ Normal(0, init_std^2) from the seeded
    stream (factor-major draw order)."""
    if rng is None:
        rng = Rng(config.seed)
    if config.init_std == 0.0:
        V = np.zeros((config.rank, p))
    else:
        V = rng.normals((config.rank, p)) * config.init_std
    return FMParams(0.0, np.zeros(p), V)


def _check_dims(params: FMParams, X: SparseRowMatrix):
    if X.n_cols > params.p:
        raise DataError(
            f"matrix has {X.n_cols} columns but the model knows {params.p} "
            "features")


def predict_naive(params: FMParams, x_cols, x_vals) -> float:
    """Literal double-loop evaluation over one sparse row; the test oracle.

    Kept in plain Python on purpose so it shares nothing with the factored
    kernel it is used to verify.
    """
    cols = np.asarray(x_cols, dtype=np.int64)
    vals = np.asarray(x_vals, dtype=np.float64)
    if cols.size and cols.max() >= params.p:
        raise DataError("column index out of range for these parameters")
    acc = params.w0
    for c, v in zip(cols, vals):
        acc += params.w[c] * v
    nnz = cols.shape[0]
    for a in range(nnz):
        for b in range(a + 1, nnz):
            inner = 0.0
            for f in range(params.k):
                inner += params.V[f, cols[a]] * params.V[f, cols[b]]
            acc += inner * vals[a] * vals[b]
    return float(acc)


def n_prediction_threads() -> int:
    """Row-parallel prediction width, from FASTFM_THREADS (default 1)."""
    raw = os.environ.get("FASTFM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def predict(params: FMParams, X: SparseRowMatrix,
            n_threads: int | None = None) -> np.ndarray:
    """Linear-time forward pass over all rows."""
    _check_dims(params, X)
    out = np.empty(X.n_rows)
    if n_threads is None:
        n_threads = n_prediction_threads()
    if n_threads > 1 and X.n_rows > 1:
        import numba

        numba.set_num_threads(min(n_threads, numba.config.NUMBA_NUM_THREADS))
        _k.csr_fm_predict_parallel(X.row_offsets, X.col_indices, X.values,
                                   X.n_rows, params.w0, params.w, params.V,
                                   out)
    else:
        _k.csr_fm_predict(X.row_offsets, X.col_indices, X.values, X.n_rows,
                          params.w0, params.w, params.V, out)
    return out


def predict_proba(params: FMParams, X: SparseRowMatrix) -> np.ndarray:
    """Probit link: Phi(y(x)), the probability of the +1 class."""
    raw = predict(params, X)
    out = np.empty_like(raw)
    _k.normal_cdf_fill(raw, out)
    return out


@dataclass
class SampleCaches:
    """Per-sample prediction state shared by the coordinate solvers.

    y_hat mirrors predict(params, X); q[f, n] = sum_i V[f, i] x_n[i]. Both
    are maintained incrementally inside a sweep and rebuilt from scratch at
    sweep boundaries, which keeps warm starts bit-exact.
    """

    y_hat: np.ndarray
    q: np.ndarray

    def copy(self) -> "SampleCaches":
        return SampleCaches(self.y_hat.copy(), self.q.copy())


def build_caches(params: FMParams, X: SparseRowMatrix) -> SampleCaches:
    _check_dims(params, X)
    y_hat = predict(params, X, n_threads=1)
    q = np.zeros((params.k, X.n_rows))
    _k.csr_q_matrix(X.row_offsets, X.col_indices, X.values, X.n_rows,
                    params.V, q)
    return SampleCaches(y_hat=y_hat, q=q)


def caches_max_deviation(params: FMParams, X: SparseRowMatrix,
                         caches: SampleCaches) -> float:
    """Largest relative disagreement between stored and recomputed caches."""
    fresh = build_caches(params, X)
    def rel(a, b):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
        return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
    return max(rel(fresh.y_hat, caches.y_hat), rel(fresh.q, caches.q))


# ---------------------------------------------------------------------------
# Model file format: line oriented, full precision, diffable
# ---------------------------------------------------------------------------

def save_model(params: FMParams) -> str:
    lines = [MODEL_FORMAT_HEADER,
             f"p {params.p}",
             f"k {params.k}",
             f"w0 {params.w0!r}",
             "w " + " ".join(repr(float(v)) for v in params.w)]
    for f in range(params.k):
        lines.append("V " + " ".join(repr(float(v)) for v in params.V[f]))
    return "\n".join(lines) + "\n"


def save_model_file(path, params: FMParams) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(save_model(params))


def _model_line(lines, field_name):
    try:
        line = next(lines)
    except StopIteration:
        raise ParseError(f"model file truncated: missing section "
                         f"{field_name!r}") from None
    name, _, rest = line.partition(" ")
    if name != field_name.split("[")[0]:
        raise ParseError(f"expected section {field_name!r}, found {name!r}")
    return rest


def load_model(text: str) -> FMParams:
    lines = iter(text.splitlines())
    try:
        header = next(lines)
    except StopIteration:
        raise ParseError("model file truncated: missing header") from None
    if header.strip() != MODEL_FORMAT_HEADER:
        raise ParseError(f"unsupported model format {header.strip()!r}; "
                         f"expected {MODEL_FORMAT_HEADER!r}")
    try:
        p = int(_model_line(lines, "p"))
        k = int(_model_line(lines, "k"))
        w0 = float(_model_line(lines, "w0"))
        w_text = _model_line(lines, "w")
    except ValueError as exc:
        raise ParseError(f"bad model scalar: {exc}") from None
    w = np.fromstring(w_text, sep=" ") if w_text.strip() else np.empty(0)
    if w.shape[0] != p:
        raise ParseError(f"section 'w' has {w.shape[0]} values, expected {p}")
    V = np.empty((k, p))
    for f in range(k):
        row_text = _model_line(lines, f"V[{f}]")
        row = np.fromstring(row_text, sep=" ") if row_text.strip() else np.empty(0)
        if row.shape[0] != p:
            raise ParseError(f"section 'V' row {f} has {row.shape[0]} values, "
                             f"expected {p}")
        V[f] = row
    if not (np.isfinite(w0) and np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
        raise ParseError("model file contains non-finite entries")
    return FMParams(w0, w, V)


def load_model_file(path) -> FMParams:
    with open(path, "r", encoding="utf-8") as fh:
        return load_model(fh.read())
