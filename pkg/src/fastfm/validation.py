"""Input coercion and validation helpers for the estimator layer."""

from __future__ import annotations

import numpy as np

from .exceptions import DataError
from .sparse import LabeledData, SparseRowMatrix


def as_row_matrix(X) -> SparseRowMatrix:
    """Accept a SparseRowMatrix or any CSR-layout duck (scipy csr_matrix /
    csr_array). Other layouts are rejected with a conversion hint instead of
    being converted silently."""
    if isinstance(X, SparseRowMatrix):
        return X
    fmt = getattr(X, "format", None)
    if fmt == "csr":
        n_rows, n_cols = X.shape
        return SparseRowMatrix(n_rows, n_cols,
                               np.asarray(X.indptr, dtype=np.int64),
                               np.asarray(X.indices, dtype=np.int64),
                               np.asarray(X.data, dtype=np.float64))
    if fmt is not None:
        raise DataError(
            f"sparse input must be CSR, got {fmt!r}; convert with .tocsr()")
    if isinstance(X, np.ndarray):
        raise DataError(
            "dense input is not accepted; wrap it with "
            "scipy.sparse.csr_matrix(X) or SparseRowMatrix.from_dense(X)")
    raise DataError(f"cannot interpret {type(X).__name__} as a CSR matrix")


def as_targets(y, n_rows: int) -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError("y must be one-dimensional")
    if arr.shape[0] != n_rows:
        raise DataError(f"y has {arr.shape[0]} entries for {n_rows} rows")
    if not np.all(np.isfinite(arr)):
        raise DataError("targets must be finite")
    return arr


def check_classification_labels(y: np.ndarray) -> np.ndarray:
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("classification labels must be in {-1, +1}")
    return y


def as_labeled_data(X, y, task: str = "regression") -> LabeledData:
    m = as_row_matrix(X)
    arr = as_targets(y, m.n_rows)
    if task == "classification":
        check_classification_labels(arr)
    return LabeledData(X=m, y=arr)


def as_pairs(pairs, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    """(winner, loser) row index arrays from an (n, 2) array-like."""
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataError("pairs must be an (n, 2) array of row indices")
    if arr.shape[0] == 0:
        raise DataError("pairs must be non-empty")
    winners = np.ascontiguousarray(arr[:, 0])
    losers = np.ascontiguousarray(arr[:, 1])
    if winners.min(initial=0) < 0 or losers.min(initial=0) < 0 \
            or winners.max(initial=-1) >= n_rows or losers.max(initial=-1) >= n_rows:
        raise DataError("pair row index out of range")
    if np.any(winners == losers):
        raise DataError("a pair may not compare a row with itself")
    return winners, losers
