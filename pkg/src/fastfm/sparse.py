"""Sparse containers and the libsvm interchange format.

Design matrices are immutable CSR; the column-major mirror exists because
the coordinate solvers sweep parameters feature-wise. Only the access
primitives the solvers actually need are provided; this is not a sparse
BLAS.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, ParseError


def _as_index_array(values, name):
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    return arr


def _as_value_array(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    return arr


class SparseRowMatrix:
    """Immutable CSR matrix: row_offsets (n_rows+1), col_indices, values.

    Column indices are strictly increasing within each row; explicit zeros
    are allowed but never produced by the parser.
    """

    __slots__ = ("n_rows", "n_cols", "row_offsets", "col_indices", "values",
                 "_fingerprint", "_csc_cache")

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, values,
                 check=True):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = _as_index_array(row_offsets, "row_offsets")
        self.col_indices = _as_index_array(col_indices, "col_indices")
        self.values = _as_value_array(values, "values")
        self._fingerprint = None  # memo for mcmc.matrix_fingerprint
        self._csc_cache = None    # memo for to_column_major
        for arr in (self.row_offsets, self.col_indices, self.values):
            arr.setflags(write=False)
        if check:
            self._validate()

    def _validate(self):
        offs, cols, vals = self.row_offsets, self.col_indices, self.values
        if self.n_rows < 0 or self.n_cols < 0:
            raise DataError("matrix dimensions must be non-negative")
        if offs.shape[0] != self.n_rows + 1:
            raise DataError("row_offsets must have length n_rows + 1")
        if offs[0] != 0 or offs[-1] != cols.shape[0]:
            raise DataError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(offs) < 0):
            raise DataError("row_offsets must be non-decreasing")
        if cols.shape[0] != vals.shape[0]:
            raise DataError("col_indices and values must have equal length")
        if cols.shape[0]:
            if cols.min() < 0 or cols.max() >= self.n_cols:
                raise DataError("column index out of range")
        if cols.shape[0] > 1:
            inner = np.diff(cols)
            # positions where a new row starts are allowed to go backwards
            breaks = offs[1:-1] - 1
            breaks = breaks[(breaks >= 0) & (breaks < inner.shape[0])]
            inner[breaks] = 1
            if np.any(inner <= 0):
                raise DataError("column indices must be strictly increasing "
                                "within each row (duplicates are rejected)")
        if not np.all(np.isfinite(vals)):
            raise DataError("matrix values must be finite")

    @property
    def nnz(self) -> int:
        return int(self.col_indices.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def row(self, i):
        """(col_indices, values) views of row i."""
        if not 0 <= i < self.n_rows:
            raise DataError(f"row index {i} out of range [0, {self.n_rows})")
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols))
        for i in range(self.n_rows):
            cols, vals = self.row(i)
            dense[i, cols] = vals
        return dense

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry, in storage order."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64),
                         np.diff(self.row_offsets))

    def with_n_cols(self, n_cols: int) -> "SparseRowMatrix":
        if n_cols < self.n_cols:
            raise DataError("cannot shrink n_cols")
        return SparseRowMatrix(self.n_rows, n_cols, self.row_offsets,
                               self.col_indices, self.values, check=False)

    @classmethod
    def from_dense(cls, dense) -> "SparseRowMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        offs = [0]
        cols = []
        vals = []
        for row in dense:
            nz = np.nonzero(row)[0]
            cols.extend(nz.tolist())
            vals.extend(row[nz].tolist())
            offs.append(len(cols))
        return cls(dense.shape[0], dense.shape[1], offs, cols, vals)

    def __eq__(self, other):
        return (isinstance(other, SparseRowMatrix)
                and self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return (f"SparseRowMatrix(n_rows={self.n_rows}, n_cols={self.n_cols}, "
                f"nnz={self.nnz})")


class SparseColMatrix:
    """CSC mirror of SparseRowMatrix; rows strictly increasing per column."""

    __slots__ = ("n_rows", "n_cols", "col_offsets", "row_indices", "values")

    def __init__(self, n_rows, n_cols, col_offsets, row_indices, values,
                 check=True):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.col_offsets = _as_index_array(col_offsets, "col_offsets")
        self.row_indices = _as_index_array(row_indices, "row_indices")
        self.values = _as_value_array(values, "values")
        for arr in (self.col_offsets, self.row_indices, self.values):
            arr.setflags(write=False)
        if check:
            # validate through the transposed-CSR view
            SparseRowMatrix(self.n_cols, self.n_rows, self.col_offsets,
                            self.row_indices, self.values)

    @property
    def nnz(self) -> int:
        return int(self.row_indices.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def column(self, j):
        if not 0 <= j < self.n_cols:
            raise DataError(f"column index {j} out of range [0, {self.n_cols})")
        lo, hi = self.col_offsets[j], self.col_offsets[j + 1]
        return self.row_indices[lo:hi], self.values[lo:hi]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols))
        for j in range(self.n_cols):
            rows, vals = self.column(j)
            dense[rows, j] = vals
        return dense

    def __repr__(self):
        return (f"SparseColMatrix(n_rows={self.n_rows}, n_cols={self.n_cols}, "
                f"nnz={self.nnz})")


@dataclass(frozen=True)
class LabeledData:
    """A design matrix with one target per row."""

    X: SparseRowMatrix
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if y.ndim != 1 or y.shape[0] != self.X.n_rows:
            raise DataError("y must be one value per matrix row")
        if not np.all(np.isfinite(y)):
            raise DataError("targets must be finite")

    @property
    def n_rows(self) -> int:
        return self.X.n_rows


def to_column_major(m: SparseRowMatrix) -> SparseColMatrix:
    """CSR -> CSC by stable sort on columns; rows stay ordered per column.

    The result is memoised on the (immutable) input matrix: the coordinate
    solvers convert at every warm-started call and the conversion must not
    dominate a one-iteration continuation.
    """
    if m._csc_cache is not None:
        return m._csc_cache
    counts = np.bincount(m.col_indices, minlength=m.n_cols)
    col_offsets = np.zeros(m.n_cols + 1, dtype=np.int64)
    np.cumsum(counts, out=col_offsets[1:])
    order = np.argsort(m.col_indices, kind="stable")
    out = SparseColMatrix(m.n_rows, m.n_cols, col_offsets,
                          m.row_ids()[order], m.values[order], check=False)
    m._csc_cache = out
    return out


def to_row_major(m: SparseColMatrix) -> SparseRowMatrix:
    """CSC -> CSR; inverse of to_column_major."""
    counts = np.bincount(m.row_indices, minlength=m.n_rows)
    row_offsets = np.zeros(m.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=row_offsets[1:])
    col_ids = np.repeat(np.arange(m.n_cols, dtype=np.int64),
                        np.diff(m.col_offsets))
    order = np.argsort(m.row_indices, kind="stable")
    return SparseRowMatrix(m.n_rows, m.n_cols, row_offsets, col_ids[order],
                           m.values[order], check=False)


def clip_columns(m: SparseRowMatrix, n_cols: int) -> SparseRowMatrix:
    """Drop entries in columns >= n_cols; the result has exactly n_cols."""
    if n_cols >= m.n_cols:
        return m.with_n_cols(n_cols) if n_cols > m.n_cols else m
    keep = m.col_indices < n_cols
    rows = m.row_ids()[keep]
    counts = np.bincount(rows, minlength=m.n_rows)
    offs = np.zeros(m.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=offs[1:])
    return SparseRowMatrix(m.n_rows, n_cols, offs, m.col_indices[keep],
                           m.values[keep], check=False)


def row_dot(m: SparseRowMatrix, row: int, dense_vec) -> float:
    """Inner product of one stored row with a dense vector of length n_cols."""
    vec = np.asarray(dense_vec, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != m.n_cols:
        raise DataError("dense vector length must equal n_cols")
    cols, vals = m.row(row)
    return float(np.dot(vals, vec[cols]))


# ---------------------------------------------------------------------------
# libsvm text format
# ---------------------------------------------------------------------------

def parse_libsvm(source, n_cols=None, one_based=False) -> LabeledData:
    """Parse `<target> <idx>:<val> ...` lines into LabeledData.

    source may be a string, a file-like object, or an iterable of lines.
    Lines starting with '#' and blank lines are skipped. Indices must be
    ascending within a line (duplicates rejected); with one_based=True,
    stored indices are the file's minus one. n_cols, when given, must be
    at least one more than the largest index seen.
    """
    if isinstance(source, str):
        lines = io.StringIO(source)
    else:
        lines = source
    targets = []
    offs = [0]
    cols = []
    vals = []
    max_col = -1
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            target = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad target {tokens[0]!r}", line_no) from None
        if not math.isfinite(target):
            raise ParseError(f"non-finite target {tokens[0]!r}", line_no)
        prev = -1
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"bad feature token {tok!r}", line_no)
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(f"bad feature index in {tok!r}",
                                 line_no) from None
            try:
                val = float(val_s)
            except ValueError:
                raise ParseError(f"bad feature value in {tok!r}",
                                 line_no) from None
            if one_based:
                idx -= 1
            if idx < 0:
                raise ParseError(f"feature index {idx_s} out of range",
                                 line_no)
            if idx <= prev:
                raise ParseError(
                    f"feature indices must be ascending, got {idx_s} "
                    f"after {prev if not one_based else prev + 1}", line_no)
            if not math.isfinite(val):
                raise ParseError(f"non-finite feature value {val_s!r}",
                                 line_no)
            prev = idx
            max_col = max(max_col, idx)
            if val != 0.0:
                cols.append(idx)
                vals.append(val)
        targets.append(target)
        offs.append(len(cols))
    needed = max_col + 1
    if n_cols is None:
        n_cols = needed
    elif n_cols < needed:
        raise DataError(f"n_cols={n_cols} below largest index + 1 ({needed})")
    X = SparseRowMatrix(len(targets), n_cols, offs, cols, vals, check=False)
    return LabeledData(X=X, y=np.asarray(targets, dtype=np.float64))


def load_libsvm(path, n_cols=None, one_based=False) -> LabeledData:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_libsvm(fh, n_cols=n_cols, one_based=one_based)


def serialize_libsvm(data: LabeledData) -> str:
    """Inverse of parse_libsvm up to exact float round trip (repr rendering)."""
    out = []
    for i in range(data.n_rows):
        cols, vals = data.X.row(i)
        parts = [repr(float(data.y[i]))]
        parts.extend(f"{int(c)}:{float(v)!r}" for c, v in zip(cols, vals))
        out.append(" ".join(parts))
    return "\n".join(out) + ("\n" if out else "")


def save_libsvm(path, data: LabeledData) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_libsvm(data))
