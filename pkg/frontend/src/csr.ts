/**
 * Compressed sparse row matrices on the client side.
 *
 * The layout mirrors the core exactly: row offsets of length nRows + 1,
 * strictly increasing column indices inside each row, finite values.
 */

import { DataError } from "./errors.js";

export interface CsrMatrix {
  nRows: number;
  nCols: number;
  indptr: Int32Array;
  indices: Int32Array;
  data: Float64Array;
}

export function csrMatrix(
  nRows: number,
  nCols: number,
  indptr: ArrayLike<number>,
  indices: ArrayLike<number>,
  data: ArrayLike<number>,
): CsrMatrix {
  const m: CsrMatrix = {
    nRows,
    nCols,
    indptr: Int32Array.from(indptr),
    indices: Int32Array.from(indices),
    data: Float64Array.from(data),
  };
  validateCsr(m);
  return m;
}

export function validateCsr(m: CsrMatrix): void {
  if (m.nRows < 0 || m.nCols < 0) {
    throw new DataError("matrix dimensions must be non-negative");
  }
  if (m.indptr.length !== m.nRows + 1) {
    throw new DataError("indptr must have length nRows + 1");
  }
  if (m.indptr[0] !== 0 || m.indptr[m.nRows] !== m.indices.length) {
    throw new DataError("indptr must start at 0 and end at nnz");
  }
  if (m.indices.length !== m.data.length) {
    throw new DataError("indices and data must have equal length");
  }
  for (let i = 0; i < m.nRows; i++) {
    if (m.indptr[i + 1] < m.indptr[i]) {
      throw new DataError("indptr must be non-decreasing");
    }
    let prev = -1;
    for (let idx = m.indptr[i]; idx < m.indptr[i + 1]; idx++) {
      const c = m.indices[idx];
      if (c <= prev || c >= m.nCols) {
        throw new DataError(
          `row ${i}: column indices must be strictly increasing and < nCols`,
        );
      }
      if (!Number.isFinite(m.data[idx])) {
        throw new DataError("matrix values must be finite");
      }
      prev = c;
    }
  }
}

/** Dense (row-major nested arrays) to CSR; zeros are dropped. */
export function fromDense(rows: number[][]): CsrMatrix {
  const nRows = rows.length;
  const nCols = nRows ? rows[0].length : 0;
  const indptr = [0];
  const indices: number[] = [];
  const data: number[] = [];
  for (const row of rows) {
    if (row.length !== nCols) {
      throw new DataError("ragged dense input");
    }
    row.forEach((v, j) => {
      if (v !== 0) {
        indices.push(j);
        data.push(v);
      }
    });
    indptr.push(indices.length);
  }
  return csrMatrix(nRows, nCols, indptr, indices, data);
}

export function toDense(m: CsrMatrix): number[][] {
  const out: number[][] = [];
  for (let i = 0; i < m.nRows; i++) {
    const row = new Array<number>(m.nCols).fill(0);
    for (let idx = m.indptr[i]; idx < m.indptr[i + 1]; idx++) {
      row[m.indices[idx]] = m.data[idx];
    }
    out.push(row);
  }
  return out;
}

export function nnz(m: CsrMatrix): number {
  return m.indices.length;
}
