/**
 * The libsvm interchange format, matching the core's parser and writer:
 * `<target> <idx>:<val> ...`, 0-based ascending indices, `#` lines and
 * blank lines skipped. Values render through the shortest round-trip
 * decimal (JS number formatting), which the core parses back exactly.
 */

import { CsrMatrix, csrMatrix } from "./csr.js";
import { DataError } from "./errors.js";

export interface LabeledData {
  X: CsrMatrix;
  y: Float64Array;
}

export function parseLibsvm(text: string, nColsOverride?: number): LabeledData {
  const targets: number[] = [];
  const indptr = [0];
  const indices: number[] = [];
  const data: number[] = [];
  let maxCol = -1;
  const lines = text.split("\n");
  for (let lineNo = 1; lineNo <= lines.length; lineNo++) {
    const line = lines[lineNo - 1].trim();
    if (!line || line.startsWith("#")) continue;
    const tokens = line.split(/\s+/);
    const target = Number(tokens[0]);
    if (!Number.isFinite(target)) {
      throw new DataError(`line ${lineNo}: bad target '${tokens[0]}'`);
    }
    let prev = -1;
    for (const tok of tokens.slice(1)) {
      const sep = tok.indexOf(":");
      if (sep < 0) {
        throw new DataError(`line ${lineNo}: bad feature token '${tok}'`);
      }
      const idx = Number(tok.slice(0, sep));
      const val = Number(tok.slice(sep + 1));
      if (!Number.isInteger(idx) || idx < 0) {
        throw new DataError(`line ${lineNo}: bad feature index in '${tok}'`);
      }
      if (!Number.isFinite(val)) {
        throw new DataError(`line ${lineNo}: non-finite value in '${tok}'`);
      }
      if (idx <= prev) {
        throw new DataError(`line ${lineNo}: feature indices must ascend`);
      }
      prev = idx;
      maxCol = Math.max(maxCol, idx);
      if (val !== 0) {
        indices.push(idx);
        data.push(val);
      }
    }
    targets.push(target);
    indptr.push(indices.length);
  }
  const needed = maxCol + 1;
  const nCols = nColsOverride ?? needed;
  if (nCols < needed) {
    throw new DataError(`nCols=${nCols} below largest index + 1 (${needed})`);
  }
  return {
    X: csrMatrix(targets.length, nCols, indptr, indices, data),
    y: Float64Array.from(targets),
  };
}

export function writeLibsvm(data: LabeledData): string {
  const { X, y } = data;
  if (y.length !== X.nRows) {
    throw new DataError("y must hold one value per row");
  }
  const lines: string[] = [];
  for (let i = 0; i < X.nRows; i++) {
    const parts = [String(y[i])];
    for (let idx = X.indptr[i]; idx < X.indptr[i + 1]; idx++) {
      parts.push(`${X.indices[idx]}:${X.data[idx]}`);
    }
    lines.push(parts.join(" "));
  }
  return lines.length ? lines.join("\n") + "\n" : "";
}
