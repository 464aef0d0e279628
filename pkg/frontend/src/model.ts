/**
 * Reader for the core's model file format (`fastfm-model v1`): header,
 * `p`, `k`, `w0`, one `w` line, then k factor-major `V` lines, all in
 * full-precision decimals that Number() parses back exactly.
 */

import { DataError } from "./errors.js";

export interface ModelParams {
  p: number;
  k: number;
  w0: number;
  w: Float64Array;
  V: Float64Array[];
}

function section(lines: string[], cursor: { at: number }, name: string): string {
  if (cursor.at >= lines.length) {
    throw new DataError(`model file truncated: missing section '${name}'`);
  }
  const line = lines[cursor.at++];
  const sep = line.indexOf(" ");
  const head = sep < 0 ? line : line.slice(0, sep);
  if (head !== name) {
    throw new DataError(`expected section '${name}', found '${head}'`);
  }
  return sep < 0 ? "" : line.slice(sep + 1);
}

function numbers(text: string, expected: number, what: string): Float64Array {
  const parts = text.trim() ? text.trim().split(/\s+/) : [];
  if (parts.length !== expected) {
    throw new DataError(`section '${what}' has ${parts.length} values, expected ${expected}`);
  }
  const out = Float64Array.from(parts, Number);
  if (out.some((v) => !Number.isFinite(v))) {
    throw new DataError(`section '${what}' contains non-finite entries`);
  }
  return out;
}

export function parseModelFile(text: string): ModelParams {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (!lines.length || lines[0].trim() !== "fastfm-model v1") {
    throw new DataError("unsupported model format; expected 'fastfm-model v1'");
  }
  const cursor = { at: 1 };
  const p = Number(section(lines, cursor, "p"));
  const k = Number(section(lines, cursor, "k"));
  const w0 = Number(section(lines, cursor, "w0"));
  if (!Number.isInteger(p) || !Number.isInteger(k) || !Number.isFinite(w0)) {
    throw new DataError("bad model scalars");
  }
  const w = numbers(section(lines, cursor, "w"), p, "w");
  const V: Float64Array[] = [];
  for (let f = 0; f < k; f++) {
    V.push(numbers(section(lines, cursor, "V"), p, `V[${f}]`));
  }
  return { p, k, w0, w, V };
}
