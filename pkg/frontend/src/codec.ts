/**
 * Binary array codec for the wire protocol.
 *
 * Bulk numeric data travels as base64 of the raw little-endian bytes
 * (float64 or int64), so every value round-trips bit-for-bit across the
 * process boundary; JSON numbers would already round-trip doubles, but the
 * raw encoding is also several times smaller and cheaper to parse.
 */

import { DataError } from "./errors.js";

export interface EncodedArray {
  dtype: "f8" | "i8";
  shape: number[];
  b64: string;
}

export function encodeF64(values: Float64Array | number[]): EncodedArray {
  const arr = values instanceof Float64Array ? values : Float64Array.from(values);
  const buf = Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength);
  return { dtype: "f8", shape: [arr.length], b64: buf.toString("base64") };
}

export function encodeI64(values: Int32Array | number[]): EncodedArray {
  const src = Array.from(values, (v) => BigInt(v));
  const arr = BigInt64Array.from(src);
  const buf = Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength);
  return { dtype: "i8", shape: [arr.length], b64: buf.toString("base64") };
}

function bytesOf(obj: EncodedArray): ArrayBuffer {
  const buf = Buffer.from(obj.b64, "base64");
  // slice to a fresh, 8-aligned ArrayBuffer
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

export function decodeF64(obj: EncodedArray): Float64Array {
  if (obj.dtype !== "f8") {
    throw new DataError(`expected f8 payload, got ${obj.dtype}`);
  }
  return new Float64Array(bytesOf(obj));
}

export function decodeI64(obj: EncodedArray): number[] {
  if (obj.dtype !== "i8") {
    throw new DataError(`expected i8 payload, got ${obj.dtype}`);
  }
  return Array.from(new BigInt64Array(bytesOf(obj)), (v) => Number(v));
}

/** Rows of a factor matrix shipped flat with a known shape. */
export function decodeMatrix(obj: EncodedArray, rows: number, cols: number): Float64Array[] {
  const flat = decodeF64(obj);
  if (flat.length !== rows * cols) {
    throw new DataError(`matrix payload holds ${flat.length} values, expected ${rows * cols}`);
  }
  const out: Float64Array[] = [];
  for (let r = 0; r < rows; r++) {
    out.push(flat.subarray(r * cols, (r + 1) * cols).slice());
  }
  return out;
}
