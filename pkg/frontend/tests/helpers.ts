import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { CsrMatrix, csrMatrix } from "../src/csr.js";

/** mulberry32: small deterministic generator for test data. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomSparse(
  nRows: number,
  nCols: number,
  density: number,
  seed: number,
): CsrMatrix {
  const next = rng(seed);
  const indptr = [0];
  const indices: number[] = [];
  const data: number[] = [];
  for (let i = 0; i < nRows; i++) {
    for (let j = 0; j < nCols; j++) {
      if (next() < density) {
        indices.push(j);
        data.push(next() * 2 - 1);
      }
    }
    indptr.push(indices.length);
  }
  return csrMatrix(nRows, nCols, indptr, indices, data);
}

export function randomVector(n: number, seed: number): Float64Array {
  const next = rng(seed);
  return Float64Array.from({ length: n }, () => next() * 2 - 1);
}

/** One-hot (user, item) rows: two unit entries per row. */
export function onehotPairs(
  nRows: number,
  nUsers: number,
  nItems: number,
  seed: number,
): CsrMatrix {
  const next = rng(seed);
  const indptr = [0];
  const indices: number[] = [];
  const data: number[] = [];
  for (let i = 0; i < nRows; i++) {
    const u = Math.floor(next() * nUsers);
    const it = nUsers + Math.floor(next() * nItems);
    indices.push(u, it);
    data.push(1, 1);
    indptr.push(indices.length);
  }
  return csrMatrix(nRows, nUsers + nItems, indptr, indices, data);
}

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function write(path: string, text: string): void {
  writeFileSync(path, text);
}

export function read(path: string): string {
  return readFileSync(path, "utf-8");
}

/** Run the core CLI; throws on nonzero exit. */
export function runCli(args: string[]): string {
  const res = spawnSync("python3", ["-m", "fastfm.cli", ...args], {
    encoding: "utf-8",
    timeout: 300_000,
  });
  if (res.status !== 0) {
    throw new Error(`fastfm ${args.join(" ")} exited ${res.status}: ${res.stderr}`);
  }
  return res.stdout;
}
