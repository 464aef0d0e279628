/**
 * Long-lived connection to `fastfm serve`.
 *
 * One core process is spawned lazily and shared by every estimator in this
 * process: requests are JSON lines on stdin, responses JSON lines on
 * stdout, matched by id. Uploaded matrices and vectors are cached
 * server-side under refs (tracked per client object identity), so a
 * warm-started iteration loop ships only a tiny request per call.
 */

import { ChildProcessByStdio, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

type CoreProcess = ChildProcessByStdio<Writable, Readable, null>;

import { encodeF64, encodeI64 } from "./codec.js";
import { CsrMatrix, validateCsr } from "./csr.js";
import { errorFromResponse, FastFMError } from "./errors.js";

interface PendingEntry {
  resolve: (value: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

function serveCommand(): string[] {
  const env = process.env.FASTFM_SERVE_COMMAND;
  if (env) {
    return env.split(" ").filter(Boolean);
  }
  return ["python3", "-m", "fastfm.cli", "serve"];
}

export class FastFMServer {
  private child: CoreProcess | null = null;
  private reader: Interface | null = null;
  private pending = new Map<number, PendingEntry>();
  private nextId = 1;
  private matrixRefs = new WeakMap<CsrMatrix, string>();
  private vectorRefs = new WeakMap<Float64Array, string>();

  private ensureSpawned(): CoreProcess {
    if (this.child) return this.child;
    const [cmd, ...args] = serveCommand();
    const child = spawn(cmd, args, { stdio: ["pipe", "pipe", "inherit"] });
    this.child = child;
    this.reader = createInterface({ input: child.stdout });
    this.reader.on("line", (line) => this.onLine(line));
    child.on("exit", () => this.failAll(new FastFMError("core process exited")));
    child.on("error", (err) =>
      this.failAll(new FastFMError(`cannot start core process: ${err.message}`)),
    );
    return child;
  }

  private onLine(line: string): void {
    let obj: Record<string, unknown>;
    try {
      obj = JSON.parse(line);
    } catch {
      return; // stray non-protocol output
    }
    const id = obj.id as number | null;
    if (id == null) return;
    const entry = this.pending.get(id);
    if (!entry) return;
    this.pending.delete(id);
    if (obj.ok) {
      entry.resolve(obj);
    } else {
      entry.reject(errorFromResponse((obj.error ?? {}) as { type?: string; message?: string }));
    }
  }

  private failAll(err: Error): void {
    for (const entry of this.pending.values()) {
      entry.reject(err);
    }
    this.pending.clear();
  }

  request(op: string, fields: Record<string, unknown> = {}): Promise<Record<string, unknown>> {
    const child = this.ensureSpawned();
    const id = this.nextId++;
    const promise = new Promise<Record<string, unknown>>((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
    });
    child.stdin.write(JSON.stringify({ id, op, ...fields }) + "\n");
    return promise;
  }

  /** Upload (or reuse) a CSR matrix; returns its server-side ref. */
  async uploadMatrix(m: CsrMatrix): Promise<string> {
    const known = this.matrixRefs.get(m);
    if (known) return known;
    validateCsr(m);
    const resp = await this.request("upload", {
      kind: "csr",
      n_rows: m.nRows,
      n_cols: m.nCols,
      indptr: encodeI64(m.indptr),
      indices: encodeI64(m.indices),
      data: encodeF64(m.data),
    });
    const ref = resp.ref as string;
    this.matrixRefs.set(m, ref);
    return ref;
  }

  /** Upload (or reuse) a vector; returns its server-side ref. */
  async uploadVector(v: Float64Array): Promise<string> {
    const known = this.vectorRefs.get(v);
    if (known) return known;
    const resp = await this.request("upload", { kind: "vector", data: encodeF64(v) });
    const ref = resp.ref as string;
    this.vectorRefs.set(v, ref);
    return ref;
  }

  async uploadPairs(pairs: number[][]): Promise<string> {
    const flat: number[] = [];
    for (const [a, b] of pairs) {
      flat.push(a, b);
    }
    const resp = await this.request("upload", {
      kind: "pairs",
      data: encodeF64(Float64Array.from(flat)),
    });
    return resp.ref as string;
  }

  async close(): Promise<void> {
    if (!this.child) return;
    const child = this.child;
    try {
      await Promise.race([
        this.request("shutdown"),
        new Promise((resolve) => setTimeout(resolve, 2000)),
      ]);
    } catch {
      // the exit handler already rejected outstanding requests
    }
    child.kill();
    this.child = null;
    this.reader?.close();
    this.reader = null;
  }
}

let shared: FastFMServer | null = null;

/** The process-wide server connection estimators use by default. */
export function getServer(): FastFMServer {
  if (!shared) {
    shared = new FastFMServer();
  }
  return shared;
}

/** Stop the shared core process (tests call this in afterAll). */
export async function shutdownServer(): Promise<void> {
  if (shared) {
    await shared.close();
    shared = null;
  }
}
