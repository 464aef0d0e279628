/**
 * Estimator classes mirroring the core's solver/task grid, grouped into
 * the namespaces als, mcmc, sgd and bpr. Method and attribute names follow
 * the core exactly (fit, fit_predict, predict, w0_, w_, V_, hyper_param_);
 * every call is delegated to the shared core process, and results are
 * bit-identical to in-process fits on the same seed.
 */

import { decodeF64, decodeMatrix, EncodedArray } from "./codec.js";
import { FastFMServer, getServer } from "./client.js";
import { CsrMatrix } from "./csr.js";
import { DataError, FastFMError, NotFittedError } from "./errors.js";

export interface FMConfig {
  rank?: number;
  n_iter?: number;
  init_std?: number;
  l2_reg?: number;
  l2_reg_w?: number;
  l2_reg_V?: number;
  step_size?: number;
  random_state?: number;
}

export interface FitOptions {
  n_more_iter?: number;
  /**
   * Mirror w0_/w_/V_/hyper_param_ from this call (default true). Passing
   * false skips the parameter payload entirely; the attributes then raise
   * until a later call mirrors them again. Useful for tight warm-start
   * loops that only consume predictions.
   */
  attributes?: boolean;
}

const CONFIG_KEYS: ReadonlyArray<keyof FMConfig> = [
  "rank",
  "n_iter",
  "init_std",
  "l2_reg",
  "l2_reg_w",
  "l2_reg_V",
  "step_size",
  "random_state",
];

interface FittedState {
  mirrored: boolean;
  w0: number;
  wEnc: EncodedArray | null;
  vEnc: EncodedArray | null;
  hyperEnc: EncodedArray | null;
  w: Float64Array | null; // decoded lazily on first access
  V: Float64Array[] | null;
  hyperParam: Float64Array | null;
  wallTimeS: number;
  nIterDone: number;
}

abstract class BaseEstimator {
  protected abstract readonly solver: string;
  protected abstract readonly task: string;

  readonly config: FMConfig;
  protected server: FastFMServer;
  protected handle: string | null = null;
  protected fitted: FittedState | null = null;

  constructor(config: FMConfig = {}, server?: FastFMServer) {
    for (const key of Object.keys(config)) {
      if (!CONFIG_KEYS.includes(key as keyof FMConfig)) {
        throw new DataError(`unknown keyword '${key}'; valid: ${CONFIG_KEYS.join(", ")}`);
      }
    }
    const rank = config.rank;
    if (rank !== undefined && (!Number.isInteger(rank) || rank < 0)) {
      throw new DataError("rank must be a non-negative integer");
    }
    this.config = { ...config };
    this.server = server ?? getServer();
  }

  get_params(): FMConfig {
    return { ...this.config };
  }

  protected async ensureHandle(): Promise<string> {
    if (!this.handle) {
      const resp = await this.server.request("construct", {
        solver: this.solver,
        task: this.task,
        params: this.config,
      });
      this.handle = resp.handle as string;
    }
    return this.handle;
  }

  protected absorb(resp: Record<string, unknown>): void {
    this.fitted = {
      mirrored: resp.w !== undefined,
      w0: (resp.w0 as number) ?? 0,
      wEnc: (resp.w as EncodedArray) ?? null,
      vEnc: (resp.V as EncodedArray) ?? null,
      hyperEnc: (resp.hyper_param as EncodedArray) ?? null,
      w: null,
      V: null,
      hyperParam: null,
      wallTimeS: (resp.wall_time_s as number) ?? 0,
      nIterDone: (resp.n_iter_done as number) ?? 0,
    };
  }

  protected requireFitted(): FittedState {
    if (!this.fitted) {
      throw new NotFittedError(
        `this ${this.constructor.name} instance is not fitted yet`,
      );
    }
    return this.fitted;
  }

  protected requireMirrored(): FittedState {
    const fitted = this.requireFitted();
    if (!fitted.mirrored) {
      throw new FastFMError(
        "the last call skipped the parameter mirror (attributes: false); " +
          "fit again with attributes enabled to read them",
      );
    }
    return fitted;
  }

  /** Global bias after fitting. */
  get w0_(): number {
    return this.requireMirrored().w0;
  }

  /** First-order weights after fitting. */
  get w_(): Float64Array {
    const fitted = this.requireMirrored();
    if (!fitted.w) {
      fitted.w = decodeF64(fitted.wEnc!);
    }
    return fitted.w;
  }

  /** Latent factor rows (k arrays of length p) after fitting. */
  get V_(): Float64Array[] {
    const fitted = this.requireMirrored();
    if (!fitted.V) {
      const k = fitted.vEnc!.shape.length === 2 ? fitted.vEnc!.shape[0] : 0;
      fitted.V = decodeMatrix(fitted.vEnc!, k, this.w_.length);
    }
    return fitted.V;
  }

  /** Core-side solver seconds of the last fit call (excludes transport). */
  get last_fit_seconds_(): number {
    return this.requireFitted().wallTimeS;
  }

  async predict(X: CsrMatrix): Promise<Float64Array> {
    this.requireFitted();
    const handle = await this.ensureHandle();
    const ref = await this.server.uploadMatrix(X);
    const resp = await this.server.request("predict", { handle, X: { ref } });
    return decodeF64(resp.y_pred as EncodedArray);
  }
}

/** Shared fit for the solvers with a standalone fit (ALS, SGD). */
abstract class SupervisedEstimator extends BaseEstimator {
  async fit(X: CsrMatrix, y: Float64Array | number[], opts: FitOptions = {}): Promise<this> {
    if (opts.n_more_iter !== undefined && !this.fitted) {
      throw new NotFittedError("cannot continue before the first fit");
    }
    const handle = await this.ensureHandle();
    const yArr = y instanceof Float64Array ? y : Float64Array.from(y);
    const resp = await this.server.request("fit", {
      handle,
      X: { ref: await this.server.uploadMatrix(X) },
      y: { ref: await this.server.uploadVector(yArr) },
      n_more_iter: opts.n_more_iter ?? null,
      model: opts.attributes ?? true,
    });
    this.absorb(resp);
    return this;
  }
}

class ProbitClassifierMixin extends SupervisedEstimator {
  protected readonly solver: string = "als";
  protected readonly task: string = "classification";

  /** P(y = +1) per row. */
  async predict_proba(X: CsrMatrix): Promise<Float64Array> {
    this.requireFitted();
    const handle = await this.ensureHandle();
    const ref = await this.server.uploadMatrix(X);
    const resp = await this.server.request("predict", {
      handle,
      X: { ref },
      proba: true,
    });
    return decodeF64(resp.y_pred as EncodedArray);
  }
}

// --- als ---------------------------------------------------------------

export namespace als {
  export class FMRegression extends SupervisedEstimator {
    protected readonly solver = "als";
    protected readonly task = "regression";
  }

  export class FMClassification extends ProbitClassifierMixin {
    protected override readonly solver = "als";
  }
}

// --- sgd ---------------------------------------------------------------

export namespace sgd {
  export class FMRegression extends SupervisedEstimator {
    protected readonly solver = "sgd";
    protected readonly task = "regression";
  }

  export class FMClassification extends ProbitClassifierMixin {
    protected override readonly solver = "sgd";
  }
}

// --- mcmc --------------------------------------------------------------

class McmcEstimator extends BaseEstimator {
  protected readonly solver: string = "mcmc";
  protected readonly task: string = "regression";

  /** The Gibbs sampler averages predictions over draws: use fit_predict. */
  fit(): never {
    throw new FastFMError(
      "the Gibbs sampler has no standalone fit: use fit_predict(X_train, y_train, X_test)",
    );
  }

  /**
   * Run (or continue, with n_more_iter) the chain and return the
   * accumulated posterior-mean prediction for X_test. The test matrix must
   * stay the same object content across continued calls.
   */
  async fit_predict(
    X_train: CsrMatrix,
    y_train: Float64Array | number[],
    X_test: CsrMatrix,
    opts: FitOptions = {},
  ): Promise<Float64Array> {
    const handle = await this.ensureHandle();
    const yArr = y_train instanceof Float64Array ? y_train : Float64Array.from(y_train);
    const resp = await this.server.request("fit_predict", {
      handle,
      X: { ref: await this.server.uploadMatrix(X_train) },
      y: { ref: await this.server.uploadVector(yArr) },
      X_test: { ref: await this.server.uploadMatrix(X_test) },
      n_more_iter: opts.n_more_iter ?? null,
      model: opts.attributes ?? true,
    });
    this.absorb(resp);
    return decodeF64(resp.y_pred as EncodedArray);
  }

  /** [alpha, lambda_w, mu_w, lambda_V_0..k-1, mu_V_0..k-1]. */
  get hyper_param_(): Float64Array {
    const fitted = this.requireMirrored();
    if (!fitted.hyperParam) {
      if (!fitted.hyperEnc) {
        throw new NotFittedError("hyperparameters are only available after fit_predict");
      }
      fitted.hyperParam = decodeF64(fitted.hyperEnc);
    }
    return fitted.hyperParam;
  }
}

export namespace mcmc {
  export class FMRegression extends McmcEstimator {
    protected override readonly task = "regression";
  }

  export class FMClassification extends McmcEstimator {
    protected override readonly task = "classification";
  }
}

// --- bpr ---------------------------------------------------------------

export namespace bpr {
  /** Pairwise-ranking FM: fit on (X, pairs of row indices), score rows. */
  export class FMRecommender extends BaseEstimator {
    protected readonly solver = "bpr";
    protected readonly task = "ranking";

    async fit(X: CsrMatrix, pairs: number[][], opts: FitOptions = {}): Promise<this> {
      if (opts.n_more_iter !== undefined && !this.fitted) {
        throw new NotFittedError("cannot continue before the first fit");
      }
      const handle = await this.ensureHandle();
      const resp = await this.server.request("fit", {
        handle,
        X: { ref: await this.server.uploadMatrix(X) },
        pairs: { ref: await this.server.uploadPairs(pairs) },
        n_more_iter: opts.n_more_iter ?? null,
        model: opts.attributes ?? true,
      });
      this.absorb(resp);
      return this;
    }
  }
}
