"""Solver validation harnesses.

Two reusable checks back the test suite: central finite differences against
the analytic gradients, and the posterior-quantile (simulation based
calibration) procedure for the Gibbs sampler: ground truth drawn from the
prior, data simulated from it, and the quantile of every true scalar inside
its posterior draws must pool to Uniform(0,1). The KS test used for that is
implemented here directly so the core needs no stats dependency.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, DivergenceError, FastFMError
from .mcmc import A_LAMBDA, ALPHA_0, B_LAMBDA, BETA_0, GAMMA_0, MU_0, \
    McmcOptions, mcmc_fit_predict
from .model import FMParams, SolverConfig, predict
from .rng import Rng, spawn_seeds
from .sparse import LabeledData, SparseRowMatrix

_EPS_MACH = np.finfo(np.float64).eps


def finite_difference_check(loss_fn, grad, theta0, epsilon: float = 1e-5
                            ) -> float:
    """Max relative error between grad and central differences of loss_fn.

    grad may be the analytic gradient vector at theta0 or a callable
    returning it. Relative error per coordinate is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-12). Central
    differences cannot resolve anything below the cancellation floor
    eps_machine * |loss| / epsilon, so coordinates where both sides sit
    under that floor count as agreeing (a structurally zero gradient would
    otherwise be compared against pure rounding dust). Emits a warning
    when epsilon is so small that rounding noise dominates the whole
    gradient scale.
    """
    if epsilon <= 0:
        raise DataError("epsilon must be positive")
    theta0 = np.asarray(theta0, dtype=np.float64)
    analytic = np.asarray(grad(theta0) if callable(grad) else grad,
                          dtype=np.float64)
    if analytic.shape != theta0.shape:
        raise DataError("gradient and parameter vector shapes differ")
    numeric = np.empty_like(theta0)
    base = abs(float(loss_fn(theta0)))
    for j in range(theta0.shape[0]):
        step = np.zeros_like(theta0)
        step[j] = epsilon
        hi = float(loss_fn(theta0 + step))
        lo = float(loss_fn(theta0 - step))
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise DataError(f"loss is non-finite at the perturbed point "
                            f"(coordinate {j})")
        numeric[j] = (hi - lo) / (2.0 * epsilon)
    noise = _EPS_MACH * max(base, 1.0) / epsilon
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    if noise > 1e-6 * scale:
        warnings.warn(
            f"epsilon={epsilon:g} is unreliable here: rounding noise "
            f"~{noise:.2e} is not small against the gradient scale "
            f"{scale:.2e}; use a larger epsilon", RuntimeWarning,
            stacklevel=2)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    rel = np.abs(analytic - numeric) / denom
    floor = 4.0 * noise
    rel[(np.abs(analytic) <= floor) & (np.abs(numeric) <= floor)] = 0.0
    return float(np.max(rel))


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov against Uniform(0,1), asymptotic p-value
# ---------------------------------------------------------------------------

def ks_uniform(values) -> tuple[float, float]:
    """(statistic, p) of the one-sample KS test against Uniform(0,1)."""
    u = np.sort(np.asarray(values, dtype=np.float64))
    n = u.shape[0]
    if n == 0:
        raise DataError("KS test needs at least one value")
    if u[0] < 0.0 or u[-1] > 1.0:
        raise DataError("values must lie in [0, 1]")
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    d = float(max(np.max(grid_hi - u), np.max(u - grid_lo)))
    return d, _kolmogorov_sf(d, n)


def _kolmogorov_sf(d: float, n: int) -> float:
    """Asymptotic survival function with Stephens' small-sample correction."""
    sqrt_n = math.sqrt(n)
    lam = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d
    if lam < 1e-9:
        return 1.0
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        total += term
        if abs(term) < 1e-12:
            break
    return min(max(total, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Posterior quantile validation (simulation-based calibration)
# ---------------------------------------------------------------------------

@dataclass
class QuantileReport:
    quantiles: np.ndarray
    ks_statistic: float
    ks_p_value: float
    n_failed: int


def _random_design(rng: Rng, n_rows: int, n_cols: int) -> SparseRowMatrix:
    """Bernoulli(1/2) support with standard normal values; rows may be empty."""
    offs = [0]
    cols = []
    vals = []
    for _ in range(n_rows):
        for j in range(n_cols):
            if rng.uniform() < 0.5:
                cols.append(j)
                vals.append(rng.normal())
        offs.append(len(cols))
    return SparseRowMatrix(n_rows, n_cols, offs, cols, vals, check=False)


def posterior_quantile_run(model_size: tuple[int, int, int],
                           n_replications: int, n_gibbs_iter: int, seed: int,
                           theta_sd_scale: float = 1.0, n_burn_in: int = 50,
                           csv_out=None) -> QuantileReport:
    """Calibration check of the regression Gibbs sampler.

    model_size is (p, k, n_samples). Per replication: hyperparameters and
    parameters come from their priors, targets from the model, and one
    chain starts at the drawn truth (a stationary start, so every draw is
    marginally a posterior draw). The first n_burn_in draws are discarded:
    they are still correlated with the starting point, i.e. with the truth
    itself, which would bias the quantiles toward the centre. The quantile
    of each true parameter among the n_gibbs_iter kept draws is pooled
    over replications and compared to Uniform(0,1). Replication seeds come
    from the splitmix64 stream of the master seed.

    theta_sd_scale deliberately mis-scales the parameter draws; the
    resulting report must fail the uniformity test (that is the harness's
    own mutation check).
    """
    p, k, n_samples = model_size
    if n_replications < 50:
        raise DataError("n_replications must be at least 50")
    if n_gibbs_iter < 1 or n_samples < 1 or p < 1 or k < 0:
        raise DataError("model_size and n_gibbs_iter must be positive")
    if n_burn_in < 0:
        raise DataError("n_burn_in must be >= 0")
    seeds = spawn_seeds(seed, 2 * n_replications)
    n_groups = k + 2
    pooled = []
    n_failed = 0
    x_test = SparseRowMatrix(0, 0, [0], [], [])
    config = SolverConfig(rank=k, n_iter=1, init_std=0.0, seed=0,
                          task="regression")
    for rep in range(n_replications):
        sim = Rng(seeds[2 * rep])
        alpha = sim.gamma(ALPHA_0) / BETA_0
        lambdas = np.array([sim.gamma(A_LAMBDA) / B_LAMBDA
                            for _ in range(n_groups)])
        mus = np.array([MU_0 + sim.normal() / math.sqrt(GAMMA_0 * lambdas[g])
                        for g in range(n_groups)])
        w0 = mus[0] + sim.normal() / math.sqrt(lambdas[0])
        w = mus[1] + np.array([sim.normal() for _ in range(p)]) \
            / math.sqrt(lambdas[1])
        V = np.empty((k, p))
        for f in range(k):
            V[f] = mus[2 + f] + np.array([sim.normal() for _ in range(p)]) \
                / math.sqrt(lambdas[2 + f])
        truth = FMParams(float(w0), w, V)
        X = _random_design(sim, n_samples, p)
        y = predict(truth, X) + np.array(
            [sim.normal() for _ in range(n_samples)]) / math.sqrt(alpha)
        train = LabeledData(X=X, y=y)
        options = McmcOptions(init_params=truth, init_alpha=alpha,
                              init_lambda=lambdas, init_mu=mus,
                              theta_sd_scale=theta_sd_scale)
        chain_config = config.with_updates(seed=seeds[2 * rep + 1])
        true_flat = truth.flat()
        draws = np.empty((n_gibbs_iter, true_flat.shape[0]))
        try:
            state = None
            for _ in range(n_burn_in):
                _, state, _ = mcmc_fit_predict(train, x_test, chain_config,
                                               state=state, options=options)
            for it in range(n_gibbs_iter):
                _, state, _ = mcmc_fit_predict(train, x_test, chain_config,
                                               state=state, options=options)
                draws[it] = state.params.flat()
        except DivergenceError:
            n_failed += 1
            if n_failed > 0.05 * n_replications:
                raise FastFMError(
                    f"{n_failed} of {rep + 1} replications diverged; "
                    "the sampler is unusable on this configuration") from None
            continue
        below = np.sum(draws < true_flat, axis=0)
        ties = np.sum(draws == true_flat, axis=0)
        pooled.append((below + 0.5 * ties) / n_gibbs_iter)
    quantiles = np.concatenate(pooled) if pooled else np.empty(0)
    stat, p_value = ks_uniform(quantiles)
    if csv_out is not None:
        with open(csv_out, "w", encoding="utf-8") as fh:
            fh.write("quantile\n")
            for qv in quantiles:
                fh.write(f"{float(qv)!r}\n")
    return QuantileReport(quantiles=quantiles, ks_statistic=stat,
                          ks_p_value=p_value, n_failed=n_failed)
