"""Numba-compiled numerical kernels.

Everything here operates on plain ndarrays so the hot loops stay allocation
free. The random stream is xoshiro256** seeded through splitmix64; all
samplers consume that single stream in a fixed, documented order so that
fits are reproducible bit-for-bit across platforms and across warm starts.

RNG algorithm constants (xoshiro256**, Blackman & Vigna):
    next    = rotl(s1 * 5, 7) * 9
    t       = s1 << 17
    s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
Uniform doubles are ((next >> 11) + 0.5) * 2**-53, strictly inside (0, 1).
Normals come from the inverse CDF (Wichura's PPND16 rational approximation),
exactly one uniform per normal. Gamma variates use Marsaglia & Tsang's
squeeze method and consume a variable but stream-deterministic number of
draws.
"""

import math

import numpy as np
from numba import njit, prange

U64 = np.uint64

_INV_2_53 = 2.0 ** -53
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# xoshiro256** core
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rotl(x, k):
    return U64((x << k) | (x >> (U64(64) - k)))


@njit(cache=True)
def rng_next_u64(s):
    """Advance the 4-word state in place and return the next output word."""
    r = _rotl(U64(s[1] * U64(5)), U64(7)) * U64(9)
    t = U64(s[1] << U64(17))
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], U64(45))
    return r


@njit(cache=True)
def rng_uniform(s):
    """Uniform double in the open interval (0, 1); one output word."""
    return (np.float64(rng_next_u64(s) >> U64(11)) + 0.5) * _INV_2_53


@njit(cache=True)
def rng_uniform_fill(s, out):
    for i in range(out.shape[0]):
        out[i] = rng_uniform(s)


# ---------------------------------------------------------------------------
# Normal inverse CDF (Wichura PPND16), CDF and density helpers
# ---------------------------------------------------------------------------

@njit(cache=True)
def ndtri(p):
    """Inverse standard normal CDF, |relative error| < 1e-15 on (0, 1)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    x = num / den
    if q < 0.0:
        return -x
    return x


@njit(cache=True)
def normal_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True)
def normal_pdf(x):
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


@njit(cache=True)
def inverse_mills(t):
    """phi(t) / Phi(t), switching to the asymptotic tail series below -8."""
    if t >= -8.0:
        return normal_pdf(t) / normal_cdf(t)
    # Phi(t) ~ phi(t)/(-t) * (1 - 1/t^2 + 3/t^4 - 15/t^6 + 105/t^8)
    inv2 = 1.0 / (t * t)
    series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)))
    return -t / series


@njit(cache=True)
def rng_normal(s):
    """Standard normal via inverse CDF; exactly one uniform consumed."""
    return ndtri(rng_uniform(s))


@njit(cache=True)
def rng_normal_fill(s, out):
    for i in range(out.shape[0]):
        out[i] = rng_normal(s)


@njit(cache=True)
def rng_gamma(s, shape):
    """Gamma(shape, scale=1) via Marsaglia-Tsang; shape > 0."""
    if shape < 1.0:
        # boost: Gamma(a) = Gamma(a + 1) * U^(1/a)
        g = rng_gamma(s, shape + 1.0)
        u = rng_uniform(s)
        return g * math.pow(u, 1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng_normal(s)
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = rng_uniform(s)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


@njit(cache=True)
def rng_trunc_norm_lower(s, a):
    """Standard normal conditioned on exceeding a.

    Inverse CDF on the surviving tail for a <= 6; Robert's exponential
    rejection beyond, where the tail probability underflows the inverse map.
    """
    if a <= 6.0:
        tail = normal_cdf(-a)
        u = rng_uniform(s)
        return -ndtri((1.0 - u) * tail)
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        x = a - math.log(rng_uniform(s)) / lam
        u = rng_uniform(s)
        d = x - lam
        if math.log(u) <= -0.5 * d * d:
            return x


@njit(cache=True)
def log_normal_cdf(t):
    """ln Phi(t); the tail series keeps it finite for very negative t."""
    if t >= -8.0:
        return math.log(normal_cdf(t))
    inv2 = 1.0 / (t * t)
    series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)))
    # ln phi(t) - ln(-t) + ln(series)
    return -0.5 * t * t - 0.9189385332046727 - math.log(-t) + math.log(series)


@njit(cache=True)
def probit_working_targets(yhat, labels, out):
    """Truncated-normal means: z_n = yhat_n + y_n * phi(y yhat)/Phi(y yhat)."""
    for i in range(yhat.shape[0]):
        out[i] = yhat[i] + labels[i] * inverse_mills(labels[i] * yhat[i])


@njit(cache=True)
def probit_nll(yhat, labels):
    """Negative log-likelihood -sum ln Phi(y_n yhat_n)."""
    total = 0.0
    for i in range(yhat.shape[0]):
        total -= log_normal_cdf(labels[i] * yhat[i])
    return total


# ---------------------------------------------------------------------------
# Stable sigmoid helpers
# ---------------------------------------------------------------------------

@njit(cache=True)
def sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@njit(cache=True)
def log_sigmoid(t):
    if t >= 0.0:
        return -math.log1p(math.exp(-t))
    return t - math.log1p(math.exp(t))


# ---------------------------------------------------------------------------
# CSR prediction and cache construction
# ---------------------------------------------------------------------------

@njit(cache=True)
def csr_fm_predict(offs, cols, vals, n_rows, w0, w, V, out):
    """Factored second-order forward pass, O(nnz * k)."""
    k = V.shape[0]
    for i in range(n_rows):
        lo = offs[i]
        hi = offs[i + 1]
        acc = w0
        for idx in range(lo, hi):
            acc += w[cols[idx]] * vals[idx]
        pair = 0.0
        for f in range(k):
            sf = 0.0
            sq = 0.0
            for idx in range(lo, hi):
                t = V[f, cols[idx]] * vals[idx]
                sf += t
                sq += t * t
            pair += sf * sf - sq
        out[i] = acc + 0.5 * pair


@njit(cache=True, parallel=True)
def csr_fm_predict_parallel(offs, cols, vals, n_rows, w0, w, V, out):
    """Row-parallel variant; rows are independent so output is deterministic."""
    k = V.shape[0]
    for i in prange(n_rows):
        lo = offs[i]
        hi = offs[i + 1]
        acc = w0
        for idx in range(lo, hi):
            acc += w[cols[idx]] * vals[idx]
        pair = 0.0
        for f in range(k):
            sf = 0.0
            sq = 0.0
            for idx in range(lo, hi):
                t = V[f, cols[idx]] * vals[idx]
                sf += t
                sq += t * t
            pair += sf * sf - sq
        out[i] = acc + 0.5 * pair


@njit(cache=True)
def csr_q_matrix(offs, cols, vals, n_rows, V, q):
    """q[f, n] = sum_i V[f, i] * x_n[i]; q must come in zeroed, shape (k, n)."""
    k = V.shape[0]
    for i in range(n_rows):
        for idx in range(offs[i], offs[i + 1]):
            c = cols[idx]
            x = vals[idx]
            for f in range(k):
                q[f, i] += V[f, c] * x


@njit(cache=True)
def normal_cdf_fill(x, out):
    for i in range(x.shape[0]):
        out[i] = normal_cdf(x[i])


# ---------------------------------------------------------------------------
# Incremental cache shifts (shared by the ALS and Gibbs sweeps and by tests)
# ---------------------------------------------------------------------------

@njit(cache=True)
def shift_w0(delta, e):
    for i in range(e.shape[0]):
        e[i] += delta


@njit(cache=True)
def shift_w(j, delta, cofs, crows, cvals, e):
    for idx in range(cofs[j], cofs[j + 1]):
        e[crows[idx]] += delta * cvals[idx]


@njit(cache=True)
def shift_v(f, j, delta, v_old, cofs, crows, cvals, e, q):
    """Apply V[f, j] -> v_old + delta to the e and q caches.

    h is evaluated at the pre-update factor value, matching the linearisation
    the closed-form coordinate updates are derived from.
    """
    for idx in range(cofs[j], cofs[j + 1]):
        r = crows[idx]
        x = cvals[idx]
        h = x * (q[f, r] - v_old * x)
        e[r] += delta * h
        q[f, r] += delta * x


# ---------------------------------------------------------------------------
# ALS coordinate sweep
# ---------------------------------------------------------------------------

@njit(cache=True)
def als_sweep(cofs, crows, cvals, e, q, w0a, w, V, lam_w0, lam_w, lam_v):
    """One full coordinate sweep: w0, then w ascending, then V factor-major.

    e is the signed residual (prediction minus target); all caches are
    updated incrementally. Columns with an empty support (or with all
    interaction coefficients zero) are skipped so warm-started values
    survive untouched.
    """
    n = e.shape[0]
    p = w.shape[0]
    k = V.shape[0]
    if n > 0:
        sh2 = np.float64(n)
        she = 0.0
        for i in range(n):
            she += e[i]
        new = (w0a[0] * sh2 - she) / (sh2 + lam_w0)
        d = new - w0a[0]
        w0a[0] = new
        shift_w0(d, e)
    for j in range(p):
        lo = cofs[j]
        hi = cofs[j + 1]
        if lo == hi:
            continue
        sh2 = 0.0
        she = 0.0
        for idx in range(lo, hi):
            x = cvals[idx]
            sh2 += x * x
            she += x * e[crows[idx]]
        new = (w[j] * sh2 - she) / (sh2 + lam_w)
        d = new - w[j]
        w[j] = new
        shift_w(j, d, cofs, crows, cvals, e)
    for f in range(k):
        for j in range(p):
            lo = cofs[j]
            hi = cofs[j + 1]
            if lo == hi:
                continue
            vfj = V[f, j]
            sh2 = 0.0
            she = 0.0
            for idx in range(lo, hi):
                r = crows[idx]
                x = cvals[idx]
                h = x * (q[f, r] - vfj * x)
                sh2 += h * h
                she += h * e[r]
            if sh2 == 0.0:
                continue
            new = (vfj * sh2 - she) / (sh2 + lam_v)
            d = new - vfj
            V[f, j] = new
            shift_v(f, j, d, vfj, cofs, crows, cvals, e, q)


# ---------------------------------------------------------------------------
# Gibbs sweep
# ---------------------------------------------------------------------------

@njit(cache=True)
def gibbs_sample_hypers(s, w0a, w, V, lambdas, mus,
                        a_lambda, b_lambda, gamma_0, mu_0):
    """Draw (lambda, mu) for every prior group, in group order.

    Groups: 0 -> {w0}, 1 -> {w_i}, 2 + f -> {V[f, :]}. The pair is
    conjugate normal-gamma: lambda given the current mu, then mu given the
    fresh lambda.
    """
    p = w.shape[0]
    k = V.shape[0]
    for g in range(2 + k):
        if g == 0:
            cnt = 1.0
            ssum = w0a[0]
            ssd = (w0a[0] - mus[0]) ** 2
        elif g == 1:
            cnt = np.float64(p)
            ssum = 0.0
            ssd = 0.0
            for j in range(p):
                ssum += w[j]
                d = w[j] - mus[1]
                ssd += d * d
        else:
            f = g - 2
            cnt = np.float64(p)
            ssum = 0.0
            ssd = 0.0
            for j in range(p):
                ssum += V[f, j]
                d = V[f, j] - mus[g]
                ssd += d * d
        dm = mus[g] - mu_0
        shape = a_lambda + 0.5 * (cnt + 1.0)
        rate = b_lambda + 0.5 * (ssd + gamma_0 * dm * dm)
        lambdas[g] = rng_gamma(s, shape) / rate
        mu_mean = (ssum + gamma_0 * mu_0) / (cnt + gamma_0)
        mu_sd = 1.0 / math.sqrt((cnt + gamma_0) * lambdas[g])
        mus[g] = mu_mean + mu_sd * rng_normal(s)


@njit(cache=True)
def gibbs_sweep(cofs, crows, cvals, e, q, w0a, w, V,
                alpha, lambdas, mus, s, theta_sd_scale):
    """Draw every model parameter from its full conditional, ALS order.

    Empty or degenerate columns fall back to the prior draw naturally
    (sum h^2 = 0 makes the conditional collapse onto it); every parameter
    consumes exactly one normal deviate so the stream layout is static.
    """
    n = e.shape[0]
    p = w.shape[0]
    k = V.shape[0]
    # w0, h = 1
    sh2 = np.float64(n)
    she = 0.0
    for i in range(n):
        she += e[i]
    var = 1.0 / (alpha * sh2 + lambdas[0])
    mean = var * (alpha * (w0a[0] * sh2 - she) + lambdas[0] * mus[0])
    new = mean + math.sqrt(var) * theta_sd_scale * rng_normal(s)
    d = new - w0a[0]
    w0a[0] = new
    shift_w0(d, e)
    # first-order weights
    for j in range(p):
        sh2 = 0.0
        she = 0.0
        for idx in range(cofs[j], cofs[j + 1]):
            x = cvals[idx]
            sh2 += x * x
            she += x * e[crows[idx]]
        var = 1.0 / (alpha * sh2 + lambdas[1])
        mean = var * (alpha * (w[j] * sh2 - she) + lambdas[1] * mus[1])
        new = mean + math.sqrt(var) * theta_sd_scale * rng_normal(s)
        d = new - w[j]
        w[j] = new
        if d != 0.0:
            shift_w(j, d, cofs, crows, cvals, e)
    # factors
    for f in range(k):
        g = 2 + f
        for j in range(p):
            vfj = V[f, j]
            sh2 = 0.0
            she = 0.0
            for idx in range(cofs[j], cofs[j + 1]):
                r = crows[idx]
                x = cvals[idx]
                h = x * (q[f, r] - vfj * x)
                sh2 += h * h
                she += h * e[r]
            var = 1.0 / (alpha * sh2 + lambdas[g])
            mean = var * (alpha * (vfj * sh2 - she) + lambdas[g] * mus[g])
            new = mean + math.sqrt(var) * theta_sd_scale * rng_normal(s)
            d = new - vfj
            V[f, j] = new
            if d != 0.0:
                shift_v(f, j, d, vfj, cofs, crows, cvals, e, q)


@njit(cache=True)
def factor_sign_flips(s, V, mus):
    """Flip each factor row's sign with probability 1/2 (one uniform per
    factor, in factor order), negating its prior mean along with it.

    The model is even in every factor row and the hyperprior mean is
    centred at zero, so the joint density is invariant: this is an
    always-accepted Metropolis move that hops the +-V[f,:] modes the
    single-site sweep cannot cross, yet leaves every prediction unchanged.
    """
    k = V.shape[0]
    p = V.shape[1]
    for f in range(k):
        if rng_uniform(s) < 0.5:
            for j in range(p):
                V[f, j] = -V[f, j]
            mus[2 + f] = -mus[2 + f]


@njit(cache=True)
def draw_probit_latents(yhat, labels, s, z):
    """Truncated-normal augmentation: z_n ~ N(yhat_n, 1) on the y_n halfline."""
    for i in range(yhat.shape[0]):
        c = yhat[i]
        if labels[i] > 0.0:
            z[i] = c + rng_trunc_norm_lower(s, -c)
        else:
            z[i] = c - rng_trunc_norm_lower(s, c)


# ---------------------------------------------------------------------------
# SGD epochs
# ---------------------------------------------------------------------------

@njit(cache=True)
def rng_shuffle(s, order):
    """Fisher-Yates using the shared stream; one uniform per swap."""
    n = order.shape[0]
    for i in range(n - 1, 0, -1):
        j = int(rng_uniform(s) * (i + 1))
        if j > i:
            j = i
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp


@njit(cache=True)
def sgd_epoch(offs, cols, vals, y, order, w0a, w, V,
              lam_w0, lam_w, lam_v, step, squared, sbuf):
    """One pass over samples in the given order; returns the summed
    pre-update per-sample loss. squared=True is 0.5*e^2, otherwise
    logistic loss on labels in {-1, +1}."""
    k = V.shape[0]
    total = 0.0
    for t in range(order.shape[0]):
        i = order[t]
        lo = offs[i]
        hi = offs[i + 1]
        acc = w0a[0]
        for f in range(k):
            sbuf[f] = 0.0
        pair = 0.0
        for idx in range(lo, hi):
            acc += w[cols[idx]] * vals[idx]
        for f in range(k):
            sf = 0.0
            sq = 0.0
            for idx in range(lo, hi):
                tv = V[f, cols[idx]] * vals[idx]
                sf += tv
                sq += tv * tv
            sbuf[f] = sf
            pair += sf * sf - sq
        yhat = acc + 0.5 * pair
        if squared:
            g = yhat - y[i]
            total += 0.5 * g * g
        else:
            m = y[i] * yhat
            total += -log_sigmoid(m)
            g = -y[i] * sigmoid(-m)
        w0a[0] -= step * (g + lam_w0 * w0a[0])
        for idx in range(lo, hi):
            c = cols[idx]
            x = vals[idx]
            w[c] -= step * (g * x + lam_w * w[c])
            for f in range(k):
                h = x * (sbuf[f] - V[f, c] * x)
                V[f, c] -= step * (g * h + lam_v * V[f, c])
    return total


@njit(cache=True)
def _row_factor_sums(offs, cols, vals, row, V, sbuf):
    lo = offs[row]
    hi = offs[row + 1]
    k = V.shape[0]
    pair = 0.0
    for f in range(k):
        sf = 0.0
        sq = 0.0
        for idx in range(lo, hi):
            tv = V[f, cols[idx]] * vals[idx]
            sf += tv
            sq += tv * tv
        sbuf[f] = sf
        pair += sf * sf - sq
    return 0.5 * pair


@njit(cache=True)
def bpr_epoch(offs, cols, vals, winners, losers, n_draws, s,
              w0a, w, V, lam_w0, lam_w, lam_v, step, sa, sb):
    """n_draws uniform pair draws of stochastic BPR ascent.

    Returns the mean ln sigma(delta) over the draws, measured pre-update.
    Gradient and weight decay are applied once per touched coordinate via a
    sorted merge of the two row supports.
    """
    k = V.shape[0]
    n_pairs = winners.shape[0]
    total = 0.0
    for t in range(n_draws):
        j = int(rng_uniform(s) * n_pairs)
        if j >= n_pairs:
            j = n_pairs - 1
        a = winners[j]
        b = losers[j]
        lin_a = 0.0
        for idx in range(offs[a], offs[a + 1]):
            lin_a += w[cols[idx]] * vals[idx]
        lin_b = 0.0
        for idx in range(offs[b], offs[b + 1]):
            lin_b += w[cols[idx]] * vals[idx]
        pair_a = _row_factor_sums(offs, cols, vals, a, V, sa)
        pair_b = _row_factor_sums(offs, cols, vals, b, V, sb)
        delta = (lin_a + pair_a) - (lin_b + pair_b)
        total += log_sigmoid(delta)
        m = sigmoid(-delta)
        w0a[0] -= step * lam_w0 * w0a[0]
        ia = offs[a]
        ib = offs[b]
        ea = offs[a + 1]
        eb = offs[b + 1]
        while ia < ea or ib < eb:
            ca = cols[ia] if ia < ea else np.int64(-1)
            cb = cols[ib] if ib < eb else np.int64(-1)
            if ia < ea and (ib >= eb or ca < cb):
                c = ca
                xa = vals[ia]
                xb = 0.0
                ia += 1
            elif ib < eb and (ia >= ea or cb < ca):
                c = cb
                xa = 0.0
                xb = vals[ib]
                ib += 1
            else:
                c = ca
                xa = vals[ia]
                xb = vals[ib]
                ia += 1
                ib += 1
            w[c] += step * (m * (xa - xb) - lam_w * w[c])
            for f in range(k):
                vfc = V[f, c]
                ha = xa * (sa[f] - vfc * xa)
                hb = xb * (sb[f] - vfc * xb)
                V[f, c] += step * (m * (ha - hb) - lam_v * vfc)
    return total / n_draws
