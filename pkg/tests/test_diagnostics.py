import math

import numpy as np
import pytest
from scipy import stats

from fastfm.diagnostics import finite_difference_check, ks_uniform, \
    posterior_quantile_run
from fastfm.exceptions import DataError
from fastfm.model import FMParams, SolverConfig
from fastfm.sgd import full_batch_loss, loss_gradient

from conftest import random_labeled, random_params


def test_quadratic_loss_is_exact_for_central_differences():
    theta = np.linspace(-2, 2, 9)
    err = finite_difference_check(lambda t: 0.5 * float(t @ t), theta.copy(),
                                  theta, 1e-5)
    assert err < 1e-10


def test_fm_square_loss_gradient_check():
    data = random_labeled(15, 7, 0.4, seed=1)
    params = random_params(7, 3, seed=2)
    config = SolverConfig(rank=3, l2_reg_w=0.1, l2_reg_V=0.1,
                          task="regression")
    def loss(t):
        return full_batch_loss(FMParams.from_flat(t, 7, 3), data, "square",
                               config)
    grad = loss_gradient(params, data, "square", config)
    assert finite_difference_check(loss, grad, params.flat(), 1e-5) < 1e-4


def test_tiny_epsilon_is_flagged_as_unreliable():
    theta = np.array([0.7, -1.3])
    def loss(t):
        return 0.5 * float(t @ t)
    with pytest.warns(RuntimeWarning, match="epsilon"):
        noisy = finite_difference_check(loss, theta.copy(), theta, 1e-12)
    clean = finite_difference_check(loss, theta.copy(), theta, 1e-5)
    assert noisy > clean


def test_gradient_callable_and_validation():
    theta = np.ones(3)
    err = finite_difference_check(lambda t: 0.5 * float(t @ t),
                                  lambda t: t.copy(), theta, 1e-6)
    assert err < 1e-9
    with pytest.raises(DataError):
        finite_difference_check(lambda t: float(t.sum()), np.ones(2), theta,
                                1e-6)
    with pytest.raises(DataError):
        finite_difference_check(lambda t: float(t.sum()), theta, theta, 0.0)


def test_non_finite_loss_is_reported():
    theta = np.array([0.0])
    def loss(t):
        return math.inf if t[0] > 0.5e-5 else 1.0
    with pytest.raises(DataError, match="non-finite"):
        finite_difference_check(loss, theta.copy(), theta, 1e-5)


# -- KS test -------------------------------------------------------------------

def test_ks_against_scipy_oracle():
    rng = np.random.default_rng(0)
    for sample in (rng.uniform(size=400), rng.uniform(size=400) ** 1.3,
                   np.clip(rng.normal(0.5, 0.2, size=300), 0, 1)):
        stat, p = ks_uniform(sample)
        ref = stats.kstest(sample, "uniform")
        assert stat == pytest.approx(ref.statistic, abs=1e-12)
        # asymptotic vs exact p differ slightly; both must agree on scale
        assert abs(p - ref.pvalue) < 0.02


def test_ks_validation():
    with pytest.raises(DataError):
        ks_uniform([])
    with pytest.raises(DataError):
        ks_uniform([-0.1, 0.5])


# -- posterior quantile harness --------------------------------------------------

def test_quantile_run_validates_inputs():
    with pytest.raises(DataError):
        posterior_quantile_run((5, 2, 40), 0, 10, seed=1)
    with pytest.raises(DataError):
        posterior_quantile_run((5, 2, 40), 10, 10, seed=1)  # below minimum
    with pytest.raises(DataError):
        posterior_quantile_run((0, 2, 40), 60, 10, seed=1)


def test_quantile_run_deterministic_and_well_formed(tmp_path):
    out = tmp_path / "quantiles.csv"
    a = posterior_quantile_run((3, 1, 16), 50, 60, seed=5, n_burn_in=10,
                               csv_out=out)
    b = posterior_quantile_run((3, 1, 16), 50, 60, seed=5, n_burn_in=10)
    assert np.array_equal(a.quantiles, b.quantiles)
    assert a.ks_statistic == b.ks_statistic
    assert a.n_failed == 0
    assert len(a.quantiles) == 50 * (1 + 3 + 3)
    assert np.all((a.quantiles >= 0) & (a.quantiles <= 1))
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "quantile"
    assert len(lines) == len(a.quantiles) + 1
    assert float(lines[1]) == a.quantiles[0]
