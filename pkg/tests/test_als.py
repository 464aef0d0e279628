import numpy as np
import pytest

from fastfm import _kernels as _k
from fastfm.als import als_continue, als_fit, als_fit_classification
from fastfm.datasets import make_one_hot_interactions
from fastfm.exceptions import DataError, StaleCachesError
from fastfm.model import FMParams, SolverConfig, build_caches, init_params, \
    predict
from fastfm.sparse import LabeledData, SparseRowMatrix, to_column_major

from conftest import random_labeled, random_params


def test_ols_recovery_within_1e9(ols_toy):
    # closed-form oracle: slope sum(xy)/sum(x^2) = 10/5 = 2, intercept 0
    config = SolverConfig(rank=0, n_iter=300, init_std=0.0, seed=1,
                          task="regression")
    params, report = als_fit(ols_toy, config)
    assert abs(params.w[0] - 2.0) < 1e-9
    assert abs(params.w0) < 1e-9
    assert report.n_iter_done == 300


def test_single_sweep_follows_update_formula(ols_toy):
    # hand oracle for one sweep in the fixed order (w0 first, then w):
    #   w0' = (0*2 - (-6)) / 2 = 3, then e = (1, -1)
    #   w'  = (0*5 - (1*1 + 2*(-1))) / 5 = 0.2
    config = SolverConfig(rank=0, n_iter=1, init_std=0.0, seed=1,
                          task="regression")
    params, _ = als_fit(ols_toy, config)
    assert params.w0 == pytest.approx(3.0, abs=1e-15)
    assert params.w[0] == pytest.approx(0.2, abs=1e-15)


def test_zero_targets_zero_warmstart_is_fixed_point():
    data = random_labeled(10, 6, 0.4, seed=1)
    data = LabeledData(X=data.X, y=np.zeros(10))
    warm = FMParams(0.0, np.zeros(6), np.zeros((3, 6)))
    config = SolverConfig(rank=3, n_iter=5, init_std=0.0, l2_reg_w=0.5,
                          l2_reg_V=0.5, seed=2, task="regression")
    params, _ = als_fit(data, config, warm=warm)
    assert params.w0 == 0.0
    assert not params.w.any()
    assert not params.V.any()


def test_noiseless_low_rank_interactions_are_learned():
    # generator with known ground truth; 50 sweeps must cut the training
    # RMSE to below 1% of the initial-model RMSE
    data, _ = make_one_hot_interactions(100, 50, 2000, rank=2,
                                        noise_std=0.0, seed=5)
    config = SolverConfig(rank=4, n_iter=50, init_std=0.1, l2_reg_w=0.01,
                          l2_reg_V=0.01, seed=3, task="regression")
    init = init_params(data.X.n_cols, config)
    rmse_init = float(np.sqrt(np.mean((predict(init, data.X) - data.y) ** 2)))
    params, _ = als_fit(data, config)
    rmse = float(np.sqrt(np.mean((predict(params, data.X) - data.y) ** 2)))
    assert rmse <= 0.01 * rmse_init


def test_objective_never_increases_across_sweeps():
    for seed in range(20):
        data = random_labeled(25, 10, 0.35, seed=seed)
        config = SolverConfig(rank=3, n_iter=15, init_std=0.1,
                              l2_reg_w=0.1, l2_reg_V=0.1, seed=seed,
                              task="regression")
        _, report = als_fit(data, config)
        obj = report.objective_per_iter
        assert np.all(np.isfinite(obj))
        drops = np.diff(obj)
        assert np.all(drops <= 1e-9 * np.maximum(1.0, obj[:-1]))


def test_cache_coherence_after_one_incremental_sweep():
    data = random_labeled(30, 12, 0.3, seed=7)
    params = random_params(12, 4, seed=8)
    caches = build_caches(params, data.X)
    e = caches.y_hat - data.y
    Xc = to_column_major(data.X)
    w0a = np.array([params.w0])
    _k.als_sweep(Xc.col_offsets, Xc.row_indices, Xc.values, e, caches.q,
                 w0a, params.w, params.V, 0.0, 0.1, 0.1)
    params.w0 = float(w0a[0])
    fresh = build_caches(params, data.X)
    rel_e = np.max(np.abs((fresh.y_hat - data.y) - e)
                   / np.maximum(1.0, np.abs(e)))
    rel_q = np.max(np.abs(fresh.q - caches.q)
                   / np.maximum(1.0, np.abs(caches.q)))
    assert rel_e < 1e-9
    assert rel_q < 1e-9


def test_huge_regularization_kills_weights_keeps_bias():
    data = random_labeled(40, 8, 0.4, seed=11)
    config = SolverConfig(rank=2, n_iter=20, init_std=0.1, l2_reg_w=1e12,
                          l2_reg_V=1e12, seed=4, task="regression")
    params, _ = als_fit(data, config)
    assert np.linalg.norm(params.w) < 1e-6
    assert np.linalg.norm(params.V) < 1e-6
    # unpenalised bias settles on the target mean
    assert params.w0 == pytest.approx(float(data.y.mean()), rel=1e-6)


def test_degenerate_column_keeps_warm_value():
    # feature 3 never occurs; its weight must survive the fit untouched
    X = SparseRowMatrix(3, 5, [0, 2, 4, 6], [0, 1, 1, 2, 0, 4],
                        [1.0, 2.0, 1.0, 1.0, 3.0, 1.0])
    data = LabeledData(X=X, y=np.array([1.0, 2.0, 3.0]))
    warm = random_params(5, 2, seed=12)
    sentinel_w = warm.w[3]
    sentinel_v = warm.V[:, 3].copy()
    config = SolverConfig(rank=2, n_iter=4, init_std=0.1, l2_reg_w=0.1,
                          l2_reg_V=0.1, seed=5, task="regression")
    params, _ = als_fit(data, config, warm=warm)
    assert params.w[3] == sentinel_w
    assert np.array_equal(params.V[:, 3], sentinel_v)


# -- warm start / continuation -------------------------------------------------

def test_continue_zero_iters_is_identity():
    data = random_labeled(20, 7, 0.4, seed=13)
    config = SolverConfig(rank=2, n_iter=10, init_std=0.1, l2_reg_w=0.2,
                          l2_reg_V=0.2, seed=6, task="regression")
    params, _ = als_fit(data, config)
    caches = build_caches(params, data.X)
    out, report = als_continue(params, caches, data, config, 0)
    assert report.n_iter_done == 0
    assert out.w0 == params.w0
    assert np.array_equal(out.w, params.w)
    assert np.array_equal(out.V, params.V)


def test_split_run_bit_identical_to_single_run():
    data = random_labeled(20, 7, 0.4, seed=14)
    base = dict(rank=3, init_std=0.1, l2_reg_w=0.3, l2_reg_V=0.3, seed=7,
                task="regression")
    full, _ = als_fit(data, SolverConfig(n_iter=10, **base))
    half, _ = als_fit(data, SolverConfig(n_iter=5, **base))
    caches = build_caches(half, data.X)
    cont, _ = als_continue(half, caches, data, SolverConfig(n_iter=5, **base),
                           5)
    assert cont.w0 == full.w0
    assert np.array_equal(cont.w, full.w)
    assert np.array_equal(cont.V, full.V)


def test_continue_with_new_regularization_equals_fresh_warm_run():
    data = random_labeled(20, 7, 0.4, seed=15)
    base = dict(rank=2, init_std=0.1, seed=8, task="regression")
    params, _ = als_fit(data, SolverConfig(n_iter=6, l2_reg_w=0.1,
                                           l2_reg_V=0.1, **base))
    changed = SolverConfig(n_iter=4, l2_reg_w=2.0, l2_reg_V=2.0, **base)
    caches = build_caches(params, data.X)
    cont, _ = als_continue(params, caches, data, changed, 4)
    fresh, _ = als_fit(data, changed, warm=params)
    assert cont.w0 == fresh.w0
    assert np.array_equal(cont.w, fresh.w)
    assert np.array_equal(cont.V, fresh.V)


def test_stale_caches_are_rejected():
    data = random_labeled(15, 5, 0.5, seed=16)
    config = SolverConfig(rank=2, n_iter=3, init_std=0.1, seed=9,
                          task="regression")
    params, _ = als_fit(data, config)
    caches = build_caches(params, data.X)
    caches.y_hat[0] += 1.0
    with pytest.raises(StaleCachesError):
        als_continue(params, caches, data, config, 2)


def test_warm_start_dimension_mismatch():
    data = random_labeled(10, 5, 0.5, seed=17)
    config = SolverConfig(rank=2, n_iter=2, task="regression")
    with pytest.raises(DataError):
        als_fit(data, config, warm=random_params(4, 2, seed=1))
    with pytest.raises(DataError):
        als_fit(data, config, warm=random_params(5, 3, seed=1))


# -- probit MAP classification ----------------------------------------------

def test_working_target_at_zero_margin():
    # oracle: numeric integration of the positive-halfline normal mean
    z = np.linspace(0.0, 12.0, 200_001)
    phi = np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    expected = np.trapezoid(z * phi, z) / np.trapezoid(phi, z)
    out = np.empty(1)
    _k.probit_working_targets(np.zeros(1), np.ones(1), out)
    assert out[0] == pytest.approx(expected, abs=1e-6)
    assert out[0] == pytest.approx(0.79788, abs=1e-5)


def test_working_targets_extreme_margins_stay_finite():
    yhat = np.array([-40.0, -9.0, 0.0, 9.0, 40.0])
    labels = np.ones(5)
    out = np.empty(5)
    _k.probit_working_targets(yhat, labels, out)
    assert np.all(np.isfinite(out))
    # the positive-halfline mean exceeds the centre; at large positive
    # margins the shift underflows against yhat, so equality is allowed
    assert np.all(out >= yhat)
    assert np.all(out[:3] > yhat[:3])


def test_label_flip_symmetry_with_zero_init():
    # the pair term is even in V, so exact sign symmetry needs the
    # all-zero factor start the probit remap preserves
    data = random_labeled(16, 6, 0.5, seed=18)
    y = np.where(data.y > 0, 1.0, -1.0)
    flipped = LabeledData(X=data.X, y=-y)
    data = LabeledData(X=data.X, y=y)
    config = SolverConfig(rank=2, n_iter=8, init_std=0.0, l2_reg_w=0.1,
                          l2_reg_V=0.1, seed=10, task="classification")
    pos, _ = als_fit_classification(data, config)
    neg, _ = als_fit_classification(flipped, config)
    assert np.array_equal(predict(neg, data.X), -predict(pos, data.X))


def test_linearly_separable_toy_reaches_full_accuracy():
    X = SparseRowMatrix(8, 2, list(range(0, 17, 2)), [0, 1] * 8,
                        [1.0, 0.2, 2.0, 0.1, 1.5, -0.3, 0.5, 0.4,
                         -1.0, 0.1, -2.0, -0.2, -0.5, 0.3, -1.5, 0.2])
    y = np.array([1.0] * 4 + [-1.0] * 4)
    data = LabeledData(X=X, y=y)
    config = SolverConfig(rank=2, n_iter=20, init_std=0.1, l2_reg_w=0.01,
                          l2_reg_V=0.01, seed=11, task="classification")
    params, report = als_fit_classification(data, config)
    assert np.all(np.sign(predict(params, X)) == y)
    assert np.all(np.isfinite(report.objective_per_iter))


def test_classification_rejects_bad_labels():
    data = random_labeled(10, 4, 0.5, seed=19)
    config = SolverConfig(rank=1, n_iter=2, task="classification")
    with pytest.raises(DataError):
        als_fit_classification(data, config)


def test_regression_entry_point_rejects_wrong_task():
    data = random_labeled(5, 3, 0.5, seed=20)
    with pytest.raises(DataError):
        als_fit(data, SolverConfig(task="classification"))
