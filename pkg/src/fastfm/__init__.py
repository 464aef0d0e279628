"""Factorization machines over sparse design matrices.

Solvers: coordinate descent (als), Gibbs sampling (mcmc), stochastic
gradient descent (sgd), and pairwise ranking (bpr), each exposing
estimator classes under its namespace:

    from fastfm import als, mcmc, sgd, bpr

    fm = als.FMRegression(init_std=0.01, rank=8, l2_reg=2)
    fm.fit(X_train, y_train)

    fm = mcmc.FMClassification(init_std=0.01, rank=8)
    y_pred = fm.fit_predict(X_train, y_train, X_test)
"""

from . import als, bpr, diagnostics, mcmc, sgd
from .exceptions import DataError, DivergenceError, FastFMError, \
    NotFittedError, ParseError, StaleCachesError
from .model import FitReport, FMParams, SampleCaches, SolverConfig, \
    build_caches, init_params, load_model, load_model_file, predict, \
    predict_naive, predict_proba, save_model, save_model_file
from .rng import Rng, spawn_seeds
from .sparse import LabeledData, SparseColMatrix, SparseRowMatrix, \
    load_libsvm, parse_libsvm, row_dot, save_libsvm, serialize_libsvm, \
    to_column_major, to_row_major

__version__ = "0.1.0"

__all__ = [
    "als", "bpr", "diagnostics", "mcmc", "sgd",
    "DataError", "DivergenceError", "FastFMError", "NotFittedError",
    "ParseError", "StaleCachesError",
    "FitReport", "FMParams", "SampleCaches", "SolverConfig",
    "build_caches", "init_params", "load_model", "load_model_file",
    "predict", "predict_naive", "predict_proba", "save_model",
    "save_model_file",
    "Rng", "spawn_seeds",
    "LabeledData", "SparseColMatrix", "SparseRowMatrix", "load_libsvm",
    "parse_libsvm", "row_dot", "save_libsvm", "serialize_libsvm",
    "to_column_major", "to_row_major",
    "__version__",
]
