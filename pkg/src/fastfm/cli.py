"""Command-line front end: fit, predict, benchmark, serve.

Exit codes: 0 success, 2 flag errors, 3 input parse/shape errors (messages
carry line numbers where known), 4 solver divergence. Prediction files hold
one full-precision decimal per line; the fit summary is a single JSON line
on stdout. FASTFM_THREADS caps row-parallel prediction (default 1).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import als as als_ns
from . import bpr as bpr_ns
from . import mcmc as mcmc_ns
from . import sgd as sgd_ns
from ._kernels import probit_nll
from .exceptions import DataError, DivergenceError, FastFMError, ParseError
from .model import SolverConfig, load_model_file, predict, predict_proba, \
    save_model_file
from .sgd import log_sigmoid_stable
from .sparse import clip_columns, load_libsvm
from .serialize import load_mcmc_state, save_mcmc_state

EXIT_OK = 0
EXIT_FLAGS = 2
EXIT_PARSE = 3
EXIT_DIVERGED = 4

_TASKS = {"r": "regression", "c": "classification", "rank": "ranking"}


def _flag_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_FLAGS


def write_predictions(path, values) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in values:
            fh.write(repr(float(v)) + "\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastfm",
        description="Factorization machines: ALS, Gibbs MCMC and SGD/BPR "
                    "solvers over libsvm files.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="train a model")
    fit.add_argument("--task", choices=sorted(_TASKS), required=True)
    fit.add_argument("--solver", choices=["als", "mcmc", "sgd"],
                     required=True)
    fit.add_argument("--train", required=True)
    fit.add_argument("--test")
    fit.add_argument("--pairs")
    fit.add_argument("--rank", type=int, default=8)
    fit.add_argument("--n-iter", type=int, default=100)
    fit.add_argument("--init-std", type=float, default=0.1)
    fit.add_argument("--l2-reg", type=float, default=None)
    fit.add_argument("--l2-reg-w", type=float, default=None)
    fit.add_argument("--l2-reg-V", type=float, default=None)
    fit.add_argument("--step-size", type=float, default=0.01)
    fit.add_argument("--seed", type=int, default=123)
    fit.add_argument("--model-out")
    fit.add_argument("--pred-out")
    fit.add_argument("--trace-out")
    fit.add_argument("--warm-start")
    fit.add_argument("--state-out",
                     help="write the carried MCMC state (mcmc only)")
    fit.add_argument("--one-based", action="store_true",
                     help="input files use 1-based feature indices")
    fit.add_argument("--n-features", type=int, default=None,
                     help="force the feature count above the largest index")

    pred = sub.add_parser("predict", help="apply a saved model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--pred-out", required=True)
    pred.add_argument("--proba", action="store_true",
                      help="emit Phi(y_hat) class probabilities")
    pred.add_argument("--clip-features", action="store_true",
                      help="ignore features the model does not know")
    pred.add_argument("--one-based", action="store_true")

    bench = sub.add_parser("benchmark",
                           help="time fits across ranks at fixed iterations")
    bench.add_argument("--train", required=True)
    bench.add_argument("--solver", choices=["als", "mcmc"], required=True)
    bench.add_argument("--ranks", required=True,
                       help="comma-separated rank list, e.g. 8,16,32,64")
    bench.add_argument("--n-iter", type=int, default=200)
    bench.add_argument("--repeats", type=int, default=1)
    bench.add_argument("--out", required=True)
    bench.add_argument("--test",
                       help="test file for the mcmc accumulator "
                            "(defaults to the train file)")
    bench.add_argument("--l2-reg", type=float, default=None)
    bench.add_argument("--seed", type=int, default=123)
    bench.add_argument("--one-based", action="store_true")

    sub.add_parser("serve",
                   help="speak the JSON-lines protocol on stdin/stdout")
    return parser


def _config_from_args(args, task: str) -> SolverConfig:
    base = 0.0 if args.l2_reg is None else args.l2_reg
    return SolverConfig(
        rank=args.rank,
        n_iter=args.n_iter,
        init_std=args.init_std,
        l2_reg_w=base if args.l2_reg_w is None else args.l2_reg_w,
        l2_reg_V=base if args.l2_reg_V is None else args.l2_reg_V,
        step_size=args.step_size,
        seed=args.seed,
        task=task,
    )


def cmd_fit(args) -> int:
    task = _TASKS[args.task]
    if args.solver == "mcmc":
        if task == "ranking":
            return _flag_error("--solver mcmc does not support --task rank")
        if not args.test:
            return _flag_error("--solver mcmc requires --test: the sampler "
                               "averages predictions over draws")
        if args.model_out:
            return _flag_error("--model-out is not available with --solver "
                               "mcmc; use --state-out to carry the chain")
    else:
        if args.trace_out:
            return _flag_error("--trace-out only applies to --solver mcmc")
        if args.state_out:
            return _flag_error("--state-out only applies to --solver mcmc")
    if task == "ranking":
        if args.solver != "sgd":
            return _flag_error("--task rank requires --solver sgd (BPR)")
        if not args.pairs:
            return _flag_error("--task rank requires --pairs")
    elif args.pairs:
        return _flag_error("--pairs only applies to --task rank")

    config = _config_from_args(args, task)
    train = load_libsvm(args.train, n_cols=args.n_features,
                        one_based=args.one_based)
    if task == "classification":
        if not np.all(np.isin(train.y, (-1.0, 1.0))):
            raise DataError("classification labels must be -1 or +1")

    t0 = time.perf_counter()
    summary = {"task": task, "solver": args.solver, "n_iter": args.n_iter}
    predictions = None

    if args.solver == "mcmc":
        test = load_libsvm(args.test, one_based=args.one_based)
        state = load_mcmc_state(args.warm_start) if args.warm_start else None
        fn = mcmc_ns.mcmc_fit_predict_classification \
            if task == "classification" else mcmc_ns.mcmc_fit_predict
        y_pred, state, report = fn(train, test.X, config, state=state)
        predictions = y_pred
        params = state.params
        if args.trace_out:
            mcmc_ns.write_traces_csv(state, args.trace_out)
        if args.state_out:
            save_mcmc_state(args.state_out, state)
    elif args.solver == "als":
        warm = load_model_file(args.warm_start) if args.warm_start else None
        if task == "classification":
            params, report = als_ns.als_fit_classification(train, config,
                                                           warm=warm)
        else:
            params, report = als_ns.als_fit(train, config, warm=warm)
    else:  # sgd
        warm = load_model_file(args.warm_start) if args.warm_start else None
        if task == "ranking":
            pairs = bpr_ns.load_pairs_csv(args.pairs)
            params, report = bpr_ns.bpr_fit(train.X, pairs, config,
                                            warm=warm)
        else:
            params, report = sgd_ns.sgd_fit(train, config, warm=warm)

    wall = time.perf_counter() - t0
    if task == "regression":
        e = predict(params, train.X) - train.y
        summary["train_rmse"] = float(np.sqrt(np.mean(e * e))) if e.size else 0.0
    elif task == "classification":
        yhat = predict(params, train.X)
        if args.solver == "sgd":
            summary["train_logloss"] = float(
                -np.mean(log_sigmoid_stable(train.y * yhat)))
        else:
            summary["train_logloss"] = float(
                probit_nll(yhat, train.y)) / max(train.n_rows, 1)
    else:
        summary["mean_lnsig"] = float(report.objective_per_iter[-1]) \
            if report.n_iter_done else 0.0
    summary["wall_time_s"] = wall

    if args.model_out and args.solver != "mcmc":
        save_model_file(args.model_out, params)
    if args.pred_out:
        if predictions is None:
            target = load_libsvm(args.test, one_based=args.one_based).X \
                if args.test else train.X
            predictions = predict(params, target)
        write_predictions(args.pred_out, predictions)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_predict(args) -> int:
    params = load_model_file(args.model)
    data = load_libsvm(args.data, one_based=args.one_based)
    X = data.X
    if X.n_cols > params.p:
        if args.clip_features:
            X = clip_columns(X, params.p)
        else:
            raise DataError(
                f"data uses feature indices up to {X.n_cols - 1} but the "
                f"model knows {params.p} features; pass --clip-features to "
                "ignore the extras")
    values = predict_proba(params, X) if args.proba else predict(params, X)
    write_predictions(args.pred_out, values)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    try:
        ranks = [int(tok) for tok in args.ranks.split(",") if tok.strip()]
    except ValueError:
        return _flag_error(f"--ranks must be a comma-separated integer "
                           f"list, got {args.ranks!r}")
    if not ranks:
        return _flag_error("--ranks must name at least one rank")
    if args.repeats < 1:
        return _flag_error("--repeats must be >= 1")
    train = load_libsvm(args.train, one_based=args.one_based)
    test = load_libsvm(args.test, one_based=args.one_based) \
        if args.test else train
    l2 = 0.0 if args.l2_reg is None else args.l2_reg

    def run(rank: int, n_iter: int, seed: int) -> float:
        config = SolverConfig(rank=rank, n_iter=n_iter, init_std=0.1,
                              l2_reg_w=l2, l2_reg_V=l2, seed=seed,
                              task="regression")
        t0 = time.perf_counter()
        if args.solver == "als":
            als_ns.als_fit(train, config)
        else:
            mcmc_ns.mcmc_fit_predict(train, test.X, config)
        return time.perf_counter() - t0

    run(min(ranks), 1, args.seed)  # JIT warm-up, excluded from timings
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("solver,rank,repeat,seconds\n")
        for rank in ranks:
            for rep in range(args.repeats):
                seconds = run(rank, args.n_iter, args.seed + rep)
                fh.write(f"{args.solver},{rank},{rep},{seconds!r}\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "predict":
            return cmd_predict(args)
        if args.command == "benchmark":
            return cmd_benchmark(args)
        if args.command == "serve":
            from .server import serve

            return serve()
    except DivergenceError as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ParseError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FastFMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
