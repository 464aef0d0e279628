"""JSON-friendly, bit-exact array and state serialisation.

Bulk numeric data travels as base64 of the raw little-endian bytes, so
doubles survive any round trip unchanged; scalars ride as JSON numbers
(repr round-trips those exactly too).
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .exceptions import DataError, ParseError
from .mcmc import McmcState
from .model import FMParams
from .rng import Rng
from .sparse import SparseRowMatrix

STATE_FORMAT = "fastfm-mcmc-state v1"


def encode_array(arr) -> dict:
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.float64:
        kind = "f8"
    elif arr.dtype == np.int64:
        kind = "i8"
    else:
        raise DataError(f"unsupported dtype {arr.dtype}")
    return {"dtype": kind,
            "shape": list(arr.shape),
            "b64": base64.b64encode(arr.astype(f"<{kind}").tobytes()).decode()}


def decode_array(obj) -> np.ndarray:
    if not isinstance(obj, dict) or "b64" not in obj:
        raise DataError("expected an encoded array object")
    kind = obj.get("dtype", "f8")
    if kind not in ("f8", "i8"):
        raise DataError(f"unsupported dtype {kind!r}")
    raw = base64.b64decode(obj["b64"])
    arr = np.frombuffer(raw, dtype=f"<{kind}").astype(
        np.float64 if kind == "f8" else np.int64)
    shape = obj.get("shape")
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def csr_to_obj(X: SparseRowMatrix) -> dict:
    return {"n_rows": X.n_rows, "n_cols": X.n_cols,
            "indptr": encode_array(X.row_offsets),
            "indices": encode_array(X.col_indices),
            "data": encode_array(X.values)}


def csr_from_obj(obj) -> SparseRowMatrix:
    try:
        return SparseRowMatrix(obj["n_rows"], obj["n_cols"],
                               decode_array(obj["indptr"]),
                               decode_array(obj["indices"]),
                               decode_array(obj["data"]))
    except KeyError as exc:
        raise DataError(f"CSR payload missing field {exc}") from None


def params_to_obj(params: FMParams) -> dict:
    return {"w0": params.w0, "w": encode_array(params.w),
            "V": encode_array(params.V), "p": params.p, "k": params.k}


def params_from_obj(obj) -> FMParams:
    V = decode_array(obj["V"]).reshape(obj["k"], obj["p"])
    return FMParams(float(obj["w0"]), decode_array(obj["w"]), V)


def mcmc_state_to_obj(state: McmcState) -> dict:
    return {
        "format": STATE_FORMAT,
        "task": state.task,
        "params": params_to_obj(state.params),
        "alpha": state.alpha,
        "lambdas": encode_array(state.lambdas),
        "mus": encode_array(state.mus),
        "rng": [str(x) for x in state.rng.state],
        "pred_sum": encode_array(state.pred_sum),
        "n_samples_accumulated": state.n_samples_accumulated,
        "z": None if state.z is None else encode_array(state.z),
        "train_key": list(state.train_key),
        "test_key": list(state.test_key),
        "trace_alpha": encode_array(np.asarray(state.trace_alpha)),
        "trace_lambdas": encode_array(
            np.asarray(state.trace_lambdas).reshape(len(state.trace_lambdas), -1)
            if state.trace_lambdas else np.empty((0, 0))),
        "trace_mus": encode_array(
            np.asarray(state.trace_mus).reshape(len(state.trace_mus), -1)
            if state.trace_mus else np.empty((0, 0))),
    }


def mcmc_state_from_obj(obj) -> McmcState:
    if obj.get("format") != STATE_FORMAT:
        raise ParseError(f"not a {STATE_FORMAT} file")
    z = obj.get("z")
    lam_rows = decode_array(obj["trace_lambdas"])
    mu_rows = decode_array(obj["trace_mus"])
    return McmcState(
        params=params_from_obj(obj["params"]),
        alpha=float(obj["alpha"]),
        lambdas=decode_array(obj["lambdas"]),
        mus=decode_array(obj["mus"]),
        rng=Rng.from_state([int(x) for x in obj["rng"]]),
        pred_sum=decode_array(obj["pred_sum"]),
        n_samples_accumulated=int(obj["n_samples_accumulated"]),
        task=obj["task"],
        train_key=tuple(obj["train_key"]),
        test_key=tuple(obj["test_key"]),
        z=None if z is None else decode_array(z),
        trace_alpha=list(decode_array(obj["trace_alpha"])),
        trace_lambdas=[row.copy() for row in lam_rows],
        trace_mus=[row.copy() for row in mu_rows],
    )


def save_mcmc_state(path, state: McmcState) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mcmc_state_to_obj(state), fh)
        fh.write("\n")


def load_mcmc_state(path) -> McmcState:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad state file: {exc}") from None
    return mcmc_state_from_obj(obj)
