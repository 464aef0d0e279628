"""JSON-lines estimator service: one request object per stdin line, one
response per stdout line.

This is the wire surface for out-of-process bindings. Bulk arrays travel
base64-encoded (see serialize), so results are bit-identical to in-process
calls; uploaded matrices/vectors are cached server-side under short refs so
a warm-started iteration loop only ships the tiny request and the result.

Requests: {"id": n, "op": ..., ...} with ops
    hello                                  -> {name, version, protocol}
    upload {kind: csr|vector, ...}         -> {ref}
    construct {solver, task, params}       -> {handle}
    fit {handle, X, y|pairs, n_more_iter?} -> {model...}
    fit_predict {handle, X, y, X_test, n_more_iter?} -> {y_pred, model...}
    predict {handle, X, proba?}            -> {y_pred}
    release {ref|handle}                   -> {}
    shutdown                               -> {}

Responses: {"id": n, "ok": true, ...} or
           {"id": n, "ok": false, "error": {"type", "message"}}.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from . import __version__, als, bpr, mcmc, sgd
from .exceptions import DataError, FastFMError
from .serialize import csr_from_obj, decode_array, encode_array

PROTOCOL = 1

_ESTIMATORS = {
    ("als", "regression"): als.FMRegression,
    ("als", "classification"): als.FMClassification,
    ("mcmc", "regression"): mcmc.FMRegression,
    ("mcmc", "classification"): mcmc.FMClassification,
    ("sgd", "regression"): sgd.FMRegression,
    ("sgd", "classification"): sgd.FMClassification,
    ("bpr", "ranking"): bpr.FMRecommender,
}


class _Session:
    def __init__(self):
        self._store = {}
        self._handles = {}
        self._next_ref = 0
        self._next_handle = 0

    # -- payload resolution -------------------------------------------------

    def _resolve(self, obj, kinds):
        if isinstance(obj, dict) and "ref" in obj:
            ref = obj["ref"]
            if ref not in self._store:
                raise DataError(f"unknown ref {ref!r}")
            kind, value = self._store[ref]
            if kind not in kinds:
                raise DataError(f"ref {ref!r} holds {kind}, expected "
                                f"{'/'.join(kinds)}")
            return value
        if isinstance(obj, dict) and "indptr" in obj:
            if "csr" not in kinds:
                raise DataError("expected a vector, got a matrix")
            return csr_from_obj(obj)
        if isinstance(obj, dict) and "b64" in obj:
            if "vector" not in kinds and "pairs" not in kinds:
                raise DataError("expected a matrix, got an array")
            return decode_array(obj)
        raise DataError("payload must be {'ref': ...}, an encoded CSR "
                        "matrix, or an encoded array")

    def _estimator(self, handle):
        if handle not in self._handles:
            raise DataError(f"unknown handle {handle!r}")
        return self._handles[handle]

    @staticmethod
    def _model_fields(est, with_model=True) -> dict:
        """Fit-call response body; `model: false` requests skip the
        parameter mirror (callers that never read the attributes avoid
        shipping them every iteration)."""
        out = {}
        if with_model:
            out = {"w0": est.w0_, "w": encode_array(est.w_),
                   "V": encode_array(est.V_)}
            if hasattr(est, "hyper_param_"):
                out["hyper_param"] = encode_array(est.hyper_param_)
        report = getattr(est, "fit_report_", None)
        if report is not None:
            out["wall_time_s"] = report.wall_time
            out["n_iter_done"] = report.n_iter_done
        return out

    # -- ops ----------------------------------------------------------------

    def op_hello(self, req):
        return {"name": "fastfm", "version": __version__,
                "protocol": PROTOCOL}

    def op_upload(self, req):
        kind = req.get("kind")
        if kind == "csr":
            value = csr_from_obj(req)
        elif kind in ("vector", "pairs"):
            value = decode_array(req["data"])
            if kind == "pairs":
                value = value.reshape(-1, 2).astype(np.int64)
        else:
            raise DataError(f"unknown upload kind {kind!r}")
        ref = f"d{self._next_ref}"
        self._next_ref += 1
        self._store[ref] = (kind, value)
        return {"ref": ref}

    def op_construct(self, req):
        solver = req.get("solver")
        task = req.get("task")
        cls = _ESTIMATORS.get((solver, task))
        if cls is None:
            raise DataError(f"no estimator for solver={solver!r} "
                            f"task={task!r}")
        params = req.get("params") or {}
        allowed = set(cls._param_names())
        unknown = set(params) - allowed
        if unknown:
            raise DataError(f"unknown keyword {sorted(unknown)[0]!r} for "
                            f"{cls.__name__}; valid: {sorted(allowed)}")
        est = cls(**params)
        handle = f"h{self._next_handle}"
        self._next_handle += 1
        self._handles[handle] = est
        return {"handle": handle}

    def op_fit(self, req):
        est = self._estimator(req["handle"])
        X = self._resolve(req["X"], ("csr",))
        n_more = req.get("n_more_iter")
        if isinstance(est, bpr.FMRecommender):
            pairs = self._resolve(req["pairs"], ("pairs", "vector"))
            pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            est.fit(X, pairs, n_more_iter=n_more)
        else:
            y = self._resolve(req["y"], ("vector",))
            est.fit(X, y, n_more_iter=n_more)
        return self._model_fields(est, req.get("model", True))

    def op_fit_predict(self, req):
        est = self._estimator(req["handle"])
        X = self._resolve(req["X"], ("csr",))
        y = self._resolve(req["y"], ("vector",))
        X_test = self._resolve(req["X_test"], ("csr",))
        y_pred = est.fit_predict(X, y, X_test,
                                 n_more_iter=req.get("n_more_iter"))
        out = self._model_fields(est, req.get("model", True))
        out["y_pred"] = encode_array(y_pred)
        return out

    def op_predict(self, req):
        est = self._estimator(req["handle"])
        X = self._resolve(req["X"], ("csr",))
        if req.get("proba"):
            if not hasattr(est, "predict_proba"):
                raise DataError(
                    f"{type(est).__name__} has no probability output")
            values = est.predict_proba(X)
        else:
            values = est.predict(X)
        return {"y_pred": encode_array(values)}

    def op_release(self, req):
        if "ref" in req:
            self._store.pop(req["ref"], None)
        if "handle" in req:
            self._handles.pop(req["handle"], None)
        return {}


def handle_request(session: _Session, req: dict) -> dict:
    op = req.get("op")
    rid = req.get("id")
    if op == "shutdown":
        return {"id": rid, "ok": True, "bye": True}
    method = getattr(session, f"op_{op}", None)
    if method is None or op is None:
        return {"id": rid, "ok": False,
                "error": {"type": "DataError",
                          "message": f"unknown op {op!r}"}}
    try:
        result = method(req)
    except Exception as exc:  # every failure must produce a response line
        if not isinstance(exc, (FastFMError, KeyError, ValueError,
                                TypeError)):
            raise
        message = str(exc) if not isinstance(exc, KeyError) \
            else f"missing field {exc}"
        return {"id": rid, "ok": False,
                "error": {"type": type(exc).__name__, "message": message}}
    result.update({"id": rid, "ok": True})
    return result


def serve(stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = _Session()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            resp = {"id": None, "ok": False,
                    "error": {"type": "ParseError",
                              "message": f"bad request json: {exc}"}}
            print(json.dumps(resp), file=stdout, flush=True)
            continue
        resp = handle_request(session, req)
        print(json.dumps(resp), file=stdout, flush=True)
        if resp.get("bye"):
            break
    return 0
