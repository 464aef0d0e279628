"""Estimator base: constructor-mirroring params, fitted-attribute guard."""

from __future__ import annotations

import inspect

from .exceptions import DataError, NotFittedError
from .model import SolverConfig


class BaseFMEstimator:
    """get_params/set_params over the constructor signature, sklearn style.

    Subclasses declare hyperparameters only in __init__ and store them under
    the same attribute names; fitted state uses trailing-underscore names.
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **kw):
        valid = set(self._param_names())
        for name, value in kw.items():
            if name not in valid:
                raise DataError(
                    f"unknown parameter {name!r} for "
                    f"{type(self).__name__}; valid: {sorted(valid)}")
            setattr(self, name, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    # -- fitted state ------------------------------------------------------

    def _require_fitted(self):
        if getattr(self, "_params", None) is None:
            raise NotFittedError(
                f"this {type(self).__name__} instance is not fitted yet; "
                "call fit (or fit_predict for MCMC estimators) first")

    @property
    def w0_(self) -> float:
        self._require_fitted()
        return self._params.w0

    @property
    def w_(self):
        self._require_fitted()
        return self._params.w

    @property
    def V_(self):
        self._require_fitted()
        return self._params.V


def build_config(task: str, *, rank=8, n_iter=100, init_std=0.1,
                 l2_reg=None, l2_reg_w=None, l2_reg_V=None,
                 step_size=0.01, random_state=123) -> SolverConfig:
    """Map estimator keywords onto SolverConfig.

    A single l2_reg feeds both the first-order and the factor penalty; the
    split knobs override it. The bias stays unpenalised.
    """
    base = 0.0 if l2_reg is None else float(l2_reg)
    return SolverConfig(
        rank=rank,
        n_iter=n_iter,
        init_std=init_std,
        l2_reg_w=base if l2_reg_w is None else float(l2_reg_w),
        l2_reg_V=base if l2_reg_V is None else float(l2_reg_V),
        l2_reg_w0=0.0,
        step_size=step_size,
        seed=random_state,
        task=task,
    )
