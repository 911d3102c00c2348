"""Estimator plumbing and input validation helpers."""

import inspect

import numpy as np


class ParamsMixin:
    """get_params/set_params support, compatible with sklearn-style tooling.

    Subclasses must store every constructor argument under an attribute of
    the same name, and keep all other state in trailing-underscore
    attributes set by fit().
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p.name for p in sig.parameters.values()
                if p.name != "self" and p.kind != p.VAR_KEYWORD]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters are {sorted(valid)}")
            setattr(self, name, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def as_matrix(X, name="X"):
    """Coerce to a 2-D float64 array with all entries finite."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        bad = int(np.flatnonzero(~np.isfinite(X))[0])
        raise ValueError(f"{name} contains a non-finite value at flat index {bad}")
    return X


def as_vector(x, name="x"):
    """Coerce to a 1-D float64 array with all entries finite."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a 1-D array, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise ValueError(f"{name} contains a non-finite value at index {bad}")
    return x


def check_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted; call fit() first")


def frozen(a):
    """Return a read-only float64 copy of an array."""
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a
