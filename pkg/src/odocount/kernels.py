"""Backend dispatch for the hot kernels.

The compiled extension (``odocount._native``) is preferred when it imported
successfully; the pure-numpy reference (``odocount._python_ref``) is the
fallback. Set ``ODOCOUNT_PURE_PYTHON=1`` to force the fallback, or call
:func:`set_backend` at runtime (used by tests and benchmarks).
"""

import os

import numpy as np

from . import _python_ref

_IMPLS = {"python": _python_ref}
try:
    from . import _native

    _IMPLS["compiled"] = _native
except ImportError:  # extension not built
    _native = None

if os.environ.get("ODOCOUNT_PURE_PYTHON", "") not in ("", "0"):
    _ACTIVE = "python"
else:
    _ACTIVE = "compiled" if "compiled" in _IMPLS else "python"


def available_backends():
    return tuple(sorted(_IMPLS))


def get_backend():
    return _ACTIVE


def set_backend(name):
    global _ACTIVE
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _ACTIVE = name


def median_subtract(mags, radius, clamp=True):
    mags = np.ascontiguousarray(mags, dtype=np.float64)
    return _IMPLS[_ACTIVE].median_subtract(mags, int(radius), bool(clamp))


def viterbi(log_init, log_trans, log_lik):
    log_init = np.ascontiguousarray(log_init, dtype=np.float64)
    log_trans = np.ascontiguousarray(log_trans, dtype=np.float64)
    log_lik = np.ascontiguousarray(log_lik, dtype=np.float64)
    return _IMPLS[_ACTIVE].viterbi(log_init, log_trans, log_lik)


def forest_predict(X, feature, threshold, left, right, value, tree_offsets):
    X = np.ascontiguousarray(X, dtype=np.float32)
    return _IMPLS[_ACTIVE].forest_predict(
        X,
        np.ascontiguousarray(feature, dtype=np.int32),
        np.ascontiguousarray(threshold, dtype=np.float64),
        np.ascontiguousarray(left, dtype=np.int32),
        np.ascontiguousarray(right, dtype=np.int32),
        np.ascontiguousarray(value, dtype=np.float64),
        np.ascontiguousarray(tree_offsets, dtype=np.int64),
    )
