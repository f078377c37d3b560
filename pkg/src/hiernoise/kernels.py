"""Numerical kernels with backend selection.

At import this module binds either the compiled extension
(``hiernoise._core``, built from Cython) or the pure-numpy fallback with
the identical function surface.  Selection can be forced with the
``HIERNOISE_KERNELS`` environment variable (``auto`` | ``cython`` |
``numpy``); ``auto`` prefers the extension when it imported cleanly.

All kernels are pure functions over C-contiguous float64 arrays and are
safe to call from multiple threads.  Matrices are plain 2-D numpy arrays,
row-major.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_numpy

try:
    from . import _core as _compiled
except ImportError:  # extension not built; numpy fallback still works
    _compiled = None


class ShapeMismatchError(ValueError):
    """Operands have incompatible shapes."""


def _select_backend():
    choice = os.environ.get("HIERNOISE_KERNELS", "auto").lower()
    if choice == "numpy":
        return _kernels_numpy, "numpy"
    if choice == "cython":
        if _compiled is None:
            raise ImportError(
                "HIERNOISE_KERNELS=cython but hiernoise._core is not built; "
                "run 'pip install -e . --no-build-isolation'"
            )
        return _compiled, "cython"
    if choice != "auto":
        raise ValueError(f"HIERNOISE_KERNELS must be auto|cython|numpy, got {choice!r}")
    if _compiled is not None:
        return _compiled, "cython"
    return _kernels_numpy, "numpy"


_impl, BACKEND = _select_backend()

PROB_CLAMP = _kernels_numpy.PROB_CLAMP


def get_backend(name: str | None = None):
    """Return (module, name) for ``name`` or the active backend."""
    if name is None:
        return _impl, BACKEND
    if name == "numpy":
        return _kernels_numpy, "numpy"
    if name == "cython":
        if _compiled is None:
            raise ImportError("hiernoise._core is not built")
        return _compiled, "cython"
    raise ValueError(f"unknown backend {name!r}")


def as_matrix(x) -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    return _impl.matmul(a, b)


def matmul_tn(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatchError(f"cannot multiply transpose of {a.shape} by {b.shape}")
    return _impl.matmul_tn(a, b)


def matmul_nt(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatchError(f"cannot multiply {a.shape} by transpose of {b.shape}")
    return _impl.matmul_nt(a, b)


def linear(x, w, b) -> np.ndarray:
    x = as_matrix(x)
    w = as_matrix(w)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if x.shape[1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"linear layer mismatch: x {x.shape}, w {w.shape}, b {b.shape}"
        )
    return _impl.linear(x, w, b)


def colsum(a) -> np.ndarray:
    return _impl.colsum(as_matrix(a))


def relu(x) -> np.ndarray:
    return _impl.relu(as_matrix(x))


def relu_backward(dy, pre) -> np.ndarray:
    dy = as_matrix(dy)
    pre = as_matrix(pre)
    if dy.shape != pre.shape:
        raise ShapeMismatchError(f"relu backward mismatch: {dy.shape} vs {pre.shape}")
    return _impl.relu_backward(dy, pre)


def softmax_rows(logits) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction for stability."""
    logits = as_matrix(logits)
    if logits.shape[1] == 0:
        raise ShapeMismatchError("softmax over zero classes")
    return _impl.softmax_rows(logits)


def cross_entropy(probs, onehot) -> float:
    """Mean over rows of -log(probability of the labeled class).

    Probabilities are clamped to >= 1e-12 before the log, so the result is
    finite and >= 0 for any valid probability input.
    """
    probs = as_matrix(probs)
    onehot = as_matrix(onehot)
    if probs.shape != onehot.shape:
        raise ShapeMismatchError(f"cross_entropy mismatch: {probs.shape} vs {onehot.shape}")
    return _impl.cross_entropy(probs, onehot)


def group_sum_cols(probs, groups, num_coarse: int) -> np.ndarray:
    probs = as_matrix(probs)
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    if groups.shape[0] != probs.shape[1]:
        raise ShapeMismatchError(
            f"group map has {groups.shape[0]} entries for {probs.shape[1]} columns"
        )
    return _impl.group_sum_cols(probs, groups, num_coarse)


def weighted_ce_dlogits(fine_probs, fine_onehot, coarse_probs, coarse_onehot,
                        groups, alpha: float) -> np.ndarray:
    fine_probs = as_matrix(fine_probs)
    fine_onehot = as_matrix(fine_onehot)
    if fine_probs.shape != fine_onehot.shape:
        raise ShapeMismatchError(
            f"fine shapes differ: {fine_probs.shape} vs {fine_onehot.shape}"
        )
    if alpha == 1.0:
        # coarse inputs are unused on the pure-fine path
        return _impl.weighted_ce_dlogits(
            fine_probs, fine_onehot, fine_probs, fine_onehot,
            np.zeros(fine_probs.shape[1], dtype=np.int64), 1.0,
        )
    coarse_probs = as_matrix(coarse_probs)
    coarse_onehot = as_matrix(coarse_onehot)
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    if coarse_probs.shape != coarse_onehot.shape:
        raise ShapeMismatchError(
            f"coarse shapes differ: {coarse_probs.shape} vs {coarse_onehot.shape}"
        )
    if coarse_probs.shape[0] != fine_probs.shape[0]:
        raise ShapeMismatchError("fine and coarse batches differ in length")
    if groups.shape[0] != fine_probs.shape[1]:
        raise ShapeMismatchError("group map length does not match fine classes")
    return _impl.weighted_ce_dlogits(
        fine_probs, fine_onehot, coarse_probs, coarse_onehot, groups, float(alpha)
    )


def adam_update(param, grad, m, v, t: int, lr: float,
                beta1: float, beta2: float, eps: float) -> None:
    """In-place ADAM step on flat float64 buffers."""
    _impl.adam_update(param, grad, m, v, t, lr, beta1, beta2, eps)
