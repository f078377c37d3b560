"""Pure-numpy implementations of the hot numerical kernels.

This module mirrors the function surface of the compiled extension
(``hiernoise._core``); :mod:`hiernoise.kernels` picks one of the two at
import time.  Inputs are assumed validated (C-contiguous float64 of the
right shapes) by the dispatch layer.
"""

from __future__ import annotations

import numpy as np

# probabilities are clamped here before any log
PROB_CLAMP = 1e-12


def matmul(a, b):
    return a @ b


def matmul_tn(a, b):
    """a.T @ b without materializing the transpose."""
    return a.T @ b


def matmul_nt(a, b):
    """a @ b.T without materializing the transpose."""
    return a @ b.T


def linear(x, w, b):
    return x @ w + b


def colsum(a):
    return a.sum(axis=0)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(dy, pre):
    return dy * (pre > 0.0)


def softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, onehot):
    p_label = (probs * onehot).sum(axis=1)
    return float(-np.log(np.maximum(p_label, PROB_CLAMP)).mean())


def group_sum_cols(probs, groups, num_coarse):
    n = probs.shape[0]
    out = np.zeros((n, num_coarse), dtype=np.float64)
    np.add.at(out.T, groups, probs.T)
    return out


def weighted_ce_dlogits(fine_probs, fine_onehot, coarse_probs, coarse_onehot,
                        groups, alpha):
    """Gradient of the weighted two-level cross-entropy w.r.t. the logits.

    The coarse branch aggregates fine probabilities by group, so its
    gradient pulls each labeled group's mass toward 1 while distributing
    the pull within the group proportionally to the predicted shares:

        d/dlogits = [ alpha * (p - y) + (1 - alpha) * (p - q) ] / n

    where q renormalizes p inside the labeled coarse group.  Rows whose
    labeled probability sits at the clamp contribute zero gradient (the
    clamped log is locally constant there).
    """
    n = fine_probs.shape[0]
    p_fine = (fine_probs * fine_onehot).sum(axis=1)
    fine_active = (p_fine > PROB_CLAMP).astype(np.float64)
    fine_part = (fine_probs - fine_onehot) * fine_active[:, None]
    if alpha == 1.0:
        return fine_part / n

    p_coarse = (coarse_probs * coarse_onehot).sum(axis=1)
    coarse_active = p_coarse > PROB_CLAMP
    inv = np.where(coarse_active, 1.0 / np.maximum(p_coarse, PROB_CLAMP), 0.0)
    # indicator that fine class k belongs to the row's labeled coarse group
    in_group = coarse_onehot[:, groups]
    q = fine_probs * in_group * inv[:, None]
    coarse_part = (fine_probs - q) * coarse_active[:, None].astype(np.float64)
    if alpha == 0.0:
        return coarse_part / n
    return (alpha * fine_part + (1.0 - alpha) * coarse_part) / n


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """One ADAM step with bias correction, in place on param/m/v."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
