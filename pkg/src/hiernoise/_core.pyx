# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Same function surface as ``hiernoise._kernels_numpy``; matrix products go
through BLAS dgemm, everything else is a fused C loop.  The dispatch layer
guarantees C-contiguous float64 inputs of matching shapes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

PROB_CLAMP = 1e-12
cdef double _CLAMP = 1e-12


cdef void _gemm(char ta, char tb, int m, int n, int k,
                double* a, int lda, double* b, int ldb,
                double* c, int ldc) noexcept nogil:
    cdef double one = 1.0, zero = 0.0
    dgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &zero, c, &ldc)


def matmul(double[:, ::1] a, double[:, ::1] b):
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    if m == 0 or n == 0 or k == 0:
        return out
    cdef double[:, ::1] c = out
    # row-major C = A @ B done as column-major C^T = B^T A^T
    _gemm(b'N', b'N', n, m, k, &b[0, 0], n, &a[0, 0], k, &c[0, 0], n)
    return out


def matmul_tn(double[:, ::1] a, double[:, ::1] b):
    """a.T @ b for a of shape (k, m), b of shape (k, n)."""
    cdef int k = a.shape[0], m = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    if m == 0 or n == 0 or k == 0:
        return out
    cdef double[:, ::1] c = out
    _gemm(b'N', b'T', n, m, k, &b[0, 0], n, &a[0, 0], m, &c[0, 0], n)
    return out


def matmul_nt(double[:, ::1] a, double[:, ::1] b):
    """a @ b.T for a of shape (m, k), b of shape (n, k)."""
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[0]
    out = np.zeros((m, n), dtype=np.float64)
    if m == 0 or n == 0 or k == 0:
        return out
    cdef double[:, ::1] c = out
    _gemm(b'T', b'N', n, m, k, &b[0, 0], k, &a[0, 0], k, &c[0, 0], n)
    return out


def linear(double[:, ::1] x, double[:, ::1] w, double[::1] bias):
    cdef int n = x.shape[0], d = x.shape[1], m = w.shape[1]
    cdef Py_ssize_t i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] y = out
    if n > 0 and m > 0:
        if d > 0:
            _gemm(b'N', b'N', m, n, d, &w[0, 0], m, &x[0, 0], d, &y[0, 0], m)
        for i in range(n):
            for j in range(m):
                y[i, j] += bias[j]
    return out


def colsum(double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] s = out
    for i in range(n):
        for j in range(m):
            s[j] += a[i, j]
    return out


def relu(double[:, ::1] x):
    cdef Py_ssize_t i, j, n = x.shape[0], m = x.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] y = out
    for i in range(n):
        for j in range(m):
            y[i, j] = x[i, j] if x[i, j] > 0.0 else 0.0
    return out


def relu_backward(double[:, ::1] dy, double[:, ::1] pre):
    cdef Py_ssize_t i, j, n = dy.shape[0], m = dy.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] dx = out
    for i in range(n):
        for j in range(m):
            dx[i, j] = dy[i, j] if pre[i, j] > 0.0 else 0.0
    return out


def softmax_rows(double[:, ::1] logits):
    cdef Py_ssize_t i, j, n = logits.shape[0], k = logits.shape[1]
    cdef double rowmax, rowsum
    out = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] p = out
    for i in range(n):
        rowmax = logits[i, 0]
        for j in range(1, k):
            if logits[i, j] > rowmax:
                rowmax = logits[i, j]
        rowsum = 0.0
        for j in range(k):
            p[i, j] = exp(logits[i, j] - rowmax)
            rowsum += p[i, j]
        for j in range(k):
            p[i, j] /= rowsum
    return out


def cross_entropy(double[:, ::1] probs, double[:, ::1] onehot):
    cdef Py_ssize_t i, j, n = probs.shape[0], k = probs.shape[1]
    cdef double acc = 0.0, p_label
    for i in range(n):
        p_label = 0.0
        for j in range(k):
            p_label += probs[i, j] * onehot[i, j]
        if p_label < _CLAMP:
            p_label = _CLAMP
        acc -= log(p_label)
    return acc / n


def group_sum_cols(double[:, ::1] probs, cnp.int64_t[::1] groups, int num_coarse):
    cdef Py_ssize_t i, j, n = probs.shape[0], k = probs.shape[1]
    out = np.zeros((n, num_coarse), dtype=np.float64)
    cdef double[:, ::1] c = out
    for i in range(n):
        for j in range(k):
            c[i, groups[j]] += probs[i, j]
    return out


def weighted_ce_dlogits(double[:, ::1] fine_probs, double[:, ::1] fine_onehot,
                        double[:, ::1] coarse_probs, double[:, ::1] coarse_onehot,
                        cnp.int64_t[::1] groups, double alpha):
    cdef Py_ssize_t i, j, n = fine_probs.shape[0], k = fine_probs.shape[1]
    cdef Py_ssize_t kc
    cdef double p_fine, p_coarse, q, fine_w, coarse_w, inv_n
    cdef int label_group
    out = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] d = out
    inv_n = 1.0 / n
    if alpha == 1.0:
        for i in range(n):
            p_fine = 0.0
            for j in range(k):
                p_fine += fine_probs[i, j] * fine_onehot[i, j]
            if p_fine > _CLAMP:
                for j in range(k):
                    d[i, j] = (fine_probs[i, j] - fine_onehot[i, j]) * inv_n
            else:
                for j in range(k):
                    d[i, j] = 0.0
        return out

    kc = coarse_probs.shape[1]
    fine_w = alpha * inv_n
    coarse_w = (1.0 - alpha) * inv_n
    for i in range(n):
        p_fine = 0.0
        for j in range(k):
            p_fine += fine_probs[i, j] * fine_onehot[i, j]
        p_coarse = 0.0
        label_group = -1
        for j in range(kc):
            if coarse_onehot[i, j] != 0.0:
                label_group = <int> j
            p_coarse += coarse_probs[i, j] * coarse_onehot[i, j]
        for j in range(k):
            d[i, j] = 0.0
            if p_fine > _CLAMP:
                d[i, j] += fine_w * (fine_probs[i, j] - fine_onehot[i, j])
            if p_coarse > _CLAMP:
                q = fine_probs[i, j] / p_coarse if groups[j] == label_group else 0.0
                d[i, j] += coarse_w * (fine_probs[i, j] - q)
    return out


def adam_update(double[::1] param, double[::1] grad, double[::1] m, double[::1] v,
                long t, double lr, double beta1, double beta2, double eps):
    cdef Py_ssize_t i, n = param.shape[0]
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    cdef double mhat, vhat
    for i in range(n):
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
        mhat = m[i] / bc1
        vhat = v[i] / bc2
        param[i] -= lr * mhat / (sqrt(vhat) + eps)
