# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the numpy kernels in ``_kernels_np``.

Every loop performs the exact IEEE-754 operation sequence of the numpy
version (scalar coefficients pre-rounded to the array dtype, no FMA), so
switching backends never changes a single bit of any result.
"""

import numpy as np

cimport cython
from libc.math cimport sqrt, sqrtf

NAME = "cython"

ctypedef fused floating:
    float
    double


def relu_fwd(x):
    out = np.empty_like(x)
    _relu_fwd(x.reshape(-1), out.reshape(-1))
    return out


def _relu_fwd(floating[::1] x, floating[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef floating v
    for i in range(n):
        v = x[i]
        if v > 0 or v != v:   # NaN propagates, matching np.maximum
            out[i] = v
        else:
            out[i] = 0
    return None


def relu_bwd_acc(floating[::1] grad, floating[::1] g, floating[::1] x):
    cdef Py_ssize_t i, n = grad.shape[0]
    cdef floating mask
    for i in range(n):
        mask = 1 if x[i] > 0 else 0
        grad[i] = grad[i] + g[i] * mask


def tanh_bwd_acc(floating[::1] grad, floating[::1] g, floating[::1] y):
    cdef Py_ssize_t i, n = grad.shape[0]
    cdef floating one = 1
    for i in range(n):
        grad[i] = grad[i] + g[i] * (one - y[i] * y[i])


def abs_bwd_acc(floating[::1] grad, floating[::1] g, floating[::1] x):
    cdef Py_ssize_t i, n = grad.shape[0]
    cdef floating s
    for i in range(n):
        if x[i] > 0:
            s = 1
        elif x[i] < 0:
            s = -1
        elif x[i] == x[i]:
            s = 0
        else:
            s = x[i]
        grad[i] = grad[i] + g[i] * s


def mul_acc(floating[::1] grad, floating[::1] g, floating[::1] other):
    cdef Py_ssize_t i, n = grad.shape[0]
    for i in range(n):
        grad[i] = grad[i] + g[i] * other[i]


def add_acc(floating[::1] grad, floating[::1] g):
    cdef Py_ssize_t i, n = grad.shape[0]
    for i in range(n):
        grad[i] = grad[i] + g[i]


def exp_bwd_acc(floating[::1] grad, floating[::1] g, floating[::1] y):
    cdef Py_ssize_t i, n = grad.shape[0]
    for i in range(n):
        grad[i] = grad[i] + g[i] * y[i]


def log_bwd_acc(floating[::1] grad, floating[::1] g, floating[::1] x):
    cdef Py_ssize_t i, n = grad.shape[0]
    for i in range(n):
        grad[i] = grad[i] + g[i] / x[i]


def sq_loss_bwd_acc(floating[::1] grad, floating[::1] diff, double scale,
                    double sign):
    cdef Py_ssize_t i, n = grad.shape[0]
    cdef floating c = <floating> (sign * scale)
    for i in range(n):
        grad[i] = grad[i] + c * diff[i]


def adam_step(floating[::1] p, floating[::1] g, floating[::1] m,
              floating[::1] v, double lr, double beta1, double beta2,
              double eps, double bc1, double bc2):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef floating b1 = <floating> beta1
    cdef floating b2 = <floating> beta2
    cdef floating c1 = <floating> (1.0 - beta1)
    cdef floating c2 = <floating> (1.0 - beta2)
    cdef floating ibc1 = <floating> bc1
    cdef floating ibc2 = <floating> bc2
    cdef floating lrf = <floating> lr
    cdef floating epsf = <floating> eps
    cdef floating gi, mh, vh, s
    for i in range(n):
        gi = g[i]
        m[i] = m[i] * b1 + c1 * gi
        v[i] = v[i] * b2 + c2 * (gi * gi)
        mh = m[i] / ibc1
        vh = v[i] / ibc2
        if floating is float:
            s = sqrtf(vh)
        else:
            s = sqrt(vh)
        p[i] = p[i] - lrf * (mh / (s + epsf))
