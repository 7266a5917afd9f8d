# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the numpy kernels in _kernels_py.

Same contracts: C-contiguous float64 in, C-contiguous float64 out.  The hot
loops here avoid per-call numpy dispatch overhead on the small arrays that
dominate recurrent training.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as c_exp, log as c_log, sqrt as c_sqrt, tanh as c_tanh

NAME = "compiled"

LOG_CLAMP = 1e-12

cdef double _LOG_CLAMP = 1e-12


# ---------------------------------------------------------------- products

def matmul(a, b):
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    cdef Py_ssize_t m = av.shape[0], k = av.shape[1], n = bv.shape[1]
    out = np.zeros((m, n))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, p, j
    cdef double aip
    for i in range(m):
        for p in range(k):
            aip = av[i, p]
            for j in range(n):
                ov[i, j] += aip * bv[p, j]
    return out


def matmul_bwd(a, b, g):
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    cdef double[:, ::1] gv = g
    cdef Py_ssize_t m = av.shape[0], k = av.shape[1], n = bv.shape[1]
    ga = np.zeros((m, k))
    gb = np.zeros((k, n))
    cdef double[:, ::1] gav = ga
    cdef double[:, ::1] gbv = gb
    cdef Py_ssize_t i, p, j
    cdef double gij, aip
    for i in range(m):
        for j in range(n):
            gij = gv[i, j]
            for p in range(k):
                gav[i, p] += gij * bv[p, j]
    for i in range(m):
        for p in range(k):
            aip = av[i, p]
            for j in range(n):
                gbv[p, j] += aip * gv[i, j]
    return ga, gb


cdef void _affine_2d(double[:, ::1] xv, double[:, ::1] wv, double[::1] bv,
                     double[:, ::1] ov, bint use_bias) noexcept:
    cdef Py_ssize_t batch = xv.shape[0], d_in = xv.shape[1], d_out = wv.shape[0]
    cdef Py_ssize_t s, o, j
    cdef double acc
    for s in range(batch):
        for o in range(d_out):
            acc = bv[o] if use_bias else 0.0
            for j in range(d_in):
                acc += wv[o, j] * xv[s, j]
            ov[s, o] = acc


def linear(x, w):
    cdef bint flat = x.ndim == 1
    x2 = x.reshape(1, -1) if flat else x
    out = np.empty((x2.shape[0], w.shape[0]))
    zero = np.zeros(w.shape[0])
    _affine_2d(x2, w, zero, out, False)
    return out[0] if flat else out


def affine(x, w, b):
    cdef bint flat = x.ndim == 1
    x2 = x.reshape(1, -1) if flat else x
    out = np.empty((x2.shape[0], w.shape[0]))
    _affine_2d(x2, w, b, out, True)
    return out[0] if flat else out


cdef void _linear_bwd_2d(double[:, ::1] xv, double[:, ::1] wv, double[:, ::1] gv,
                         double[:, ::1] gxv, double[:, ::1] gwv) noexcept:
    cdef Py_ssize_t batch = xv.shape[0], d_in = xv.shape[1], d_out = wv.shape[0]
    cdef Py_ssize_t s, o, j
    cdef double go
    for s in range(batch):
        for o in range(d_out):
            go = gv[s, o]
            for j in range(d_in):
                gxv[s, j] += go * wv[o, j]
                gwv[o, j] += go * xv[s, j]


def linear_bwd(x, w, g):
    cdef bint flat = x.ndim == 1
    x2 = x.reshape(1, -1) if flat else x
    g2 = g.reshape(1, -1) if flat else g
    gx = np.zeros_like(x2)
    gw = np.zeros_like(w)
    _linear_bwd_2d(x2, w, g2, gx, gw)
    return (gx[0] if flat else gx), gw


def affine_bwd(x, w, g):
    cdef bint flat = x.ndim == 1
    g2 = g.reshape(1, -1) if flat else g
    gx, gw = linear_bwd(x, w, g)
    gb = g.copy() if flat else g2.sum(axis=0)
    return gx, gw, gb


# ------------------------------------------------------------- elementwise

def sigmoid(x):
    out = np.empty_like(x)
    cdef double[::1] xv = x.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = 1.0 / (1.0 + c_exp(-xv[i]))
    return out


def sigmoid_bwd(y, g):
    out = np.empty_like(y)
    cdef double[::1] yv = y.reshape(-1)
    cdef double[::1] gv = g.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = yv.shape[0]
    for i in range(n):
        ov[i] = gv[i] * yv[i] * (1.0 - yv[i])
    return out


def tanh(x):
    out = np.empty_like(x)
    cdef double[::1] xv = x.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = c_tanh(xv[i])
    return out


def tanh_bwd(y, g):
    out = np.empty_like(y)
    cdef double[::1] yv = y.reshape(-1)
    cdef double[::1] gv = g.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = yv.shape[0]
    for i in range(n):
        ov[i] = gv[i] * (1.0 - yv[i] * yv[i])
    return out


def add(a, b):
    out = np.empty_like(a)
    cdef double[::1] av = a.reshape(-1)
    cdef double[::1] bv = b.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = av.shape[0]
    for i in range(n):
        ov[i] = av[i] + bv[i]
    return out


def sub(a, b):
    out = np.empty_like(a)
    cdef double[::1] av = a.reshape(-1)
    cdef double[::1] bv = b.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = av.shape[0]
    for i in range(n):
        ov[i] = av[i] - bv[i]
    return out


def mul(a, b):
    out = np.empty_like(a)
    cdef double[::1] av = a.reshape(-1)
    cdef double[::1] bv = b.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = av.shape[0]
    for i in range(n):
        ov[i] = av[i] * bv[i]
    return out


def neg(a):
    out = np.empty_like(a)
    cdef double[::1] av = a.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = av.shape[0]
    for i in range(n):
        ov[i] = -av[i]
    return out


def scale(a, double c):
    out = np.empty_like(a)
    cdef double[::1] av = a.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = av.shape[0]
    for i in range(n):
        ov[i] = av[i] * c
    return out


def sumall(a):
    cdef double[::1] av = a.reshape(-1)
    cdef double acc = 0.0
    cdef Py_ssize_t i, n = av.shape[0]
    for i in range(n):
        acc += av[i]
    return acc


def sqsum(a):
    cdef double[::1] av = a.reshape(-1)
    cdef double acc = 0.0
    cdef Py_ssize_t i, n = av.shape[0]
    for i in range(n):
        acc += av[i] * av[i]
    return acc


# ----------------------------------------------------------------- softmax

cdef void _softmax_row(double[::1] xv, double[::1] ov) noexcept:
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double m = xv[0], total = 0.0
    for i in range(1, n):
        if xv[i] > m:
            m = xv[i]
    for i in range(n):
        ov[i] = c_exp(xv[i] - m)
        total += ov[i]
    for i in range(n):
        ov[i] /= total


def softmax(x):
    out = np.empty_like(x)
    cdef Py_ssize_t r
    if x.ndim == 1:
        _softmax_row(x, out)
    else:
        for r in range(x.shape[0]):
            _softmax_row(x[r], out[r])
    return out


cdef void _softmax_bwd_row(double[::1] yv, double[::1] gv, double[::1] ov) noexcept:
    cdef Py_ssize_t i, n = yv.shape[0]
    cdef double dot = 0.0
    for i in range(n):
        dot += gv[i] * yv[i]
    for i in range(n):
        ov[i] = yv[i] * (gv[i] - dot)


def softmax_bwd(y, g):
    out = np.empty_like(y)
    cdef Py_ssize_t r
    if y.ndim == 1:
        _softmax_bwd_row(y, g, out)
    else:
        for r in range(y.shape[0]):
            _softmax_bwd_row(y[r], g[r], out[r])
    return out


# ------------------------------------------------------------------ losses

def bce(pred, target, mask):
    cdef double[::1] pv = pred.reshape(-1)
    cdef double[::1] tv = target.reshape(-1)
    cdef double[::1] mv = mask.reshape(-1)
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double p, total = 0.0, denom = 0.0
    for i in range(n):
        p = pv[i]
        if p < _LOG_CLAMP:
            p = _LOG_CLAMP
        elif p > 1.0 - _LOG_CLAMP:
            p = 1.0 - _LOG_CLAMP
        total += mv[i] * (tv[i] * c_log(p) + (1.0 - tv[i]) * c_log(1.0 - p))
        denom += mv[i]
    return -total / denom


def bce_bwd(pred, target, mask, double g):
    out = np.empty_like(pred)
    cdef double[::1] pv = pred.reshape(-1)
    cdef double[::1] tv = target.reshape(-1)
    cdef double[::1] mv = mask.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double p, denom = 0.0
    for i in range(n):
        denom += mv[i]
    cdef double factor = g / denom
    for i in range(n):
        p = pv[i]
        if p < _LOG_CLAMP or p > 1.0 - _LOG_CLAMP:
            ov[i] = 0.0
        else:
            ov[i] = mv[i] * (p - tv[i]) / (p * (1.0 - p)) * factor
    return out


def ce(logits, targets):
    probs = softmax(logits)
    cdef double[:, ::1] prv = probs
    cdef cnp.int64_t[::1] tv = targets
    cdef Py_ssize_t i, n = prv.shape[0]
    cdef double total = 0.0, p
    for i in range(n):
        p = prv[i, tv[i]]
        if p < 1e-300:
            p = 1e-300
        total += c_log(p)
    return -total / n, probs


def ce_bwd(probs, targets, double g, double base_scale):
    out = probs.copy()
    cdef double[:, ::1] ov = out
    cdef cnp.int64_t[::1] tv = targets
    cdef Py_ssize_t i, j, n = ov.shape[0], v = ov.shape[1]
    cdef double factor = g * base_scale / n
    for i in range(n):
        ov[i, tv[i]] -= 1.0
        for j in range(v):
            ov[i, j] *= factor
    return out


# ----------------------------------------------------- memory weighted sums

def wsum_vec(weights, rows):
    cdef double[::1] wv = weights
    out = np.zeros_like(rows[0])
    cdef double[::1] ov = out
    cdef double[::1] rv
    cdef Py_ssize_t i, j, d = ov.shape[0]
    cdef double w
    for i in range(wv.shape[0]):
        w = wv[i]
        rv = rows[i]
        for j in range(d):
            ov[j] += w * rv[j]
    return out


def wsum_vec_bwd(weights, rows, g):
    cdef double[::1] wv = weights
    cdef double[::1] gv = g
    cdef Py_ssize_t n = wv.shape[0], d = gv.shape[0]
    gw = np.empty(n)
    cdef double[::1] gwv = gw
    cdef double[::1] rv
    cdef Py_ssize_t i, j
    cdef double acc
    grows = []
    for i in range(n):
        rv = rows[i]
        acc = 0.0
        for j in range(d):
            acc += gv[j] * rv[j]
        gwv[i] = acc
        grows.append(scale(g, wv[i]))
    return gw, grows


def wsum_bat(weights, rows):
    cdef double[:, ::1] wv = weights
    out = np.zeros_like(rows[0])
    cdef double[:, ::1] ov = out
    cdef double[:, ::1] rv
    cdef Py_ssize_t i, s, j, batch = ov.shape[0], d = ov.shape[1]
    cdef double w
    for i in range(wv.shape[1]):
        rv = rows[i]
        for s in range(batch):
            w = wv[s, i]
            for j in range(d):
                ov[s, j] += w * rv[s, j]
    return out


def wsum_bat_bwd(weights, rows, g):
    cdef double[:, ::1] wv = weights
    cdef double[:, ::1] gv = g
    cdef Py_ssize_t batch = gv.shape[0], d = gv.shape[1], n = wv.shape[1]
    gw = np.empty_like(weights)
    cdef double[:, ::1] gwv = gw
    cdef double[:, ::1] rv
    cdef double[:, ::1] grv
    cdef Py_ssize_t i, s, j
    cdef double acc, w
    grows = []
    for i in range(n):
        rv = rows[i]
        grow = np.empty_like(g)
        grv = grow
        for s in range(batch):
            acc = 0.0
            w = wv[s, i]
            for j in range(d):
                acc += gv[s, j] * rv[s, j]
                grv[s, j] = w * gv[s, j]
            gwv[s, i] = acc
        grows.append(grow)
    return gw, grows


# --------------------------------------------------------------- optimizer

def adam_step(p, g, m, v, long t, double lr, double beta1, double beta2, double eps):
    cdef double[::1] pv = p.reshape(-1)
    cdef double[::1] gv = g.reshape(-1)
    cdef double[::1] mv = m.reshape(-1)
    cdef double[::1] vv = v.reshape(-1)
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef double gi
    for i in range(n):
        gi = gv[i]
        mv[i] = beta1 * mv[i] + (1.0 - beta1) * gi
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * gi * gi
        pv[i] -= lr * (mv[i] / c1) / (c_sqrt(vv[i] / c2) + eps)
