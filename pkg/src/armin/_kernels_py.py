"""Numpy implementations of the dense float64 kernels.

Every function here has a compiled twin in ``armin._ckernels`` (built from
``_ckernels.pyx``); ``armin.backend`` picks one of the two at import time.
All kernels take and return C-contiguous float64 arrays.  The two backends
agree to floating-point roundoff, not bitwise: within a backend results are
deterministic.
"""

import numpy as np

NAME = "python"

LOG_CLAMP = 1e-12


# ---------------------------------------------------------------- products

def matmul(a, b):
    return a @ b


def matmul_bwd(a, b, g):
    return g @ b.T, a.T @ g


def linear(x, w):
    """x @ w.T for x of shape [in] or [batch, in]; w is [out, in]."""
    return x @ w.T


def linear_bwd(x, w, g):
    gx = g @ w
    if x.ndim == 1:
        gw = np.outer(g, x)
    else:
        gw = g.T @ x
    return gx, gw


def affine(x, w, b):
    """x @ w.T + b with the bias broadcast over a leading batch axis."""
    return x @ w.T + b


def affine_bwd(x, w, g):
    gx = g @ w
    if x.ndim == 1:
        gw = np.outer(g, x)
        gb = g.copy()
    else:
        gw = g.T @ x
        gb = g.sum(axis=0)
    return gx, gw, gb


# ------------------------------------------------------------- elementwise

def sigmoid(x):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def sigmoid_bwd(y, g):
    return g * y * (1.0 - y)


def tanh(x):
    return np.tanh(x)


def tanh_bwd(y, g):
    return g * (1.0 - y * y)


def add(a, b):
    return a + b


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def neg(a):
    return -a


def scale(a, c):
    return a * c


def sumall(a):
    return float(a.sum())


def sqsum(a):
    return float((a * a).sum())


# ----------------------------------------------------------------- softmax

def softmax(x):
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_bwd(y, g):
    dot = (g * y).sum(axis=-1, keepdims=True)
    return y * (g - dot)


# ------------------------------------------------------------------ losses

def bce(pred, target, mask):
    """Masked mean binary cross-entropy in nats; probabilities clamped."""
    p = np.clip(pred, LOG_CLAMP, 1.0 - LOG_CLAMP)
    terms = mask * (target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    return -float(terms.sum()) / float(mask.sum())


def bce_bwd(pred, target, mask, g):
    p = np.clip(pred, LOG_CLAMP, 1.0 - LOG_CLAMP)
    inside = (pred >= LOG_CLAMP) & (pred <= 1.0 - LOG_CLAMP)
    d = mask * (p - target) / (p * (1.0 - p)) * inside
    return d * (g / float(mask.sum()))


def ce(logits, targets):
    """Mean negative log-likelihood in nats plus the softmax cache."""
    probs = softmax(logits)
    n = logits.shape[0]
    picked = probs[np.arange(n), targets]
    nats = -float(np.log(np.maximum(picked, 1e-300)).sum()) / n
    return nats, probs


def ce_bwd(probs, targets, g, base_scale):
    n = probs.shape[0]
    d = probs.copy()
    d[np.arange(n), targets] -= 1.0
    d *= g * base_scale / n
    return d


# ----------------------------------------------------- memory weighted sums

def wsum_vec(weights, rows):
    """Sum_i weights[i] * rows[i] for 1-D rows."""
    out = np.zeros_like(rows[0])
    for w, row in zip(weights, rows):
        out += w * row
    return out


def wsum_vec_bwd(weights, rows, g):
    gw = np.array([float(g @ row) for row in rows])
    grows = [w * g for w in weights]
    return gw, grows


def wsum_bat(weights, rows):
    """Per-lane weighted sum: weights is [B, n], each row is [B, d]."""
    out = np.zeros_like(rows[0])
    for i, row in enumerate(rows):
        out += weights[:, i : i + 1] * row
    return out


def wsum_bat_bwd(weights, rows, g):
    gw = np.empty_like(weights)
    grows = []
    for i, row in enumerate(rows):
        gw[:, i] = (g * row).sum(axis=1)
        grows.append(weights[:, i : i + 1] * g)
    return gw, grows


# --------------------------------------------------------------- optimizer

def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam update, in place on p, m and v."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
