"""Pure-numpy implementations of the hot numeric kernels.

Every function here has a numba twin in `jit.py` with the same signature and
semantics. This module is the fallback backend (select with COLE_KERNELS=numpy)
and the ground truth the jit backend is tested against.

Shape conventions: row-wise kernels take 2-D arrays (rows are independent);
elementwise kernels take 1-D flattened arrays. Callers reshape.
"""

import numpy as np

_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def softmax_rows(x):
    m = np.max(x, axis=1, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=1, keepdims=True)


def softmax_rows_bwd(y, gy):
    dot = np.sum(gy * y, axis=1, keepdims=True)
    return y * (gy - dot)


def layernorm_rows(x, gain, bias, eps):
    mean = np.mean(x, axis=1)
    var = np.mean((x - mean[:, None]) ** 2, axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * gain + bias, mean, rstd


def layernorm_rows_bwd(gy, x, gain, mean, rstd):
    xhat = (x - mean[:, None]) * rstd[:, None]
    ggain = np.sum(gy * xhat, axis=0)
    gbias = np.sum(gy, axis=0)
    gxhat = gy * gain
    m1 = np.mean(gxhat, axis=1, keepdims=True)
    m2 = np.mean(gxhat * xhat, axis=1, keepdims=True)
    gx = rstd[:, None] * (gxhat - m1 - xhat * m2)
    return gx, ggain, gbias


def gelu_fwd(x):
    inner = _GELU_C * (x + _GELU_A * x * x * x)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_bwd(x, gy):
    inner = _GELU_C * (x + _GELU_A * x * x * x)
    t = np.tanh(inner)
    dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    return gy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)


def adamw_update(p, g, m, v, lr, beta1, beta2, eps, wd, bc1, bc2):
    """One decoupled-weight-decay Adam step, in place on flat arrays.

    bc1/bc2 are the bias corrections 1 - beta^t for the current step. Decay is
    applied to the incoming parameter value, not folded into the gradient.
    """
    decay = lr * wd
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    step = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    p -= step + decay * p


def scatter_add_rows(out, idx, src):
    """out[idx[i], :] += src[i, :] with repeated indices accumulated."""
    np.add.at(out, idx, src)


def segment_sum_rows(src, segs, nseg):
    out = np.zeros((nseg, src.shape[1]), dtype=src.dtype)
    np.add.at(out, segs, src)
    return out


def ce_rows(probs, labels, eps):
    """Per-row -sum(label * log(max(p, eps)))."""
    return -np.sum(labels * np.log(np.maximum(probs, eps)), axis=1)


def ce_rows_bwd(probs, labels, gy, eps):
    gp = np.where(probs >= eps, -labels / np.maximum(probs, eps), 0.0)
    return gp * gy[:, None]


def kl_rows(p, q, eps):
    """Per-row sum p*log(p/q) with eps clamps inside the logs; p==0 terms are 0."""
    ratio = np.log(np.maximum(p, eps)) - np.log(np.maximum(q, eps))
    return np.sum(np.where(p > 0.0, p * ratio, 0.0), axis=1)


def kl_rows_bwd_p(p, q, gy, eps):
    ratio = np.log(np.maximum(p, eps)) - np.log(np.maximum(q, eps))
    gp = ratio + np.where(p >= eps, 1.0, 0.0)
    return gp * gy[:, None]


def kl_rows_bwd_q(p, q, gy, eps):
    gq = np.where(q >= eps, -p / np.maximum(q, eps), 0.0)
    return gq * gy[:, None]
