"""Numba-compiled twins of the kernels in `reference.py`.

Loops are fused single passes per row, sequential (no prange): reductions keep
a fixed order so runs are bit-reproducible for a given backend. nogil lets the
evaluation fan-out run kernels from worker threads.
"""

import math

import numpy as np
from numba import njit

_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def softmax_rows(x):
    n, d = x.shape
    y = np.empty_like(x)
    for i in range(n):
        m = x[i, 0]
        for j in range(1, d):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(d):
            e = math.exp(x[i, j] - m)
            y[i, j] = e
            s += e
        for j in range(d):
            y[i, j] /= s
    return y


@njit(**_JIT)
def softmax_rows_bwd(y, gy):
    n, d = y.shape
    gx = np.empty_like(y)
    for i in range(n):
        dot = 0.0
        for j in range(d):
            dot += gy[i, j] * y[i, j]
        for j in range(d):
            gx[i, j] = y[i, j] * (gy[i, j] - dot)
    return gx


@njit(**_JIT)
def layernorm_rows(x, gain, bias, eps):
    n, d = x.shape
    y = np.empty_like(x)
    mean = np.empty(n, dtype=x.dtype)
    rstd = np.empty(n, dtype=x.dtype)
    for i in range(n):
        mu = 0.0
        for j in range(d):
            mu += x[i, j]
        mu /= d
        var = 0.0
        for j in range(d):
            diff = x[i, j] - mu
            var += diff * diff
        var /= d
        r = 1.0 / math.sqrt(var + eps)
        mean[i] = mu
        rstd[i] = r
        for j in range(d):
            y[i, j] = (x[i, j] - mu) * r * gain[j] + bias[j]
    return y, mean, rstd


@njit(**_JIT)
def layernorm_rows_bwd(gy, x, gain, mean, rstd):
    n, d = x.shape
    gx = np.empty_like(x)
    ggain = np.zeros(d, dtype=x.dtype)
    gbias = np.zeros(d, dtype=x.dtype)
    for i in range(n):
        mu = mean[i]
        r = rstd[i]
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            xhat = (x[i, j] - mu) * r
            gxh = gy[i, j] * gain[j]
            ggain[j] += gy[i, j] * xhat
            gbias[j] += gy[i, j]
            m1 += gxh
            m2 += gxh * xhat
        m1 /= d
        m2 /= d
        for j in range(d):
            xhat = (x[i, j] - mu) * r
            gxh = gy[i, j] * gain[j]
            gx[i, j] = r * (gxh - m1 - xhat * m2)
    return gx, ggain, gbias


@njit(**_JIT)
def gelu_fwd(x):
    y = np.empty_like(x)
    for i in range(x.size):
        v = x[i]
        inner = _GELU_C * (v + _GELU_A * v * v * v)
        y[i] = 0.5 * v * (1.0 + math.tanh(inner))
    return y


@njit(**_JIT)
def gelu_bwd(x, gy):
    gx = np.empty_like(x)
    for i in range(x.size):
        v = x[i]
        inner = _GELU_C * (v + _GELU_A * v * v * v)
        t = math.tanh(inner)
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * v * v)
        gx[i] = gy[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner)
    return gx


@njit(**_JIT)
def adamw_update(p, g, m, v, lr, beta1, beta2, eps, wd, bc1, bc2):
    decay = lr * wd
    for i in range(p.size):
        mi = beta1 * m[i] + (1.0 - beta1) * g[i]
        vi = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        m[i] = mi
        v[i] = vi
        step = lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)
        p[i] -= step + decay * p[i]


@njit(**_JIT)
def scatter_add_rows(out, idx, src):
    n, d = src.shape
    for i in range(n):
        row = idx[i]
        for j in range(d):
            out[row, j] += src[i, j]


@njit(**_JIT)
def segment_sum_rows(src, segs, nseg):
    n, d = src.shape
    out = np.zeros((nseg, d), dtype=src.dtype)
    for i in range(n):
        s = segs[i]
        for j in range(d):
            out[s, j] += src[i, j]
    return out


@njit(**_JIT)
def ce_rows(probs, labels, eps):
    n, d = probs.shape
    loss = np.zeros(n, dtype=probs.dtype)
    for i in range(n):
        acc = 0.0
        for j in range(d):
            pj = probs[i, j]
            if pj < eps:
                pj = eps
            acc -= labels[i, j] * math.log(pj)
        loss[i] = acc
    return loss


@njit(**_JIT)
def ce_rows_bwd(probs, labels, gy, eps):
    n, d = probs.shape
    gp = np.zeros_like(probs)
    for i in range(n):
        g = gy[i]
        for j in range(d):
            if probs[i, j] >= eps:
                gp[i, j] = -labels[i, j] / probs[i, j] * g
    return gp


@njit(**_JIT)
def kl_rows(p, q, eps):
    n, d = p.shape
    out = np.zeros(n, dtype=p.dtype)
    for i in range(n):
        acc = 0.0
        for j in range(d):
            pj = p[i, j]
            if pj > 0.0:
                pc = pj if pj >= eps else eps
                qc = q[i, j] if q[i, j] >= eps else eps
                acc += pj * (math.log(pc) - math.log(qc))
        out[i] = acc
    return out


@njit(**_JIT)
def kl_rows_bwd_p(p, q, gy, eps):
    n, d = p.shape
    gp = np.empty_like(p)
    for i in range(n):
        g = gy[i]
        for j in range(d):
            pc = p[i, j] if p[i, j] >= eps else eps
            qc = q[i, j] if q[i, j] >= eps else eps
            grad = math.log(pc) - math.log(qc)
            if p[i, j] >= eps:
                grad += 1.0
            gp[i, j] = grad * g
    return gp


@njit(**_JIT)
def kl_rows_bwd_q(p, q, gy, eps):
    n, d = p.shape
    gq = np.zeros_like(p)
    for i in range(n):
        g = gy[i]
        for j in range(d):
            if q[i, j] >= eps:
                gq[i, j] = -p[i, j] / q[i, j] * g
    return gq
