"""Independent reference computations used by the tests.

Everything here is deliberately written without the package's autodiff ops:
explicit loops and scalar math only, so the tests check the implementation
against a separate derivation rather than against itself.
"""

import math

import numpy as np


def fd_gradcheck(build_loss, tensors, h=1e-4, rtol=1e-4, atol=1e-8):
    """Central finite differences vs analytic gradients for every element of
    every tensor in `tensors`. build_loss() must be deterministic."""
    for t in tensors:
        t.grad = None
    loss = build_loss()
    loss.backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for t in tensors]
    for t, an in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        fd = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = build_loss().item()
            flat[i] = orig - h
            lm = build_loss().item()
            flat[i] = orig
            fd[i] = (lp - lm) / (2.0 * h)
        np.testing.assert_allclose(an.reshape(-1), fd, rtol=rtol, atol=atol)


def softmax_1d(x):
    x = [float(v) for v in x]
    m = max(x)
    es = [math.exp(v - m) for v in x]
    s = sum(es)
    return np.array([e / s for e in es])


def layer_norm_rows(x, gain, bias, eps):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        mu = float(np.mean(x[i]))
        var = float(np.mean((x[i] - mu) ** 2))
        out[i] = (x[i] - mu) / math.sqrt(var + eps) * gain + bias
    return out


def gelu_scalar(v):
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * v * (1.0 + math.tanh(c * (v + 0.044715 * v ** 3)))


def encoder_forward(x, params, pad_mask=None):
    """Step-by-step encoder forward on plain arrays: explicit per-head,
    per-position attention loops, post-norm residuals, GELU FFN."""
    x = np.array(x, dtype=np.float64)
    B, L, D = x.shape
    H = params.n_heads
    dh = D // H
    eps = params.ln_eps
    for layer in params.layers:
        w = {k: np.asarray(t.data, dtype=np.float64) for k, t in layer.items()}
        out = np.zeros_like(x)
        for b in range(B):
            q = x[b] @ w["wq"] + w["bq"]
            k = x[b] @ w["wk"] + w["bk"]
            v = x[b] @ w["wv"] + w["bv"]
            ctx = np.zeros((L, D))
            for h in range(H):
                qh = q[:, h * dh:(h + 1) * dh]
                kh = k[:, h * dh:(h + 1) * dh]
                vh = v[:, h * dh:(h + 1) * dh]
                for i in range(L):
                    scores = np.array([
                        float(qh[i] @ kh[j]) / math.sqrt(dh) for j in range(L)
                    ])
                    if pad_mask is not None:
                        scores = np.where(pad_mask[b], scores, scores - 1e9)
                    probs = softmax_1d(scores)
                    ctx[i, h * dh:(h + 1) * dh] = sum(
                        probs[j] * vh[j] for j in range(L))
            attn = ctx @ w["wo"] + w["bo"]
            y = layer_norm_rows(x[b] + attn, w["ln1_g"], w["ln1_b"], eps)
            hidden = np.vectorize(gelu_scalar)(y @ w["w1"] + w["b1"])
            ffn = hidden @ w["w2"] + w["b2"]
            out[b] = layer_norm_rows(y + ffn, w["ln2_g"], w["ln2_b"], eps)
        x = out
    return x


def filtered_rank_by_sort(scores, target, filtered_ids):
    """Exhaustive-sort rank oracle: drop filtered candidates (never the
    target), sort descending, pessimistic ties (target after equals)."""
    keep = [i for i in range(len(scores)) if i == target or i not in filtered_ids]
    target_score = scores[target]
    worse_or_equal = sorted(
        keep, key=lambda i: (-scores[i], 0 if i != target else 1))
    # pessimistic: everyone with a strictly greater score, plus every
    # non-target with an equal score, precedes the target
    rank = 1
    for i in keep:
        if i == target:
            continue
        if scores[i] >= target_score:
            rank += 1
    assert worse_or_equal.index(target) + 1 == rank
    return rank
