"""Transformer encoder blocks: bidirectional multi-head self-attention with
post-norm residuals and a GELU feed-forward, over the Tensor autodiff ops."""

import numpy as np

from .tensor import (
    Tensor, dropout, gelu, layer_norm, matmul, reshape, softmax, transpose,
    trunc_normal, zeros, ones,
)

INIT_STD = 0.02
MASK_NEG = -1e9


class EncoderParams:
    """Per-layer attention/FFN/layer-norm weights for a stack of layers.

    dim must be divisible by heads. ff_dim defaults to 4*dim.
    """

    def __init__(self, dim, layers, heads, rng, ff_dim=None, ln_eps=1e-5,
                 dropout_rate=0.1, dtype=np.float64):
        if dim % heads != 0:
            raise ValueError(f"model dim {dim} not divisible by head count {heads}")
        self.dim = dim
        self.n_layers = layers
        self.n_heads = heads
        self.ff_dim = ff_dim if ff_dim is not None else 4 * dim
        self.ln_eps = ln_eps
        self.dropout_rate = dropout_rate
        self.layers = []
        for _ in range(layers):
            self.layers.append({
                "wq": trunc_normal((dim, dim), INIT_STD, rng, dtype),
                "bq": zeros((dim,), dtype),
                "wk": trunc_normal((dim, dim), INIT_STD, rng, dtype),
                "bk": zeros((dim,), dtype),
                "wv": trunc_normal((dim, dim), INIT_STD, rng, dtype),
                "bv": zeros((dim,), dtype),
                "wo": trunc_normal((dim, dim), INIT_STD, rng, dtype),
                "bo": zeros((dim,), dtype),
                "w1": trunc_normal((dim, self.ff_dim), INIT_STD, rng, dtype),
                "b1": zeros((self.ff_dim,), dtype),
                "w2": trunc_normal((self.ff_dim, dim), INIT_STD, rng, dtype),
                "b2": zeros((dim,), dtype),
                "ln1_g": ones((dim,), dtype),
                "ln1_b": zeros((dim,), dtype),
                "ln2_g": ones((dim,), dtype),
                "ln2_b": zeros((dim,), dtype),
            })

    def named_params(self, prefix="encoder"):
        for i, layer in enumerate(self.layers):
            for key, tensor in layer.items():
                yield f"{prefix}.{i}.{key}", tensor


def encode_sequence(x, params, pad_mask=None, training=False, rng=None):
    """Run the encoder stack over x (B, L, D); every position attends to every
    (unpadded) position. pad_mask is an optional (B, L) bool array, True where
    the token is real. Deterministic when training is False."""
    if x.shape[-1] != params.dim:
        raise ValueError(f"input dim {x.shape[-1]} != encoder dim {params.dim}")
    B, L, D = x.shape
    H = params.n_heads
    dh = D // H
    scale = 1.0 / np.sqrt(dh)
    rate = params.dropout_rate

    add_mask = None
    if pad_mask is not None:
        bias = np.where(pad_mask, 0.0, MASK_NEG).astype(x.dtype)
        add_mask = Tensor(bias.reshape(B, 1, 1, L))

    for layer in params.layers:
        q = _heads(matmul(x, layer["wq"]) + layer["bq"], B, L, H, dh)
        k = _heads(matmul(x, layer["wk"]) + layer["bk"], B, L, H, dh)
        v = _heads(matmul(x, layer["wv"]) + layer["bv"], B, L, H, dh)

        scores = matmul(q, transpose(k, (0, 1, 3, 2))) * scale
        if add_mask is not None:
            scores = scores + add_mask
        probs = softmax(scores)
        probs = dropout(probs, rate, rng, training)
        ctx = reshape(transpose(matmul(probs, v), (0, 2, 1, 3)), (B, L, D))
        attn = matmul(ctx, layer["wo"]) + layer["bo"]

        x = layer_norm(x + dropout(attn, rate, rng, training),
                       layer["ln1_g"], layer["ln1_b"], params.ln_eps)

        h = gelu(matmul(x, layer["w1"]) + layer["b1"])
        ffn = matmul(h, layer["w2"]) + layer["b2"]
        x = layer_norm(x + dropout(ffn, rate, rng, training),
                       layer["ln2_g"], layer["ln2_b"], params.ln_eps)
    return x


def _heads(t, B, L, H, dh):
    return transpose(reshape(t, (B, L, H, dh)), (0, 2, 1, 3))
