"""Dense tensors with reverse-mode gradients over numpy arrays.

Small tape-free design: each Tensor produced by an op keeps its parents and a
backward closure; `backward()` walks the graph in reverse topological order.
Hot elementwise/row kernels dispatch through `cole.numeric.kernels`; matmul
stays on numpy (BLAS).
"""

import numpy as np

from . import kernels

EPS_LOG = 1e-9  # log clamp for cross-entropy / KL


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Reverse-mode pass from a scalar; accumulates into .grad fields."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.shape}")
        topo = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g

    # operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, grad={self.requires_grad})"


def _toposort(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _wrap(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data, parents, backward):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _reduce_to(g, shape):
    """Sum gradient g down to a broadcast source of the given shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# elementwise / linear ------------------------------------------------------

def add(a, b):
    a = _wrap(a, getattr(b, "dtype", np.float64))
    b = _wrap(b, a.dtype)
    out = a.data + b.data

    def bwd(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _make(out, (a, b), bwd)


def sub(a, b):
    a = _wrap(a, getattr(b, "dtype", np.float64))
    b = _wrap(b, a.dtype)
    out = a.data - b.data

    def bwd(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return _make(out, (a, b), bwd)


def mul(a, b):
    a = _wrap(a, getattr(b, "dtype", np.float64))
    b = _wrap(b, a.dtype)
    out = a.data * b.data

    def bwd(g):
        return _reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)

    return _make(out, (a, b), bwd)


def div(a, b):
    a = _wrap(a, getattr(b, "dtype", np.float64))
    b = _wrap(b, a.dtype)
    out = a.data / b.data

    def bwd(g):
        ga = _reduce_to(g / b.data, a.shape)
        gb = _reduce_to(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _make(out, (a, b), bwd)


def matmul(a, b):
    out = np.matmul(a.data, b.data)

    def bwd(g):
        ga = gb = None
        if a.requires_grad:
            ga = _reduce_to(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            while gb.ndim > b.ndim:
                gb = gb.sum(axis=0)
            gb = _reduce_to(gb, b.shape)
        return ga, gb

    return _make(out, (a, b), bwd)


def reshape(t, shape):
    src = t.shape
    out = t.data.reshape(shape)

    def bwd(g):
        return (g.reshape(src),)

    return _make(out, (t,), bwd)


def transpose(t, axes):
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = t.data.transpose(axes)

    def bwd(g):
        return (g.transpose(inv),)

    return _make(out, (t,), bwd)


def tsum(t, axis=None, keepdims=False):
    out = t.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, t.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, t.shape).copy(),)

    return _make(out, (t,), bwd)


def tmean(t, axis=None, keepdims=False):
    n = t.data.size if axis is None else t.shape[axis]
    out = t.data.mean(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / n, t.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / n, t.shape).copy(),)

    return _make(out, (t,), bwd)


def concat(tensors, axis=0):
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), bwd)


def stack(tensors, axis=0):
    out = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g):
        return tuple(np.ascontiguousarray(np.take(g, i, axis=axis)) for i in range(len(tensors)))

    return _make(out, tuple(tensors), bwd)


# indexing -------------------------------------------------------------------

def gather_rows(matrix, idx):
    """Rows of a 2-D parameter matrix by integer index (embedding lookup)."""
    idx = np.asarray(idx, dtype=np.int64)
    out = matrix.data[idx]

    def bwd(g):
        gm = np.zeros_like(matrix.data)
        kernels.scatter_add_rows(gm, idx, np.ascontiguousarray(g))
        return (gm,)

    return _make(out, (matrix,), bwd)


def take_positions(x, pos):
    """x[(b, pos[b], :)] for a (B, L, D) tensor -> (B, D)."""
    pos = np.asarray(pos, dtype=np.int64)
    rows = np.arange(x.shape[0])
    out = x.data[rows, pos]

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[rows, pos] = g
        return (gx,)

    return _make(out, (x,), bwd)


def add_at_positions(x, pos, v):
    """Add v[b] into x[b, pos[b], :]; injects a vector at one slot per row."""
    pos = np.asarray(pos, dtype=np.int64)
    rows = np.arange(x.shape[0])
    out = x.data.copy()
    out[rows, pos] += v.data

    def bwd(g):
        return g, g[rows, pos]

    return _make(out, (x, v), bwd)


def take_along_last(x, idx):
    """Per-row gather along the last axis: (B, V), (B, k) -> (B, k)."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.take_along_axis(x.data, idx, axis=-1)

    def bwd(g):
        gx = np.zeros_like(x.data)
        rows = np.arange(x.shape[0])[:, None]
        np.add.at(gx, (rows, idx), g)
        return (gx,)

    return _make(out, (x,), bwd)


def segment_sum(x, segs, nseg):
    """Sum rows of (N, D) into (nseg, D) buckets; empty buckets are zero."""
    segs = np.asarray(segs, dtype=np.int64)
    out = kernels.segment_sum_rows(np.ascontiguousarray(x.data), segs, nseg)

    def bwd(g):
        return (np.ascontiguousarray(g[segs]),)

    return _make(out, (x,), bwd)


# nonlinearities & losses ----------------------------------------------------

def softmax(t):
    """Row-wise softmax over the last axis; max-shifted, NaN input rejected."""
    x2 = np.ascontiguousarray(t.data.reshape(-1, t.shape[-1]))
    if np.isnan(x2).any():
        raise ValueError("softmax: NaN in input")
    y2 = kernels.softmax_rows(x2)
    out = y2.reshape(t.shape)

    def bwd(g):
        g2 = np.ascontiguousarray(g.reshape(-1, t.shape[-1]))
        return (kernels.softmax_rows_bwd(y2, g2).reshape(t.shape),)

    return _make(out, (t,), bwd)


def gelu(t):
    flat = np.ascontiguousarray(t.data.reshape(-1))
    out = kernels.gelu_fwd(flat).reshape(t.shape)

    def bwd(g):
        gg = np.ascontiguousarray(g.reshape(-1))
        return (kernels.gelu_bwd(flat, gg).reshape(t.shape),)

    return _make(out, (t,), bwd)


def layer_norm(x, gain, bias, eps=1e-5):
    d = x.shape[-1]
    x2 = np.ascontiguousarray(x.data.reshape(-1, d))
    y2, mean, rstd = kernels.layernorm_rows(x2, gain.data, bias.data, eps)
    out = y2.reshape(x.shape)

    def bwd(g):
        g2 = np.ascontiguousarray(g.reshape(-1, d))
        gx, ggain, gbias = kernels.layernorm_rows_bwd(g2, x2, gain.data, mean, rstd)
        return gx.reshape(x.shape), ggain, gbias

    return _make(out, (x, gain, bias), bwd)


def dropout(t, rate, rng, training):
    """Inverted dropout; identity when not training or rate == 0."""
    if not training or rate <= 0.0:
        return t
    keep = (rng.random(t.shape) >= rate).astype(t.dtype) / (1.0 - rate)
    return mul(t, Tensor(keep))


def cross_entropy(probs, label, eps=EPS_LOG):
    """-sum(label * log(probs)) per row, with the log eps-clamped.

    `label` is a constant distribution (one-hot or smoothed) given as an
    ndarray or Tensor of the same shape. 1-D input gives a scalar tensor,
    2-D gives a per-row vector.
    """
    lab = label.data if isinstance(label, Tensor) else np.asarray(label, dtype=probs.dtype)
    if lab.shape != probs.shape:
        raise ValueError(f"cross_entropy: label shape {lab.shape} != probs shape {probs.shape}")
    one_d = probs.ndim == 1
    p2 = np.ascontiguousarray(probs.data.reshape(-1, probs.shape[-1]))
    l2 = np.ascontiguousarray(lab.reshape(p2.shape))
    loss = kernels.ce_rows(p2, l2, eps)
    out = loss[0] if one_d else loss

    def bwd(g):
        gy = np.atleast_1d(np.asarray(g, dtype=p2.dtype)).reshape(-1)
        gp = kernels.ce_rows_bwd(p2, l2, np.ascontiguousarray(gy), eps)
        return (gp.reshape(probs.shape),)

    return _make(out, (probs,), bwd)


def kl_divergence(p, q, eps=EPS_LOG):
    """sum p*log(p/q) per row (teacher first); zero-probability terms clamped."""
    p = p if isinstance(p, Tensor) else Tensor(p)
    q = q if isinstance(q, Tensor) else Tensor(q)
    if p.shape != q.shape:
        raise ValueError(f"kl_divergence: shape mismatch {p.shape} vs {q.shape}")
    one_d = p.ndim == 1
    p2 = np.ascontiguousarray(p.data.reshape(-1, p.shape[-1]))
    q2 = np.ascontiguousarray(q.data.reshape(-1, q.shape[-1]))
    val = kernels.kl_rows(p2, q2, eps)
    out = val[0] if one_d else val

    def bwd(g):
        gy = np.ascontiguousarray(np.atleast_1d(np.asarray(g, dtype=p2.dtype)).reshape(-1))
        gp = kernels.kl_rows_bwd_p(p2, q2, gy, eps).reshape(p.shape) if p.requires_grad else None
        gq = kernels.kl_rows_bwd_q(p2, q2, gy, eps).reshape(q.shape) if q.requires_grad else None
        return gp, gq

    return _make(out, (p, q), bwd)


# parameter helpers ----------------------------------------------------------

def trunc_normal(shape, std, rng, dtype=np.float64):
    """Normal(0, std) resampled into [-2 std, 2 std]."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return Tensor(out.astype(dtype), requires_grad=True)


def zeros(shape, dtype=np.float64):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def ones(shape, dtype=np.float64):
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


def backprop(loss, params=None):
    """Run the reverse pass; parameters not reached get zero gradient."""
    loss.backward()
    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
