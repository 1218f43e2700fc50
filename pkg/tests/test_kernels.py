"""The jit kernels must agree with the numpy reference backend."""

import numpy as np
import pytest

from cole.numeric.kernels import reference

jit = pytest.importorskip("cole.numeric.kernels.jit")

RNG = np.random.default_rng(20240814)


def _dist(n, d):
    x = RNG.random((n, d)) + 1e-3
    return x / x.sum(axis=1, keepdims=True)


def test_softmax_rows_matches():
    x = RNG.normal(size=(7, 13))
    np.testing.assert_allclose(jit.softmax_rows(x), reference.softmax_rows(x), rtol=1e-12)


def test_softmax_bwd_matches():
    x = RNG.normal(size=(5, 9))
    y = reference.softmax_rows(x)
    gy = RNG.normal(size=x.shape)
    np.testing.assert_allclose(jit.softmax_rows_bwd(y, gy),
                               reference.softmax_rows_bwd(y, gy), rtol=1e-12)


def test_layernorm_matches():
    x = RNG.normal(size=(6, 8))
    gain = RNG.normal(size=8)
    bias = RNG.normal(size=8)
    yj, mj, rj = jit.layernorm_rows(x, gain, bias, 1e-5)
    yr, mr, rr = reference.layernorm_rows(x, gain, bias, 1e-5)
    np.testing.assert_allclose(yj, yr, rtol=1e-12)
    np.testing.assert_allclose(mj, mr, rtol=1e-12)
    np.testing.assert_allclose(rj, rr, rtol=1e-12)
    gy = RNG.normal(size=x.shape)
    outj = jit.layernorm_rows_bwd(gy, x, gain, mj, rj)
    outr = reference.layernorm_rows_bwd(gy, x, gain, mr, rr)
    for a, b in zip(outj, outr):
        np.testing.assert_allclose(a, b, rtol=1e-10)


def test_gelu_matches():
    # libm tanh differs from numpy tanh in the last ulps
    x = RNG.normal(size=64) * 3
    np.testing.assert_allclose(jit.gelu_fwd(x), reference.gelu_fwd(x),
                               rtol=1e-8, atol=1e-14)
    gy = RNG.normal(size=64)
    np.testing.assert_allclose(jit.gelu_bwd(x, gy), reference.gelu_bwd(x, gy),
                               rtol=1e-8, atol=1e-14)


def test_adamw_matches():
    shape = (33,)
    args = dict(lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8, wd=0.01, bc1=0.1, bc2=0.001)
    pj = RNG.normal(size=shape)
    pr = pj.copy()
    g = RNG.normal(size=shape)
    mj, vj = np.zeros(shape), np.zeros(shape)
    mr, vr = np.zeros(shape), np.zeros(shape)
    jit.adamw_update(pj, g, mj, vj, **args)
    reference.adamw_update(pr, g, mr, vr, **args)
    np.testing.assert_allclose(pj, pr, rtol=1e-12)
    np.testing.assert_allclose(mj, mr, rtol=1e-12)
    np.testing.assert_allclose(vj, vr, rtol=1e-12)


def test_scatter_add_matches_with_duplicates():
    idx = np.array([0, 2, 0, 1, 2, 2], dtype=np.int64)
    src = RNG.normal(size=(6, 4))
    outj = np.zeros((3, 4))
    outr = np.zeros((3, 4))
    jit.scatter_add_rows(outj, idx, src)
    reference.scatter_add_rows(outr, idx, src)
    np.testing.assert_allclose(outj, outr, rtol=1e-12)


def test_segment_sum_matches_and_zero_segments():
    segs = np.array([1, 1, 3, 0], dtype=np.int64)
    src = RNG.normal(size=(4, 5))
    outj = jit.segment_sum_rows(src, segs, 4)
    outr = reference.segment_sum_rows(src, segs, 4)
    np.testing.assert_allclose(outj, outr, rtol=1e-12)
    assert np.all(outj[2] == 0.0)


def test_ce_and_kl_match():
    p = _dist(8, 11)
    q = _dist(8, 11)
    lab = np.zeros_like(p)
    lab[np.arange(8), RNG.integers(0, 11, 8)] = 1.0
    eps = 1e-9
    np.testing.assert_allclose(jit.ce_rows(p, lab, eps), reference.ce_rows(p, lab, eps), rtol=1e-12)
    gy = RNG.normal(size=8)
    np.testing.assert_allclose(jit.ce_rows_bwd(p, lab, gy, eps),
                               reference.ce_rows_bwd(p, lab, gy, eps), rtol=1e-12)
    np.testing.assert_allclose(jit.kl_rows(p, q, eps), reference.kl_rows(p, q, eps), rtol=1e-12)
    np.testing.assert_allclose(jit.kl_rows_bwd_p(p, q, gy, eps),
                               reference.kl_rows_bwd_p(p, q, gy, eps), rtol=1e-12)
    np.testing.assert_allclose(jit.kl_rows_bwd_q(p, q, gy, eps),
                               reference.kl_rows_bwd_q(p, q, gy, eps), rtol=1e-12)
