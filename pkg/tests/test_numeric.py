"""Tensor engine, encoder, optimizer, scheduler, and checkpoint tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cole import numeric as nm
from oracles import encoder_forward, fd_gradcheck, layer_norm_rows

RNG = np.random.default_rng(7)

# frozen with a 50-digit mpmath evaluation
SOFTMAX_123 = np.array([
    0.090030573170380457998,
    0.24472847105479765247,
    0.66524095577482188953,
])
NEG_LOG_02 = 1.6094379124341003746
KL_73_46 = 0.18378689738681228756
LN2 = 0.69314718055994530942


class TestSoftmax:
    def test_symmetric(self):
        p = nm.softmax(nm.Tensor([0.0, 0.0]))
        np.testing.assert_allclose(p.data, [0.5, 0.5], atol=1e-15)

    def test_overflow_safe(self):
        p = nm.softmax(nm.Tensor([1000.0, 0.0]))
        assert np.isfinite(p.data).all()
        assert p.data[0] > 1 - 1e-12 and p.data[1] < 1e-12

    def test_reference_values(self):
        p = nm.softmax(nm.Tensor([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(p.data, SOFTMAX_123, atol=1e-12)

    def test_shift_invariance(self):
        x = RNG.normal(size=9)
        a = nm.softmax(nm.Tensor(x)).data
        b = nm.softmax(nm.Tensor(x + 17.3)).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            nm.softmax(nm.Tensor([np.nan, 0.0]))

    @given(st.lists(st.floats(-30, 30), min_size=2, max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_sums_to_one(self, xs):
        p = nm.softmax(nm.Tensor(xs))
        assert abs(p.data.sum() - 1.0) < 1e-6
        assert (p.data > 0).all()


class TestCrossEntropy:
    def test_certain_prediction_near_zero(self):
        probs = nm.Tensor([1.0, 0.0, 0.0])
        lab = np.array([1.0, 0.0, 0.0])
        assert nm.cross_entropy(probs, lab).item() == pytest.approx(0.0, abs=1e-12)

    def test_uniform_is_log_v(self):
        v = 11
        probs = nm.Tensor(np.full(v, 1.0 / v))
        lab = np.zeros(v)
        lab[3] = 1.0
        assert nm.cross_entropy(probs, lab).item() == pytest.approx(math.log(v), rel=1e-12)

    def test_reference_value(self):
        probs = nm.Tensor([0.7, 0.2, 0.1])
        lab = np.array([0.0, 1.0, 0.0])
        assert nm.cross_entropy(probs, lab).item() == pytest.approx(NEG_LOG_02, abs=1e-12)

    def test_zero_probability_clamped_not_nan(self):
        probs = nm.Tensor([0.0, 1.0])
        lab = np.array([1.0, 0.0])
        loss = nm.cross_entropy(probs, lab)
        assert np.isfinite(loss.item())
        assert loss.item() == pytest.approx(-math.log(nm.EPS_LOG))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            nm.cross_entropy(nm.Tensor([0.5, 0.5]), np.array([1.0, 0.0, 0.0]))


class TestKL:
    def test_identical_is_zero(self):
        p = nm.Tensor([0.5, 0.5])
        assert nm.kl_divergence(p, nm.Tensor([0.5, 0.5])).item() == pytest.approx(0.0, abs=1e-9)

    def test_onehot_vs_uniform(self):
        val = nm.kl_divergence(nm.Tensor([1.0, 0.0]), nm.Tensor([0.5, 0.5])).item()
        assert val == pytest.approx(LN2, abs=1e-12)

    def test_reference_value(self):
        val = nm.kl_divergence(nm.Tensor([0.7, 0.3]), nm.Tensor([0.4, 0.6])).item()
        assert val == pytest.approx(KL_73_46, abs=1e-12)

    def test_zero_q_clamped(self):
        val = nm.kl_divergence(nm.Tensor([0.5, 0.5]), nm.Tensor([1.0, 0.0]))
        assert np.isfinite(val.item())

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=20),
           st.lists(st.floats(0.01, 1.0), min_size=2, max_size=20))
    @settings(max_examples=60, deadline=None)
    def test_nonnegative(self, a, b):
        n = min(len(a), len(b))
        p = np.array(a[:n]) / sum(a[:n])
        q = np.array(b[:n]) / sum(b[:n])
        assert nm.kl_divergence(nm.Tensor(p), nm.Tensor(q)).item() >= -1e-12


class TestBackprop:
    def test_sum_of_squares(self):
        x = nm.Tensor(RNG.normal(size=(4, 3)), requires_grad=True)
        loss = (x * x).sum()
        loss.backward()
        np.testing.assert_allclose(x.grad, 2 * x.data, atol=1e-12)

    def test_softmax_ce_identity(self):
        z = nm.Tensor(RNG.normal(size=7), requires_grad=True)
        onehot = np.zeros(7)
        onehot[4] = 1.0
        loss = nm.cross_entropy(nm.softmax(z), onehot)
        loss.backward()
        p = nm.softmax(nm.Tensor(z.data)).data
        np.testing.assert_allclose(z.grad, p - onehot, atol=1e-10)

    def test_non_scalar_rejected(self):
        x = nm.Tensor(RNG.normal(size=3), requires_grad=True)
        with pytest.raises(ValueError):
            (x * 2.0).backward()

    def test_unreached_params_zeroed(self):
        used = nm.Tensor(np.array([2.0]), requires_grad=True)
        unused = nm.Tensor(np.array([3.0]), requires_grad=True)
        loss = (used * used).sum()
        nm.backprop(loss, params=[used, unused])
        np.testing.assert_allclose(used.grad, [4.0])
        np.testing.assert_allclose(unused.grad, [0.0])

    def test_encoder_ce_finite_differences(self):
        rng = np.random.default_rng(11)
        enc = nm.EncoderParams(dim=4, layers=1, heads=1, rng=rng, ff_dim=8,
                               dropout_rate=0.0)
        x0 = rng.normal(size=(2, 3, 4))
        proj = nm.trunc_normal((4, 5), 0.5, rng)
        labels = np.zeros((2, 5))
        labels[0, 1] = labels[1, 3] = 1.0
        params = [proj] + [t for _, t in enc.named_params()]

        def build():
            out = nm.encode_sequence(nm.Tensor(x0), enc)
            pooled = nm.take_positions(out, np.array([2, 2]))
            probs = nm.softmax(nm.matmul(pooled, proj))
            return nm.cross_entropy(probs, labels).mean()

        fd_gradcheck(build, params)

    def test_elementwise_op_gradients(self):
        rng = np.random.default_rng(3)
        a = nm.Tensor(rng.normal(size=(3, 4)) + 2.5, requires_grad=True)
        b = nm.Tensor(rng.normal(size=(4,)) + 2.5, requires_grad=True)

        def build():
            return ((a * b + a / b - b) * 0.3).sum()

        fd_gradcheck(build, [a, b])

    def test_gather_segment_gradients(self):
        rng = np.random.default_rng(4)
        table = nm.Tensor(rng.normal(size=(6, 3)), requires_grad=True)
        idx = np.array([0, 5, 5, 2])
        segs = np.array([0, 1, 1, 1])

        def build():
            rows = nm.gather_rows(table, idx)
            pooled = nm.segment_sum(rows, segs, 2)
            return (pooled * pooled).sum()

        fd_gradcheck(build, [table])

    def test_layer_norm_gelu_gradients(self):
        rng = np.random.default_rng(5)
        x = nm.Tensor(rng.normal(size=(3, 6)), requires_grad=True)
        g = nm.Tensor(rng.normal(size=6) + 1.0, requires_grad=True)
        b = nm.Tensor(rng.normal(size=6), requires_grad=True)

        def build():
            return (nm.gelu(nm.layer_norm(x, g, b, eps=1e-5))).sum()

        fd_gradcheck(build, [x, g, b])

    def test_kl_gradients_both_sides(self):
        p = nm.Tensor(np.array([0.6, 0.3, 0.1]), requires_grad=True)
        q = nm.Tensor(np.array([0.2, 0.5, 0.3]), requires_grad=True)

        def build():
            return nm.kl_divergence(p, q) * 1.0

        fd_gradcheck(build, [p, q])


class TestEncoder:
    def _zero_weight_encoder(self, dim=6, rng_seed=0):
        enc = nm.EncoderParams(dim=dim, layers=1, heads=2,
                               rng=np.random.default_rng(rng_seed),
                               dropout_rate=0.0)
        for layer in enc.layers:
            for key in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                        "w1", "b1", "w2", "b2"):
                layer[key].data[...] = 0.0
        return enc

    def test_residual_identity_with_zero_weights(self):
        enc = self._zero_weight_encoder()
        x = RNG.normal(size=(2, 3, 6))
        out = nm.encode_sequence(nm.Tensor(x), enc).data
        ln = lambda a: layer_norm_rows(a.reshape(-1, 6), np.ones(6), np.zeros(6),
                                       enc.ln_eps).reshape(a.shape)
        np.testing.assert_allclose(out, ln(ln(x)), atol=1e-12)
        # layer norm is near-idempotent, so this is the layer-normed input
        np.testing.assert_allclose(out, ln(x), atol=1e-4)

    def test_permutation_equivariance(self):
        enc = nm.EncoderParams(dim=8, layers=2, heads=2,
                               rng=np.random.default_rng(2), dropout_rate=0.0)
        x = RNG.normal(size=(1, 4, 8))
        perm = np.array([2, 0, 3, 1])
        out = nm.encode_sequence(nm.Tensor(x), enc).data
        out_perm = nm.encode_sequence(nm.Tensor(x[:, perm]), enc).data
        np.testing.assert_allclose(out_perm, out[:, perm], atol=1e-10)

    def test_matches_step_by_step_oracle(self):
        enc = nm.EncoderParams(dim=4, layers=1, heads=1,
                               rng=np.random.default_rng(9), dropout_rate=0.0)
        x = np.random.default_rng(10).normal(size=(1, 3, 4))
        got = nm.encode_sequence(nm.Tensor(x), enc).data
        want = encoder_forward(x, enc)
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_multilayer_multihead_oracle(self):
        enc = nm.EncoderParams(dim=8, layers=2, heads=2,
                               rng=np.random.default_rng(12), dropout_rate=0.0)
        x = np.random.default_rng(13).normal(size=(2, 5, 8))
        got = nm.encode_sequence(nm.Tensor(x), enc).data
        np.testing.assert_allclose(got, encoder_forward(x, enc), atol=1e-6)

    def test_padding_mask_matches_oracle_and_blocks_pad(self):
        enc = nm.EncoderParams(dim=4, layers=1, heads=1,
                               rng=np.random.default_rng(14), dropout_rate=0.0)
        rng = np.random.default_rng(15)
        x = rng.normal(size=(2, 4, 4))
        mask = np.array([[True, True, True, False], [True, True, False, False]])
        got = nm.encode_sequence(nm.Tensor(x), enc, pad_mask=mask).data
        want = encoder_forward(x, enc, pad_mask=mask)
        np.testing.assert_allclose(got, want, atol=1e-6)
        # changing a padded token must not change any unpadded output
        x2 = x.copy()
        x2[0, 3] += 5.0
        got2 = nm.encode_sequence(nm.Tensor(x2), enc, pad_mask=mask).data
        np.testing.assert_allclose(got2[0, :3], got[0, :3], atol=1e-12)

    def test_inference_deterministic(self):
        enc = nm.EncoderParams(dim=8, layers=2, heads=2,
                               rng=np.random.default_rng(3), dropout_rate=0.1)
        x = RNG.normal(size=(2, 3, 8))
        a = nm.encode_sequence(nm.Tensor(x), enc).data
        b = nm.encode_sequence(nm.Tensor(x), enc).data
        assert np.array_equal(a, b)

    def test_dimension_mismatch_rejected(self):
        enc = nm.EncoderParams(dim=8, layers=1, heads=2,
                               rng=np.random.default_rng(4))
        with pytest.raises(ValueError):
            nm.encode_sequence(nm.Tensor(np.zeros((1, 3, 6))), enc)

    def test_dim_head_divisibility(self):
        with pytest.raises(ValueError):
            nm.EncoderParams(dim=6, layers=1, heads=4, rng=np.random.default_rng(0))


class TestAdamW:
    def _constant_sched(self, lr):
        return nm.LrSchedule(lr, warmup_steps=0, total_steps=0)

    def test_zero_grad_zero_decay_no_change(self):
        p = nm.Tensor(np.array([1.5, -2.0]), requires_grad=True)
        opt = nm.AdamW({"p": p}, self._constant_sched(0.1), weight_decay=0.0)
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_allclose(p.data, [1.5, -2.0], atol=1e-15)

    def test_scalar_step_oracle(self):
        # frozen from scalar arithmetic: p=1, g=0.5, lr=0.1, betas=(0.9,0.999)
        p = nm.Tensor(np.array([1.0]), requires_grad=True)
        opt = nm.AdamW({"p": p}, self._constant_sched(0.1), weight_decay=0.0)
        p.grad = np.array([0.5])
        opt.step()
        assert p.data[0] == pytest.approx(0.90000000199999996, abs=1e-15)

    def test_decoupled_decay_shrinks(self):
        p = nm.Tensor(np.array([2.0]), requires_grad=True)
        opt = nm.AdamW({"p": p}, self._constant_sched(0.1), weight_decay=0.01)
        p.grad = np.array([0.0])
        opt.step()
        assert p.data[0] == pytest.approx(2.0 - 0.1 * 0.01 * 2.0, abs=1e-15)

    def test_skips_params_without_grad(self):
        p = nm.Tensor(np.array([1.0]), requires_grad=True)
        q = nm.Tensor(np.array([1.0]), requires_grad=True)
        opt = nm.AdamW({"p": p, "q": q}, self._constant_sched(0.1))
        p.grad = np.array([1.0])
        opt.step()
        assert q.data[0] == 1.0 and p.data[0] != 1.0

    def test_state_roundtrip(self):
        p = nm.Tensor(np.array([1.0, 2.0]), requires_grad=True)
        opt = nm.AdamW({"p": p}, self._constant_sched(0.1))
        p.grad = np.array([0.3, -0.2])
        opt.step()
        arrays = opt.state_arrays()
        opt2 = nm.AdamW({"p": nm.Tensor(p.data.copy(), requires_grad=True)},
                        self._constant_sched(0.1))
        opt2.load_state_arrays(arrays)
        assert opt2.t == 1
        np.testing.assert_array_equal(opt2.moments["p"][0], opt.moments["p"][0])


class TestLrSchedule:
    def test_zero_at_step_zero(self):
        s = nm.LrSchedule(1e-3, warmup_steps=10, total_steps=100)
        assert nm.lr_at(0, s) == 0.0

    def test_base_at_warmup_end(self):
        s = nm.LrSchedule(1e-3, warmup_steps=10, total_steps=100)
        assert nm.lr_at(10, s) == pytest.approx(1e-3)

    def test_half_at_cosine_midpoint(self):
        s = nm.LrSchedule(2e-3, warmup_steps=10, total_steps=110)
        assert nm.lr_at(60, s) == pytest.approx(1e-3)

    def test_clamped_past_total(self):
        s = nm.LrSchedule(1e-3, warmup_steps=10, total_steps=100)
        assert nm.lr_at(1000, s) == pytest.approx(nm.lr_at(100, s))
        assert nm.lr_at(100, s) == pytest.approx(0.0, abs=1e-18)

    def test_linear_warmup_shape(self):
        s = nm.LrSchedule(1.0, warmup_steps=4, total_steps=8)
        assert [nm.lr_at(i, s) for i in range(5)] == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])


class TestCheckpoint:
    def test_bit_exact_roundtrip(self, tmp_path):
        arrays = {
            "emb": RNG.normal(size=(5, 3)),
            "w": RNG.normal(size=(3, 3)).astype(np.float32),
            "step": np.array([17], dtype=np.int64),
        }
        path = tmp_path / "model.ckpt"
        nm.save_checkpoint(path, arrays, meta={"kind": "test", "dim": 3})
        loaded, meta = nm.load_checkpoint(path)
        assert meta == {"kind": "test", "dim": 3}
        assert set(loaded) == set(arrays)
        for k in arrays:
            assert loaded[k].dtype == arrays[k].dtype
            assert np.array_equal(loaded[k], arrays[k])

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 32)
        with pytest.raises(ValueError):
            nm.load_checkpoint(path)
