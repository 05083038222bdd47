"""Forward-value tests for the tensor engine against independent oracles."""

import numpy as np
import pytest

from semidense import tensor as T
from semidense.tensor import Tensor


def conv2d_loops(x, w, b=None, stride=1, padding=1, groups=1):
    """Direct six-loop convolution reference."""
    n, c, h, wd = x.shape
    o, cg, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    y = np.zeros((n, o, oh, ow), dtype=np.float64)
    og = o // groups
    for ni in range(n):
        for oi in range(o):
            gi = oi // og
            for yy in range(oh):
                for xx in range(ow):
                    acc = 0.0
                    for ci in range(cg):
                        for i in range(kh):
                            for j in range(kw):
                                acc += (
                                    xp[ni, gi * cg + ci, yy * stride + i, xx * stride + j]
                                    * w[oi, ci, i, j]
                                )
                    y[ni, oi, yy, xx] = acc + (b[oi] if b is not None else 0.0)
    return y


class TestConv2d:
    def test_constant_field(self):
        x = Tensor(np.ones((1, 1, 5, 5), dtype=np.float64))
        w = Tensor(np.ones((1, 1, 3, 3), dtype=np.float64))
        y = T.conv2d(x, w, padding=0)
        assert np.allclose(y.data, 9.0)

    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(2, 3, 6, 7)))
        w = np.zeros((3, 3, 3, 3))
        for c in range(3):
            w[c, c, 1, 1] = 1.0
        y = T.conv2d(x, Tensor(w), stride=1, padding=1)
        np.testing.assert_allclose(y.data, x.data, atol=1e-12)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 2, 5, 5))
        w = rng.normal(size=(3, 2, 3, 3))
        y = T.conv2d(Tensor(x), Tensor(w), padding=0)
        ref = conv2d_loops(x, w, padding=0)
        np.testing.assert_allclose(y.data, ref, atol=1e-6)

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (2, 0)])
    def test_strides_and_padding(self, stride, padding):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 3, 7, 6))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        y = T.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding)
        ref = conv2d_loops(x, w, b, stride=stride, padding=padding)
        np.testing.assert_allclose(y.data, ref, atol=1e-9)

    def test_depthwise_equals_per_channel(self):
        rng = np.random.default_rng(3)
        c = 4
        x = rng.normal(size=(2, c, 6, 6))
        w = rng.normal(size=(c, 1, 3, 3))
        y = T.conv2d(Tensor(x), Tensor(w), padding=1, groups=c)
        ref = conv2d_loops(x, w, padding=1, groups=c)
        np.testing.assert_allclose(y.data, ref, atol=1e-9)
        # per-channel independent convolution oracle
        for ci in range(c):
            solo = conv2d_loops(x[:, ci : ci + 1], w[ci : ci + 1], padding=1)
            np.testing.assert_allclose(y.data[:, ci : ci + 1], solo, atol=1e-6)

    def test_grouped(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(1, 4, 5, 5))
        w = rng.normal(size=(6, 2, 3, 3))
        y = T.conv2d(Tensor(x), Tensor(w), padding=1, groups=2)
        ref = conv2d_loops(x, w, padding=1, groups=2)
        np.testing.assert_allclose(y.data, ref, atol=1e-9)

    def test_shape_errors(self):
        x = Tensor(np.zeros((1, 3, 4, 4)))
        with pytest.raises(ValueError, match="groups"):
            T.conv2d(x, Tensor(np.zeros((4, 3, 3, 3))), groups=2)
        with pytest.raises(ValueError, match="kernel"):
            T.conv2d(x, Tensor(np.zeros((4, 3, 7, 7))), padding=0)
        with pytest.raises(ValueError, match="input channels"):
            T.conv2d(x, Tensor(np.zeros((4, 2, 3, 3))))


class TestLinear:
    def test_identity(self):
        x = Tensor(np.arange(6, dtype=np.float64).reshape(2, 3))
        w = Tensor(np.eye(3))
        y = T.linear(x, w)
        np.testing.assert_allclose(y.data, x.data)

    def test_hand_sum(self):
        y = T.linear(Tensor(np.array([2.0, 3.0])), Tensor(np.array([[1.0, 1.0]])))
        np.testing.assert_allclose(y.data, [5.0])

    def test_matches_matmul_oracle(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(4, 3, 7))
        w = rng.normal(size=(5, 7))
        b = rng.normal(size=5)
        y = T.linear(Tensor(x), Tensor(w), Tensor(b))
        ref = np.einsum("bti,oi->bto", x, w) + b
        np.testing.assert_allclose(y.data, ref, atol=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="last dim"):
            T.linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))


class TestBatchNorm:
    def test_eval_identity_stats(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(2, 3, 4, 4))
        y = T.batchnorm2d(
            Tensor(x), np.zeros(3), np.ones(3),
            Tensor(np.ones(3)), Tensor(np.zeros(3)), training=False,
        )
        np.testing.assert_allclose(y.data, x, atol=1e-5)

    def test_training_constant_input_gives_beta(self):
        x = Tensor(np.full((2, 3, 4, 4), 7.0))
        beta = np.array([0.5, -1.0, 2.0])
        y = T.batchnorm2d(
            x, np.zeros(3), np.ones(3), Tensor(np.ones(3)), Tensor(beta), training=True,
        )
        for c in range(3):
            np.testing.assert_allclose(y.data[:, c], beta[c], atol=1e-6)

    def test_training_statistics(self):
        rng = np.random.default_rng(7)
        x = rng.normal(loc=3.0, scale=2.0, size=(4, 2, 8, 8))
        gamma = np.array([1.5, 0.5])
        beta = np.array([-1.0, 2.0])
        y = T.batchnorm2d(
            Tensor(x), np.zeros(2), np.ones(2), Tensor(gamma), Tensor(beta), training=True,
        )
        mean = y.data.mean(axis=(0, 2, 3))
        std = y.data.std(axis=(0, 2, 3))
        np.testing.assert_allclose(mean, beta, atol=1e-4)
        np.testing.assert_allclose(std, gamma, atol=1e-4)

    def test_running_stats_update(self):
        rng = np.random.default_rng(8)
        x = rng.normal(loc=1.0, size=(4, 2, 4, 4))
        rm, rv = np.zeros(2), np.ones(2)
        T.batchnorm2d(Tensor(x), rm, rv, Tensor(np.ones(2)), Tensor(np.zeros(2)), training=True, momentum=0.1)
        n = 4 * 4 * 4
        np.testing.assert_allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)), atol=1e-6)
        np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * n / (n - 1), atol=1e-6)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError, match="channels"):
            T.batchnorm2d(
                Tensor(np.zeros((1, 3, 2, 2))), np.zeros(2), np.ones(2),
                Tensor(np.ones(2)), Tensor(np.zeros(2)), training=False,
            )


class TestSoftmaxAndFriends:
    def test_symmetry(self):
        y = T.softmax(Tensor(np.array([0.0, 0.0])))
        np.testing.assert_allclose(y.data, [0.5, 0.5])

    def test_single_element(self):
        y = T.softmax(Tensor(np.array([3.7])))
        np.testing.assert_allclose(y.data, [1.0])

    def test_scalar_oracle(self):
        y = T.softmax(Tensor(np.array([2.0, 0.0])))
        np.testing.assert_allclose(y.data, [0.8808, 0.1192], atol=1e-4)

    def test_sums_and_shift_invariance(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(5, 7))
        y = T.softmax(Tensor(x), axis=1)
        np.testing.assert_allclose(y.data.sum(axis=1), 1.0, atol=1e-6)
        y2 = T.softmax(Tensor(x + 13.0), axis=1)
        np.testing.assert_allclose(y.data, y2.data, atol=1e-6)

    def test_rejects_non_finite(self):
        with pytest.raises(FloatingPointError):
            T.softmax(Tensor(np.array([np.inf, 0.0])))

    def test_sigmoid_zero(self):
        assert T.sigmoid(Tensor(np.array([0.0]))).data[0] == pytest.approx(0.5)

    def test_l2_normalize_triangle(self):
        y = T.l2_normalize(Tensor(np.array([3.0, 4.0])), axis=0)
        np.testing.assert_allclose(y.data, [0.6, 0.8], atol=1e-7)

    def test_l2_normalize_unit_norm(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(6, 8))
        y = T.l2_normalize(Tensor(x), axis=1)
        norms = np.linalg.norm(y.data, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-5)

    def test_l2_normalize_small_norm_scaling(self):
        eps = 0.1
        x = np.array([[0.001, 0.002]])
        y = T.l2_normalize(Tensor(x), axis=1, eps=eps)
        np.testing.assert_allclose(y.data, x / eps, atol=1e-9)


class TestUpsample:
    @staticmethod
    def upsample_oracle(x):
        """Independent half-pixel-center interpolation formula."""
        n, c, h, w = x.shape
        out = np.zeros((n, c, 2 * h, 2 * w), dtype=x.dtype)
        for oy in range(2 * h):
            sy = (oy + 0.5) / 2 - 0.5
            y0 = int(np.floor(sy))
            wy = sy - y0
            y0c, y1c = min(max(y0, 0), h - 1), min(max(y0 + 1, 0), h - 1)
            for ox in range(2 * w):
                sx = (ox + 0.5) / 2 - 0.5
                x0 = int(np.floor(sx))
                wx = sx - x0
                x0c, x1c = min(max(x0, 0), w - 1), min(max(x0 + 1, 0), w - 1)
                out[:, :, oy, ox] = (
                    x[:, :, y0c, x0c] * (1 - wy) * (1 - wx)
                    + x[:, :, y0c, x1c] * (1 - wy) * wx
                    + x[:, :, y1c, x0c] * wy * (1 - wx)
                    + x[:, :, y1c, x1c] * wy * wx
                )
        return out

    def test_2x2_case(self):
        x = np.arange(4, dtype=np.float64).reshape(1, 1, 2, 2)
        y = T.bilinear_upsample2x(Tensor(x))
        np.testing.assert_allclose(y.data, self.upsample_oracle(x), atol=1e-6)

    def test_random_against_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(2, 3, 5, 4))
        y = T.bilinear_upsample2x(Tensor(x))
        np.testing.assert_allclose(y.data, self.upsample_oracle(x), atol=1e-9)


class TestGatherAndShape:
    def test_gather_rows(self):
        x = Tensor(np.arange(12, dtype=np.float64).reshape(4, 3))
        y = T.gather_rows(x, [2, 0, 2])
        np.testing.assert_allclose(y.data, x.data[[2, 0, 2]])

    def test_gather_out_of_range(self):
        with pytest.raises(IndexError, match="4"):
            T.gather_rows(Tensor(np.zeros((3, 2))), [0, 4])

    def test_concat_and_slice(self):
        a = Tensor(np.ones((2, 3)))
        b = Tensor(np.zeros((2, 3)))
        c = T.concat([a, b], axis=0)
        assert c.shape == (4, 3)
        np.testing.assert_allclose(c.data[:2], 1.0)
        sl = c[2:4]
        np.testing.assert_allclose(sl.data, 0.0)

    def test_matmul_batched(self):
        rng = np.random.default_rng(12)
        a = rng.normal(size=(3, 4, 5))
        b = rng.normal(size=(3, 5, 2))
        y = T.matmul(Tensor(a), Tensor(b))
        np.testing.assert_allclose(y.data, a @ b, atol=1e-9)


class TestDeterminismAndParallel:
    def test_fixed_seed_bitwise(self):
        def run():
            rng = np.random.default_rng(42)
            x = Tensor(rng.normal(size=(2, 3, 8, 8)).astype(np.float32))
            w = Tensor(rng.normal(size=(4, 3, 3, 3)).astype(np.float32))
            y = T.conv2d(x, w, padding=1)
            return T.softmax(y.reshape(2, -1), axis=1).data

        a, b = run(), run()
        assert np.array_equal(a, b)

    def test_parallel_mode_agrees(self):
        rng = np.random.default_rng(13)
        x = Tensor(rng.normal(size=(4, 3, 16, 16)).astype(np.float32))
        w = Tensor(rng.normal(size=(8, 3, 3, 3)).astype(np.float32))
        base = T.conv2d(x, w, padding=1).data
        T.set_parallel(2)
        try:
            par = T.conv2d(x, w, padding=1).data
        finally:
            T.set_parallel(0)
        np.testing.assert_allclose(par, base, rtol=1e-5)
