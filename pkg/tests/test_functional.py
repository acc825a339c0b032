import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lisgan.nn import functional as F
from lisgan.nn.gradcheck import gradcheck
from lisgan.nn.tensor import Tensor


def naive_conv(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, o, ho, wo))
    for ni in range(n):
        for oi in range(o):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[ni, :, i * stride:i * stride + k, j * stride:j * stride + k]
                    out[ni, oi, i, j] = (patch * w[oi]).sum() + b[oi]
    return out


def naive_deconv(x, w, b, stride, pad):
    # scatter each input pixel times the kernel, then crop the padding
    n, c, h, wd = x.shape
    _, o, k, _ = w.shape
    full = np.zeros((n, o, (h - 1) * stride + k, (wd - 1) * stride + k))
    for ni in range(n):
        for ci in range(c):
            for i in range(h):
                for j in range(wd):
                    full[ni, :, i * stride:i * stride + k, j * stride:j * stride + k] += x[ni, ci, i, j] * w[ci]
    ho = (h - 1) * stride - 2 * pad + k
    wo = (wd - 1) * stride - 2 * pad + k
    return full[:, :, pad:pad + ho, pad:pad + wo] + b.reshape(1, -1, 1, 1)


conv_params = st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(1, 3),
                        st.integers(0, 2), st.integers(4, 7), st.integers(0, 10_000))


@given(conv_params)
def test_conv2d_matches_loop_oracle(p):
    c, o, k, stride, pad, size, seed = p
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, c, size, size))
    w = rng.normal(size=(o, c, k, k))
    b = rng.normal(size=o)
    got = F.conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), Tensor(b, dtype=np.float64),
                   stride, pad)
    np.testing.assert_allclose(got.data, naive_conv(x, w, b, stride, pad), atol=1e-10)


@given(conv_params)
def test_conv_transpose2d_matches_scatter_oracle(p):
    c, o, k, stride, pad, size, seed = p
    pad = min(pad, (k - 1) // 2 + (size - 1) * stride // 2)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, c, size, size))
    w = rng.normal(size=(c, o, k, k))
    b = rng.normal(size=o)
    got = F.conv_transpose2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64),
                             Tensor(b, dtype=np.float64), stride, pad)
    np.testing.assert_allclose(got.data, naive_deconv(x, w, b, stride, pad), atol=1e-10)


def test_deconv_k4_s2_p1_doubles_resolution():
    out = F.conv_transpose2d(Tensor(np.ones((1, 2, 5, 5))), Tensor(np.ones((2, 3, 4, 4))), stride=2, pad=1)
    assert out.shape == (1, 3, 10, 10)


def test_deconv_is_adjoint_of_conv():
    # <conv(x), y> == <x, deconv(y)> for the same kernel, stride and padding
    rng = np.random.default_rng(0)
    w = rng.normal(size=(3, 2, 4, 4))
    x = rng.normal(size=(1, 2, 8, 8))
    y = rng.normal(size=(1, 3, 4, 4))
    cx = F.conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), stride=2, pad=1).data
    dy = F.conv_transpose2d(Tensor(y, dtype=np.float64), Tensor(w, dtype=np.float64), stride=2, pad=1).data
    assert np.isclose((cx * y).sum(), (x * dy).sum())


@given(st.integers(0, 1), st.integers(0, 10_000))
def test_weight_norm_rows_have_norm_g(axis, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(3, 4, 2, 2))
    g = rng.uniform(0.1, 3.0, size=v.shape[axis])
    w = F.weight_norm(Tensor(v, dtype=np.float64), Tensor(g, dtype=np.float64), axis).data
    axes = tuple(i for i in range(4) if i != axis)
    np.testing.assert_allclose(np.sqrt((w ** 2).sum(axis=axes)), g, rtol=1e-12)


def test_weight_norm_is_scale_invariant_in_v():
    rng = np.random.default_rng(3)
    v = rng.normal(size=(4, 5))
    g = Tensor(rng.uniform(0.5, 1.5, 4), dtype=np.float64)
    a = F.weight_norm(Tensor(v, dtype=np.float64), g, 0).data
    b = F.weight_norm(Tensor(7.5 * v, dtype=np.float64), g, 0).data
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_weight_norm_gradient():
    rng = np.random.default_rng(4)
    v = Tensor(rng.normal(size=(3, 2, 3, 3)), dtype=np.float64)
    g = Tensor(rng.uniform(0.5, 1.5, 2), dtype=np.float64)
    probe = rng.normal(size=v.shape)
    assert gradcheck(lambda ins: (F.weight_norm(ins[0], ins[1], 1) * probe).sum(), [v, g], eps=1e-6, rtol=1e-6)


def test_tprelu_values():
    x = Tensor(np.array([[-2.0, 0.0, 3.0], [1.0, 1.0, 1.0]]).reshape(2, 3), dtype=np.float64)
    a = Tensor(np.array([0.25, 0.5, 0.0]), dtype=np.float64)
    t = Tensor(np.array([0.0, 1.0, -1.0]), dtype=np.float64)
    y = F.tprelu(x, a, t).data
    # channel 0: t=0, slope 0.25; channel 1: t=1, slope 0.5; channel 2: t=-1, slope 0
    np.testing.assert_allclose(y, [[-0.5, 0.5, 3.0], [1.0, 1.0, 1.0]])


@given(st.floats(-5, 5), st.floats(-2, 2), st.floats(-2, 2))
def test_tprelu_is_identity_above_threshold_and_continuous(x, a, t):
    y = F.tprelu(Tensor(np.array([[x]]), dtype=np.float64), Tensor(np.array([a]), dtype=np.float64),
                 Tensor(np.array([t]), dtype=np.float64)).data[0, 0]
    expected = x if x > t else t + a * (x - t)
    assert y == pytest.approx(expected, abs=1e-12)


def test_spatial_dropout_inference_is_identity_and_training_masks_whole_channels():
    x = Tensor(np.ones((50, 8, 3, 3)))
    assert F.spatial_dropout(x, 0.5, training=False) is x
    y = F.spatial_dropout(x, 0.5, training=True, rng=np.random.default_rng(0)).data
    per_channel = y.reshape(50, 8, -1)
    assert (per_channel.min(axis=2) == per_channel.max(axis=2)).all()
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.1


def test_spatial_dropout_rejects_bad_rates_and_missing_rng():
    x = Tensor(np.ones((2, 2)))
    with pytest.raises(ValueError):
        F.spatial_dropout(x, 1.0, training=True, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        F.spatial_dropout(x, 0.2, training=True)
