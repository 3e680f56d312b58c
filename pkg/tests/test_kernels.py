import numpy as np
import pytest

from scriptorium import kernels


def conv_oracle(x, w, b, s):
    n, c, h, wd = x.shape
    f, _, k, _ = w.shape
    ho, wo = (h - k) // s + 1, (wd - k) // s + 1
    out = np.zeros((n, f, ho, wo))
    for a in range(n):
        for o in range(f):
            for i in range(ho):
                for j in range(wo):
                    out[a, o, i, j] = np.sum(x[a, :, i * s:i * s + k, j * s:j * s + k] * w[o]) + b[o]
    return out


def pool_oracle(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2))
    for i in range(h // 2):
        for j in range(w // 2):
            out[:, :, i, j] = x[:, :, 2 * i:2 * i + 2, 2 * j:2 * j + 2].max(axis=(2, 3))
    return out


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_forward_matches_oracle(backend, rng, stride):
    x = rng.normal(size=(2, 3, 9, 11))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    out = kernels.conv2d_forward(x, w, b, stride, backend=backend)
    assert np.allclose(out, conv_oracle(x, w, b, stride), atol=1e-12)


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_backward_is_adjoint(backend, rng, stride):
    # <dout, conv(x)> is linear in x and w: its gradients are exactly the backward outputs
    x = rng.normal(size=(2, 2, 8, 9))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    out = conv_oracle(x, w, b, stride)
    dout = rng.normal(size=out.shape)
    dx, dw, db = kernels.conv2d_backward(dout, x, w, stride, backend=backend)
    zero_b = np.zeros(3)
    e = rng.normal(size=x.shape)
    assert np.isclose(np.sum(dx * e), np.sum(dout * conv_oracle(e, w, zero_b, stride)))
    ew = rng.normal(size=w.shape)
    assert np.isclose(np.sum(dw * ew), np.sum(dout * conv_oracle(x, ew, zero_b, stride)))
    assert np.allclose(db, dout.sum(axis=(0, 2, 3)))


def test_maxpool(backend, rng):
    x = rng.normal(size=(2, 3, 7, 6))
    out, idx = kernels.maxpool2_forward(x, backend=backend)
    assert np.array_equal(out, pool_oracle(x))
    dout = rng.normal(size=out.shape)
    dx = kernels.maxpool2_backward(dout, idx, x.shape, backend=backend)
    assert dx.shape == x.shape
    assert np.isclose(dx.sum(), dout.sum())
    # gradient lands on the maxima
    mask = dx != 0
    assert np.array_equal(np.sort(x[mask]), np.sort(out[dout != 0]))


def test_maxpool_tie_goes_to_first(backend):
    x = np.ones((1, 1, 2, 2))
    _, idx = kernels.maxpool2_forward(x, backend=backend)
    assert idx[0, 0, 0, 0] == 0


def test_backends_agree(rng):
    if not _has_c():
        pytest.skip("compiled kernels not built")
    c, p = kernels.get_backend("cython"), kernels.get_backend("python")
    x = rng.normal(size=(4, 2, 12, 12))
    w = rng.normal(size=(5, 2, 3, 3))
    b = rng.normal(size=5)
    assert np.allclose(kernels.conv2d_forward(x, w, b, backend=c), kernels.conv2d_forward(x, w, b, backend=p))


def _has_c():
    try:
        kernels.get_backend("cython")
        return True
    except ImportError:
        return False


def test_auto_routes_by_channel_count(rng):
    if not _has_c():
        pytest.skip("compiled kernels not built")
    auto = kernels.get_backend("auto")
    w1, w3 = rng.normal(size=(4, 1, 3, 3)), rng.normal(size=(4, 3, 3, 3))
    assert auto._conv(np.zeros((1, 1, 8, 8))) is kernels.get_backend("cython")
    assert auto._conv(np.zeros((1, 3, 8, 8))) is kernels.get_backend("python")
    for x, w in ((rng.normal(size=(2, 1, 9, 9)), w1), (rng.normal(size=(2, 3, 9, 9)), w3)):
        b = np.zeros(4)
        ref = kernels.conv2d_forward(x, w, b, backend=kernels.get_backend("python"))
        assert np.allclose(kernels.conv2d_forward(x, w, b, backend=auto), ref)
