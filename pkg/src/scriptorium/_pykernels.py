"""Pure-numpy versions of the convolution and pooling kernels.

Same signatures and semantics as the compiled module: float64 NCHW arrays,
valid padding, square kernels, 2x2/stride-2 max pooling with the first
maximum (row-major within the window) taking the gradient.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x, k, stride):
    # (N, C, Ho, Wo, k, k) view
    return sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d_forward(x, w, b, stride):
    cols = _windows(x, w.shape[2], stride)
    out = np.einsum("ncijuv,fcuv->nfij", cols, w, optimize=True)
    out += b[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward(dout, x, w, stride, need_dx=True):
    k = w.shape[2]
    cols = _windows(x, k, stride)
    db = dout.sum(axis=(0, 2, 3))
    dw = np.einsum("nfij,ncijuv->fcuv", dout, cols, optimize=True)
    if not need_dx:
        return None, np.ascontiguousarray(dw), db
    dx = np.zeros_like(x)
    ho, wo = dout.shape[2], dout.shape[3]
    # scatter one kernel offset at a time
    contrib = np.einsum("nfij,fcuv->ncuvij", dout, w, optimize=True)
    for u in range(k):
        for v in range(k):
            dx[:, :, u:u + stride * (ho - 1) + 1:stride, v:v + stride * (wo - 1) + 1:stride] += contrib[:, :, u, v]
    return dx, np.ascontiguousarray(dw), db


def maxpool2_forward(x):
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    blocks = x[:, :, : 2 * ho, : 2 * wo].reshape(n, c, ho, 2, wo, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
    idx = blocks.argmax(axis=-1).astype(np.int8)
    out = np.take_along_axis(blocks, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2_backward(dout, idx, x_shape):
    n, c, h, w = x_shape
    ho, wo = dout.shape[2], dout.shape[3]
    blocks = np.zeros((n, c, ho, wo, 4))
    np.put_along_axis(blocks, idx[..., None].astype(np.intp), dout[..., None], axis=-1)
    blocks = blocks.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(x_shape)
    dx[:, :, : 2 * ho, : 2 * wo] = blocks.reshape(n, c, 2 * ho, 2 * wo)
    return dx
