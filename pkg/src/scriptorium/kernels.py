"""Backend selection for the hot convolution/pooling kernels.

``SCRIPTORIUM_BACKEND`` picks the implementation:

* ``auto`` (default): per call, the compiled loops for pooling and for
  single-channel convolutions, the BLAS-backed numpy path for multi-channel
  convolutions, which is where BLAS wins. Pure numpy if the extension is
  missing.
* ``cython``: compiled loops everywhere; fails loudly if not built.
* ``python``: numpy everywhere.
"""
import os

import numpy as np

from . import _pykernels


class _Mixed:
    """Routes each call to whichever backend is faster for its shape."""

    def __init__(self, compiled):
        self._c = compiled

    def _conv(self, x):
        return self._c if x.shape[1] == 1 else _pykernels

    def conv2d_forward(self, x, w, b, stride):
        return self._conv(x).conv2d_forward(x, w, b, stride)

    def conv2d_backward(self, dout, x, w, stride, need_dx=True):
        return self._conv(x).conv2d_backward(dout, x, w, stride, need_dx)

    def maxpool2_forward(self, x):
        return self._c.maxpool2_forward(x)

    def maxpool2_backward(self, dout, idx, x_shape):
        return self._c.maxpool2_backward(dout, idx, x_shape)


_requested = os.environ.get("SCRIPTORIUM_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "python"):
    raise ImportError(f"SCRIPTORIUM_BACKEND must be auto, cython or python, not {_requested!r}")

if _requested == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _pykernels
        BACKEND = "python"
    else:
        _impl = _ckernels if _requested == "cython" else _Mixed(_ckernels)
        BACKEND = "cython" if _requested == "cython" else "auto"


def get_backend(name=None):
    """Kernel implementation for ``name`` ('auto', 'cython', 'python'), or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name in ("cython", "auto"):
        from . import _ckernels
        return _ckernels if name == "cython" else _Mixed(_ckernels)
    raise ValueError(f"unknown backend {name!r}")


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d_forward(x, w, b, stride=1, backend=None):
    impl = backend or _impl
    return impl.conv2d_forward(_f64(x), _f64(w), _f64(b), int(stride))


def conv2d_backward(dout, x, w, stride=1, backend=None, need_dx=True):
    """Returns ``(dx, dw, db)``; ``dx`` is None when ``need_dx`` is false."""
    impl = backend or _impl
    return impl.conv2d_backward(_f64(dout), _f64(x), _f64(w), int(stride), bool(need_dx))


def maxpool2_forward(x, backend=None):
    impl = backend or _impl
    return impl.maxpool2_forward(_f64(x))


def maxpool2_backward(dout, idx, x_shape, backend=None):
    impl = backend or _impl
    return impl.maxpool2_backward(_f64(dout), np.ascontiguousarray(idx, dtype=np.int8), tuple(x_shape))
