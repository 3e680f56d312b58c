# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution and pooling kernels (float64, NCHW, valid padding)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef void _conv_fwd_s1(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w,
                       const double[::1] b, double[:, :, :, ::1] out, double *buf) noexcept nogil:
    # Full-width trick: out[i, j] lives at buf[i * wd + j]; every (c, u, v) term is then
    # one contiguous axpy of length (ho - 1) * wd + wo. Columns j >= wo are discarded.
    cdef Py_ssize_t n_batch = x.shape[0], cin = x.shape[1], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t ho = out.shape[2], wo = out.shape[3]
    cdef Py_ssize_t span = (ho - 1) * wd + wo
    cdef Py_ssize_t n, f, c, u, v, i, j, t
    cdef double wv
    cdef const double *xp
    for n in range(n_batch):
        for f in range(cout):
            for t in range(span):
                buf[t] = 0.0
            for c in range(cin):
                for u in range(k):
                    for v in range(k):
                        wv = w[f, c, u, v]
                        xp = &x[n, c, 0, 0] + u * wd + v
                        for t in range(span):
                            buf[t] += wv * xp[t]
            for i in range(ho):
                for j in range(wo):
                    out[n, f, i, j] = buf[i * wd + j] + b[f]


def conv2d_forward(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w,
                   const double[::1] b, Py_ssize_t stride):
    cdef Py_ssize_t n_batch = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t ho = (h - k) // stride + 1, wo = (wd - k) // stride + 1
    out_arr = np.empty((n_batch, cout, ho, wo), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef double[::1] buf
    cdef Py_ssize_t n, f, c, i, j, u, v
    cdef double wv
    cdef double *orow
    cdef const double *xrow
    if stride == 1:
        buf = np.empty(ho * wd, dtype=np.float64)
        with nogil:
            _conv_fwd_s1(x, w, b, out, &buf[0])
        return out_arr
    with nogil:
        for n in range(n_batch):
            for f in range(cout):
                for i in range(ho):
                    for j in range(wo):
                        out[n, f, i, j] = b[f]
                for c in range(cin):
                    for u in range(k):
                        for v in range(k):
                            wv = w[f, c, u, v]
                            for i in range(ho):
                                orow = &out[n, f, i, 0]
                                xrow = &x[n, c, i * stride + u, v]
                                for j in range(wo):
                                    orow[j] += wv * xrow[j * stride]
    return out_arr


cdef void _conv_bwd_s1(const double[:, :, :, ::1] dout, const double[:, :, :, ::1] x,
                       const double[:, :, :, ::1] w, double[:, :, :, ::1] dx,
                       double[:, :, :, ::1] dw, double[::1] db, bint need_dx,
                       double *gbuf) noexcept nogil:
    cdef Py_ssize_t n_batch = x.shape[0], cin = x.shape[1], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t ho = dout.shape[2], wo = dout.shape[3]
    cdef Py_ssize_t span = (ho - 1) * wd + wo
    cdef Py_ssize_t n, f, c, u, v, i, j, t
    cdef double wv, acc
    cdef const double *xp
    cdef double *dxp
    for n in range(n_batch):
        for f in range(cout):
            acc = 0.0
            for t in range(span):
                gbuf[t] = 0.0
            for i in range(ho):
                for j in range(wo):
                    gbuf[i * wd + j] = dout[n, f, i, j]
                    acc += dout[n, f, i, j]
            db[f] += acc
            for c in range(cin):
                for u in range(k):
                    for v in range(k):
                        xp = &x[n, c, 0, 0] + u * wd + v
                        acc = 0.0
                        for t in range(span):
                            acc += gbuf[t] * xp[t]
                        dw[f, c, u, v] += acc
                        if need_dx:
                            wv = w[f, c, u, v]
                            dxp = &dx[n, c, 0, 0] + u * wd + v
                            for t in range(span):
                                dxp[t] += gbuf[t] * wv


def conv2d_backward(const double[:, :, :, ::1] dout, const double[:, :, :, ::1] x,
                    const double[:, :, :, ::1] w, Py_ssize_t stride, bint need_dx=True):
    cdef Py_ssize_t n_batch = x.shape[0], cin = x.shape[1], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t ho = dout.shape[2], wo = dout.shape[3]
    if need_dx:
        dx_arr = np.zeros((x.shape[0], x.shape[1], x.shape[2], x.shape[3]), dtype=np.float64)
    else:
        dx_arr = np.zeros((1, 1, 1, 1), dtype=np.float64)
    dw_arr = np.zeros((w.shape[0], w.shape[1], w.shape[2], w.shape[3]), dtype=np.float64)
    db_arr = np.zeros(cout, dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef double[::1] gbuf
    cdef Py_ssize_t n, f, c, i, j, u, v
    cdef double wv, acc
    cdef const double *grow
    cdef const double *xrow
    cdef double *dxrow
    if stride == 1:
        gbuf = np.empty(ho * wd, dtype=np.float64)
        with nogil:
            _conv_bwd_s1(dout, x, w, dx, dw, db, need_dx, &gbuf[0])
        return (dx_arr if need_dx else None), dw_arr, db_arr
    with nogil:
        for n in range(n_batch):
            for f in range(cout):
                acc = 0.0
                for i in range(ho):
                    for j in range(wo):
                        acc += dout[n, f, i, j]
                db[f] += acc
                for c in range(cin):
                    for u in range(k):
                        for v in range(k):
                            wv = w[f, c, u, v]
                            acc = 0.0
                            for i in range(ho):
                                grow = &dout[n, f, i, 0]
                                xrow = &x[n, c, i * stride + u, v]
                                for j in range(wo):
                                    acc += grow[j] * xrow[j * stride]
                                if need_dx:
                                    dxrow = &dx[n, c, i * stride + u, v]
                                    for j in range(wo):
                                        dxrow[j * stride] += grow[j] * wv
                            dw[f, c, u, v] += acc
    return (dx_arr if need_dx else None), dw_arr, db_arr


def maxpool2_forward(const double[:, :, :, ::1] x):
    cdef Py_ssize_t n_batch = x.shape[0], ch = x.shape[1]
    cdef Py_ssize_t ho = x.shape[2] // 2, wo = x.shape[3] // 2
    out_arr = np.empty((n_batch, ch, ho, wo), dtype=np.float64)
    idx_arr = np.empty((n_batch, ch, ho, wo), dtype=np.int8)
    cdef double[:, :, :, ::1] out = out_arr
    cdef signed char[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t n, c, i, j
    cdef double best, val
    cdef signed char arg
    with nogil:
        for n in range(n_batch):
            for c in range(ch):
                for i in range(ho):
                    for j in range(wo):
                        # first maximum in row-major window order wins
                        best = x[n, c, 2 * i, 2 * j]
                        arg = 0
                        val = x[n, c, 2 * i, 2 * j + 1]
                        if val > best:
                            best = val
                            arg = 1
                        val = x[n, c, 2 * i + 1, 2 * j]
                        if val > best:
                            best = val
                            arg = 2
                        val = x[n, c, 2 * i + 1, 2 * j + 1]
                        if val > best:
                            best = val
                            arg = 3
                        out[n, c, i, j] = best
                        idx[n, c, i, j] = arg
    return out_arr, idx_arr


def maxpool2_backward(const double[:, :, :, ::1] dout, const signed char[:, :, :, ::1] idx,
                      tuple x_shape):
    dx_arr = np.zeros(x_shape, dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t n_batch = dout.shape[0], ch = dout.shape[1]
    cdef Py_ssize_t ho = dout.shape[2], wo = dout.shape[3]
    cdef Py_ssize_t n, c, i, j
    cdef signed char a
    with nogil:
        for n in range(n_batch):
            for c in range(ch):
                for i in range(ho):
                    for j in range(wo):
                        a = idx[n, c, i, j]
                        dx[n, c, 2 * i + a // 2, 2 * j + a % 2] = dout[n, c, i, j]
    return dx_arr
