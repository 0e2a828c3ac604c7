# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: monotone-chain hull and batched half-plane margins."""
import numpy as np
cimport numpy as cnp
from libc.math cimport hypot, INFINITY

cnp.import_array()


cdef Py_ssize_t _chain(const double[:] xs, const double[:] ys, Py_ssize_t[:] order,
                       Py_ssize_t[:] out, double tol) noexcept nogil:
    cdef Py_ssize_t k = 0, j, i, o, a
    cdef double ax, ay, bx, by, cross
    for j in range(order.shape[0]):
        i = order[j]
        while k >= 2:
            o = out[k - 2]
            a = out[k - 1]
            ax = xs[a] - xs[o]
            ay = ys[a] - ys[o]
            bx = xs[i] - xs[o]
            by = ys[i] - ys[o]
            cross = ax * by - ay * bx
            if cross > tol * hypot(ax, ay) * hypot(bx, by):
                break
            k -= 1
        if k > 0 and xs[out[k - 1]] == xs[i] and ys[out[k - 1]] == ys[i]:
            continue
        out[k] = i
        k += 1
    return k


def monotone_chain(xs_in, ys_in, double tol):
    cdef const double[:] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef const double[:] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    if n < 3:
        if n == 2 and xs[0] == xs[1] and ys[0] == ys[1]:
            return np.array([0], dtype=np.int64)
        return np.arange(n, dtype=np.int64)
    fwd = np.arange(n, dtype=np.intp)
    bwd = fwd[::-1].copy()
    lower = np.empty(n, dtype=np.intp)
    upper = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t nl, nu
    cdef Py_ssize_t[:] fv = fwd, bv = bwd, lv = lower, uv = upper
    with nogil:
        nl = _chain(xs, ys, fv, lv, tol)
        nu = _chain(xs, ys, bv, uv, tol)
    hull = np.concatenate([lower[:nl - 1], upper[:nu - 1]])
    if hull.size == 0:
        hull = lower[:1]
    return hull.astype(np.int64)


def halfplane_margin(px_in, py_in, nx_in, ny_in, off_in):
    cdef const double[:] px = np.ascontiguousarray(px_in, dtype=np.float64)
    cdef const double[:] py = np.ascontiguousarray(py_in, dtype=np.float64)
    cdef const double[:] nx = np.ascontiguousarray(nx_in, dtype=np.float64)
    cdef const double[:] ny = np.ascontiguousarray(ny_in, dtype=np.float64)
    cdef const double[:] off = np.ascontiguousarray(off_in, dtype=np.float64)
    cdef Py_ssize_t n = px.shape[0], m = nx.shape[0], i, k
    out = np.empty(n, dtype=np.float64)
    cdef double[:] ov = out
    cdef double best, v
    with nogil:
        for i in range(n):
            best = -INFINITY
            for k in range(m):
                v = nx[k] * px[i] + ny[k] * py[i] - off[k]
                if v > best:
                    best = v
            ov[i] = best
    return out.reshape(np.shape(px_in))
