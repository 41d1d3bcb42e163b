# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the batched derivative bundle.

Same contract and recurrences as ``_kernels_py``; matrix products go through
BLAS dgemm, tanh is evaluated by NumPy's vectorized ufunc on the contiguous
value channel, and the per-channel derivative updates are fused C loops over
contiguous slices.
"""

import numpy as np

from scipy.linalg.cython_blas cimport dgemm

BACKEND_NAME = "compiled"


cdef void _mm_nn(double* a, double* b, double* c, int m, int k, int n) noexcept nogil:
    # row-major C (m,n) = A (m,k) @ B (k,n)
    cdef char nt = b'N'
    cdef double one = 1.0, zero = 0.0
    dgemm(&nt, &nt, &n, &m, &k, &one, b, &n, a, &k, &zero, c, &n)


cdef void _mm_tn(double* a, double* b, double* c, int m, int p, int q) noexcept nogil:
    # row-major C (p,q) = A^T @ B with A (m,p), B (m,q)
    cdef char nt = b'N', tt = b'T'
    cdef double one = 1.0, zero = 0.0
    dgemm(&nt, &tt, &q, &p, &m, &one, b, &q, a, &p, &zero, c, &q)


cdef void _mm_nt(double* a, double* w, double* c, int m, int n_out, int n_in) noexcept nogil:
    # row-major C (m,n_in) = A (m,n_out) @ W^T with W (n_in,n_out)
    cdef char nt = b'N', tt = b'T'
    cdef double one = 1.0, zero = 0.0
    dgemm(&tt, &nt, &n_in, &m, &n_out, &one, w, &n_out, a, &n_out, &zero, c, &n_in)


cdef void _add_bias(double* z, double* b, Py_ssize_t n, Py_ssize_t w) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(w):
            z[i * w + j] += b[j]


cdef void _fw_value(double* t, double* a1, double* a2, double* out,
                    Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i
    cdef double tv, a1v
    for i in range(m):
        tv = t[i]
        a1v = 1.0 - tv * tv
        a1[i] = a1v
        a2[i] = -2.0 * tv * a1v
        out[i] = tv


cdef void _fw_first(double* pre, double* a1, double* out, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(m):
        out[i] = a1[i] * pre[i]


cdef void _fw_second(double* pre_s, double* pre_u, double* a1, double* a2,
                     double* out, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i
    cdef double uv
    for i in range(m):
        uv = pre_u[i]
        out[i] = a1[i] * pre_s[i] + a2[i] * uv * uv


cdef void _bw_a3(double* t, double* a1, double* a3, Py_ssize_t m) noexcept nogil:
    # a3 = d(a2)/dz = 2 a1 (2 t^2 - a1)
    cdef Py_ssize_t i
    cdef double tv, a1v
    for i in range(m):
        tv = t[i]
        a1v = a1[i]
        a3[i] = 2.0 * a1v * (2.0 * tv * tv - a1v)


cdef void _bw_value(double* g0, double* a1, double* gz, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(m):
        gz[i] = g0[i] * a1[i]


cdef void _bw_first(double* g1, double* pre1, double* a1, double* a2,
                    double* gz, double* gpre1, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i
    cdef double gv
    for i in range(m):
        gv = g1[i]
        gz[i] += gv * pre1[i] * a2[i]
        gpre1[i] = gv * a1[i]


cdef void _bw_second(double* gv_arr, double* pre_s, double* pre_u, double* a1,
                     double* a2, double* a3, double* gz, double* gpre_u,
                     double* gpre_s, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i
    cdef double gv, uv
    for i in range(m):
        gv = gv_arr[i]
        uv = pre_u[i]
        gz[i] += gv * (pre_s[i] * a2[i] + uv * uv * a3[i])
        gpre_u[i] += 2.0 * a2[i] * uv * gv
        gpre_s[i] = gv * a1[i]


cdef void _col_sum(double* g, double* out, Py_ssize_t n, Py_ssize_t w) noexcept nogil:
    cdef Py_ssize_t i, j
    for j in range(w):
        out[j] = 0.0
    for i in range(n):
        for j in range(w):
            out[j] += g[i * w + j]


def bundle_forward(list weights, list biases, double[:, ::1] x, work):
    """See ``_kernels_py.bundle_forward``; identical contract."""
    cdef Py_ssize_t c = work.channels
    cdef Py_ssize_t n = work.n_points
    cdef Py_ssize_t nf = len(work.first_coords)
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t l, i, j, ch, fi, n_in, n_out, m
    cdef double[:, :, ::1] s_in, s_pre, s_out
    cdef double[:, ::1] wmat, t, a1, a2
    cdef double[::1] bvec
    l2f = work.second_to_first

    s_in = work.s_post[0]
    for i in range(n):
        for j in range(x.shape[1]):
            s_in[0, i, j] = x[i, j]

    for l in range(n_layers):
        wmat = weights[l]
        bvec = biases[l]
        n_in = wmat.shape[0]
        n_out = wmat.shape[1]
        s_in = work.s_post[l]
        s_pre = work.s_pre[l]
        s_out = work.s_post[l + 1]
        m = n * n_out
        with nogil:
            _mm_nn(&s_in[0, 0, 0], &wmat[0, 0], &s_pre[0, 0, 0],
                   <int> (c * n), <int> n_in, <int> n_out)
            _add_bias(&s_pre[0, 0, 0], &bvec[0], n, n_out)
        if l < n_layers - 1:
            np.tanh(work.s_pre[l][0], out=work.t_cache[l])
            t = work.t_cache[l]
            a1 = work.a1[l]
            a2 = work.a2[l]
            with nogil:
                _fw_value(&t[0, 0], &a1[0, 0], &a2[0, 0], &s_out[0, 0, 0], m)
            for i in range(nf):
                with nogil:
                    _fw_first(&s_pre[1 + i, 0, 0], &a1[0, 0],
                              &s_out[1 + i, 0, 0], m)
            for j in range(c - 1 - nf):
                ch = 1 + nf + j
                fi = l2f[j]
                with nogil:
                    _fw_second(&s_pre[ch, 0, 0], &s_pre[fi, 0, 0], &a1[0, 0],
                               &a2[0, 0], &s_out[ch, 0, 0], m)
        else:
            s_out[...] = s_pre

    top = np.asarray(work.s_post[n_layers])
    u = top[0, :, 0].copy()
    du = top[1 : 1 + nf, :, 0].T.copy()
    d2u = top[1 + nf :, :, 0].T.copy()
    return u, du, d2u


def bundle_backprop(list weights, list biases, double[:, ::1] cotangent, work):
    """See ``_kernels_py.bundle_backprop``; identical contract."""
    cdef Py_ssize_t c = work.channels
    cdef Py_ssize_t n = work.n_points
    cdef Py_ssize_t nf = len(work.first_coords)
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t l, i, j, ch, fi, n_in, n_out, m
    cdef double[:, :, ::1] g_out, g_pre, s_in_v, s_pre_v
    cdef double[:, ::1] wmat, gw_v, t, a1, a2, a3
    cdef double[::1] gb_v
    l2f = work.second_to_first

    g_out = work.g_post[n_layers - 1]
    for ch in range(c):
        for i in range(n):
            g_out[ch, i, 0] = cotangent[i, ch]

    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        wmat = weights[l]
        n_in = wmat.shape[0]
        n_out = wmat.shape[1]
        g_out = work.g_post[l]
        g_pre = work.g_pre[l]
        m = n * n_out
        if l < n_layers - 1:
            s_pre_v = work.s_pre[l]
            t = work.t_cache[l]
            a1 = work.a1[l]
            a2 = work.a2[l]
            a3 = work.a3[l]
            with nogil:
                _bw_a3(&t[0, 0], &a1[0, 0], &a3[0, 0], m)
                _bw_value(&g_out[0, 0, 0], &a1[0, 0], &g_pre[0, 0, 0], m)
            for i in range(nf):
                with nogil:
                    _bw_first(&g_out[1 + i, 0, 0], &s_pre_v[1 + i, 0, 0],
                              &a1[0, 0], &a2[0, 0], &g_pre[0, 0, 0],
                              &g_pre[1 + i, 0, 0], m)
            for j in range(c - 1 - nf):
                ch = 1 + nf + j
                fi = l2f[j]
                with nogil:
                    _bw_second(&g_out[ch, 0, 0], &s_pre_v[ch, 0, 0],
                               &s_pre_v[fi, 0, 0], &a1[0, 0], &a2[0, 0],
                               &a3[0, 0], &g_pre[0, 0, 0], &g_pre[fi, 0, 0],
                               &g_pre[ch, 0, 0], m)
        else:
            g_pre[...] = g_out
        gw = np.empty((n_in, n_out))
        gb = np.empty(n_out)
        gw_v = gw
        gb_v = gb
        s_in_v = work.s_post[l]
        with nogil:
            _mm_tn(&s_in_v[0, 0, 0], &g_pre[0, 0, 0], &gw_v[0, 0],
                   <int> (c * n), <int> n_in, <int> n_out)
            _col_sum(&g_pre[0, 0, 0], &gb_v[0], n, n_out)
        grad_w[l] = gw
        grad_b[l] = gb
        if l > 0:
            g_out = work.g_post[l - 1]
            with nogil:
                _mm_nt(&g_pre[0, 0, 0], &wmat[0, 0], &g_out[0, 0, 0],
                       <int> (c * n), <int> n_out, <int> n_in)
    return grad_w, grad_b
