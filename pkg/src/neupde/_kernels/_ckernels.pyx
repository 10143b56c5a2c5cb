# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled field kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

from ._pykernels import activation as _vec_activation

cnp.import_array()


cdef void _gemm(bint ta, bint tb, int M, int N, int K, double alpha,
                double* A, int lda, double* B, int ldb, double beta,
                double* C, int ldc) noexcept nogil:
    # row-major C[M, N] = alpha op(A) op(B) + beta C, via column-major BLAS
    cdef char ca = b'T' if ta else b'N'
    cdef char cb = b'T' if tb else b'N'
    dgemm(&cb, &ca, &N, &M, &K, &alpha, B, &ldb, A, &lda, &beta, C, &ldc)


cdef void _powers(const double[:, ::1] Z, Py_ssize_t b, int nv, int p, double* pw) noexcept nogil:
    cdef int i, e
    for i in range(nv):
        pw[i * (p + 1)] = 1.0
        for e in range(1, p + 1):
            pw[i * (p + 1) + e] = pw[i * (p + 1) + e - 1] * Z[b, i]


def _sparse_terms(E):
    """Per-term lists of (variable, exponent) pairs with nonzero exponent."""
    E = np.asarray(E, dtype=np.int64)
    n = E.shape[0]
    width = max(int((E > 0).sum(axis=1).max()) if n else 0, 1)
    idx = np.zeros((n, width), dtype=np.int64)
    pows = np.zeros((n, width), dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    for j in range(n):
        nz = np.flatnonzero(E[j])
        cnt[j] = nz.size
        idx[j, :nz.size] = nz
        pows[j, :nz.size] = E[j, nz]
    return idx, pows, cnt


cdef void _mono_row(const cnp.int64_t[:, ::1] idx, const cnp.int64_t[:, ::1] pows,
                    const cnp.int64_t[::1] cnt, int p, const double* pw, double* out) noexcept nogil:
    cdef Py_ssize_t j, n = idx.shape[0]
    cdef int q
    cdef double v
    for j in range(n):
        v = 1.0
        for q in range(cnt[j]):
            v *= pw[idx[j, q] * (p + 1) + pows[j, q]]
        out[j] = v


def monomials(Z, E):
    cdef const double[:, ::1] z = np.ascontiguousarray(Z, dtype=np.float64)
    idx_a, pows_a, cnt_a = _sparse_terms(E)
    cdef const cnp.int64_t[:, ::1] idx = idx_a
    cdef const cnp.int64_t[:, ::1] pows = pows_a
    cdef const cnp.int64_t[::1] cnt = cnt_a
    cdef Py_ssize_t B = z.shape[0], n = idx.shape[0]
    cdef int nv = z.shape[1], p = int(E.max()) if E.size else 0
    out = np.empty((B, n))
    cdef double[:, ::1] o = out
    cdef double[::1] pw = np.empty(nv * (p + 1))
    cdef Py_ssize_t b
    if n == 0:
        return out
    with nogil:
        for b in range(B):
            _powers(z, b, nv, p, &pw[0])
            _mono_row(idx, pows, cnt, p, &pw[0], &o[b, 0])
    return out


cdef void _vjp_row(const cnp.int64_t[:, ::1] idx, const cnp.int64_t[:, ::1] pows,
                   const cnp.int64_t[::1] cnt, int nv, int p, const double* pw,
                   const double* g, double* dz) noexcept nogil:
    cdef Py_ssize_t j, n = idx.shape[0]
    cdef int q, r, e
    cdef double gj, d
    for q in range(nv):
        dz[q] = 0.0
    for j in range(n):
        gj = g[j]
        if gj == 0.0:
            continue
        for q in range(cnt[j]):
            e = <int>pows[j, q]
            d = e * pw[idx[j, q] * (p + 1) + e - 1]
            for r in range(cnt[j]):
                if r != q:
                    d *= pw[idx[j, r] * (p + 1) + pows[j, r]]
            dz[idx[j, q]] += gj * d


def monomials_vjp(Z, E, G):
    cdef const double[:, ::1] z = np.ascontiguousarray(Z, dtype=np.float64)
    idx_a, pows_a, cnt_a = _sparse_terms(E)
    cdef const cnp.int64_t[:, ::1] idx = idx_a
    cdef const cnp.int64_t[:, ::1] pows = pows_a
    cdef const cnp.int64_t[::1] cnt = cnt_a
    cdef const double[:, ::1] g = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t B = z.shape[0], b
    cdef int nv = z.shape[1], p = int(E.max()) if E.size else 0
    out = np.zeros((B, nv))
    cdef double[:, ::1] o = out
    cdef double[::1] pw = np.empty(nv * (p + 1))
    if idx.shape[0] == 0 or nv == 0:
        return out
    with nogil:
        for b in range(B):
            _powers(z, b, nv, p, &pw[0])
            _vjp_row(idx, pows, cnt, nv, p, &pw[0], &g[b, 0], &o[b, 0])
    return out


def field_forward(Z, E, A1, b1, A2, b2, int act):
    Phi = monomials(Z, E)
    cdef double[:, ::1] phi = Phi
    cdef const double[:, ::1] a1 = np.ascontiguousarray(A1, dtype=np.float64)
    cdef const double[::1] c1 = np.ascontiguousarray(b1, dtype=np.float64)
    cdef const double[:, ::1] a2 = np.ascontiguousarray(A2, dtype=np.float64)
    cdef const double[::1] c2 = np.ascontiguousarray(b2, dtype=np.float64)
    cdef int B = phi.shape[0], n = phi.shape[1], h = a1.shape[0], o = a2.shape[0]
    pre = np.empty((B, h))
    out = np.empty((B, o))
    cdef double[:, ::1] pr = pre, ou = out, sv
    cdef Py_ssize_t b, k
    if B == 0:
        return Phi, pre, out
    with nogil:
        for b in range(B):
            for k in range(h):
                pr[b, k] = c1[k]
            for k in range(o):
                ou[b, k] = c2[k]
        _gemm(False, True, B, h, n, 1.0, <double*>&phi[0, 0], n, <double*>&a1[0, 0], n, 1.0, &pr[0, 0], h)
    # the transcendental part is faster through numpy's vectorized loops
    sv = np.ascontiguousarray(_vec_activation(act, pre)[0])
    with nogil:
        _gemm(False, True, B, o, h, 1.0, &sv[0, 0], h, <double*>&a2[0, 0], h, 1.0, &ou[0, 0], o)
    return Phi, pre, out


def field_backward(Z, E, Phi, pre, A1, A2, int act, W):
    cdef const double[:, ::1] z = np.ascontiguousarray(Z, dtype=np.float64)
    idx_a, pows_a, cnt_a = _sparse_terms(E)
    cdef const cnp.int64_t[:, ::1] idx = idx_a
    cdef const cnp.int64_t[:, ::1] pows = pows_a
    cdef const cnp.int64_t[::1] cnt = cnt_a
    cdef const double[:, ::1] phi = np.ascontiguousarray(Phi, dtype=np.float64)
    cdef const double[:, ::1] pr = np.ascontiguousarray(pre, dtype=np.float64)
    cdef const double[:, ::1] a1 = np.ascontiguousarray(A1, dtype=np.float64)
    cdef const double[:, ::1] a2 = np.ascontiguousarray(A2, dtype=np.float64)
    cdef const double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef int B = phi.shape[0], n = phi.shape[1], h = a1.shape[0], o = a2.shape[0]
    cdef int nv = z.shape[1], p = int(E.max()) if E.size else 0
    s, dpre = _vec_activation(act, np.asarray(pre, dtype=np.float64))
    s = np.ascontiguousarray(s)
    dpre = np.ascontiguousarray(dpre)
    dPhi = np.empty((B, n))
    dA1 = np.zeros((h, n))
    db1 = np.zeros(h)
    dA2 = np.zeros((o, h))
    db2 = np.zeros(o)
    dZ = np.empty((B, nv))
    cdef double[:, ::1] sv = s, dp = dpre, dph = dPhi, da1 = dA1, da2 = dA2, dz = dZ
    cdef double[::1] d1 = db1, d2 = db2
    cdef double[:, ::1] tv = np.empty((B, h))
    cdef double[::1] pw = np.empty(nv * (p + 1))
    cdef Py_ssize_t b, k
    if B == 0:
        return dZ, dA1, db1, dA2, db2
    with nogil:
        for b in range(B):
            for k in range(o):
                d2[k] += w[b, k]
        # dpre = (W A2) * sigma'(pre)
        _gemm(False, False, B, h, o, 1.0, <double*>&w[0, 0], o, <double*>&a2[0, 0], h, 0.0, &tv[0, 0], h)
        for b in range(B):
            for k in range(h):
                dp[b, k] = tv[b, k] * dp[b, k]
                d1[k] += dp[b, k]
        _gemm(True, False, o, h, B, 1.0, <double*>&w[0, 0], o, &sv[0, 0], h, 0.0, &da2[0, 0], h)
        _gemm(True, False, h, n, B, 1.0, &dp[0, 0], h, <double*>&phi[0, 0], n, 0.0, &da1[0, 0], n)
        _gemm(False, False, B, n, h, 1.0, &dp[0, 0], h, <double*>&a1[0, 0], n, 0.0, &dph[0, 0], n)
        for b in range(B):
            _powers(z, b, nv, p, &pw[0])
            _vjp_row(idx, pows, cnt, nv, p, &pw[0], &dph[b, 0], &dz[b, 0])
    return dZ, dA1, db1, dA2, db2
