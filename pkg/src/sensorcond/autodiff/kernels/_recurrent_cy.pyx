# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled recurrent kernel.

Same contract and gate convention as _recurrent_py; see that module. The
step loop, gate nonlinearities, and gradient algebra run as C loops, with
the matrix products routed to BLAS dgemm. Row-major arrays are fed to the
column-major BLAS via the usual operand swap (C = A.B  <=>  C^T = B^T.A^T).
"""

import numpy as np

from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

BACKEND = "compiled"


cdef inline double _sigmoid(double a) noexcept nogil:
    cdef double e
    if a >= 0.0:
        return 1.0 / (1.0 + exp(-a))
    e = exp(a)
    return e / (1.0 + e)


cdef void _mm_nn(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, double beta) noexcept:
    """C(m,n) = A(m,k) @ B(k,n) + beta*C, all row-major."""
    cdef int m = <int> A.shape[0]
    cdef int k = <int> A.shape[1]
    cdef int n = <int> B.shape[1]
    cdef double alpha = 1.0
    dgemm("N", "N", &n, &m, &k, &alpha, &B[0, 0], &n, &A[0, 0], &k, &beta, &C[0, 0], &n)


cdef void _mm_tn(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, double beta) noexcept:
    """C(k,n) = A(m,k)^T @ B(m,n) + beta*C, all row-major."""
    cdef int m = <int> A.shape[0]
    cdef int k = <int> A.shape[1]
    cdef int n = <int> B.shape[1]
    cdef double alpha = 1.0
    dgemm("N", "T", &n, &k, &m, &alpha, &B[0, 0], &n, &A[0, 0], &k, &beta, &C[0, 0], &n)


cdef void _mm_nt(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, double beta) noexcept:
    """C(m,p) = A(m,n) @ B(p,n)^T + beta*C, all row-major."""
    cdef int m = <int> A.shape[0]
    cdef int n = <int> A.shape[1]
    cdef int p = <int> B.shape[0]
    cdef double alpha = 1.0
    dgemm("T", "N", &p, &m, &n, &alpha, &B[0, 0], &n, &A[0, 0], &n, &beta, &C[0, 0], &p)


def gru_layer_forward(double[:, :, ::1] x_seq, cond, double[:, ::1] h0,
                      double[:, ::1] wz, double[:, ::1] wr, double[:, ::1] wh,
                      double[::1] bz, double[::1] br, double[::1] bh):
    cdef Py_ssize_t T = x_seq.shape[0]
    cdef Py_ssize_t B = x_seq.shape[1]
    cdef Py_ssize_t Dx = x_seq.shape[2]
    cdef Py_ssize_t H = h0.shape[1]
    cdef Py_ssize_t Dc = 0
    cdef double[::1] cv = None
    cond_arr = None
    if cond is not None:
        cond_arr = np.ascontiguousarray(cond, dtype=np.float64)
        cv = cond_arr
        Dc = cv.shape[0]
    cdef Py_ssize_t din = Dx + Dc

    h_seq_arr = np.empty((T, B, H))
    zs_arr = np.empty((T, B, H))
    rs_arr = np.empty((T, B, H))
    cs_arr = np.empty((T, B, H))
    cdef double[:, :, ::1] h_seq = h_seq_arr
    cdef double[:, :, ::1] zs = zs_arr
    cdef double[:, :, ::1] rs = rs_arr
    cdef double[:, :, ::1] cs = cs_arr

    xh_arr = np.empty((B, din + H))
    xrh_arr = np.empty((B, din + H))
    az_arr = np.empty((B, H))
    ar_arr = np.empty((B, H))
    ac_arr = np.empty((B, H))
    cdef double[:, ::1] xh = xh_arr
    cdef double[:, ::1] xrh = xrh_arr
    cdef double[:, ::1] az = az_arr
    cdef double[:, ::1] ar = ar_arr
    cdef double[:, ::1] ac = ac_arr

    cdef double[:, ::1] hp = h0
    cdef Py_ssize_t t, i, j
    cdef double z_, c_

    for t in range(T):
        for i in range(B):
            for j in range(Dx):
                xh[i, j] = x_seq[t, i, j]
            for j in range(Dc):
                xh[i, Dx + j] = cv[j]
            for j in range(H):
                xh[i, din + j] = hp[i, j]
        _mm_nn(xh, wz, az, 0.0)
        _mm_nn(xh, wr, ar, 0.0)
        for i in range(B):
            for j in range(H):
                zs[t, i, j] = _sigmoid(az[i, j] + bz[j])
                rs[t, i, j] = _sigmoid(ar[i, j] + br[j])
        for i in range(B):
            for j in range(din):
                xrh[i, j] = xh[i, j]
            for j in range(H):
                xrh[i, din + j] = rs[t, i, j] * hp[i, j]
        _mm_nn(xrh, wh, ac, 0.0)
        for i in range(B):
            for j in range(H):
                z_ = zs[t, i, j]
                c_ = tanh(ac[i, j] + bh[j])
                cs[t, i, j] = c_
                h_seq[t, i, j] = (1.0 - z_) * hp[i, j] + z_ * c_
        hp = h_seq[t]

    cache = (np.asarray(x_seq), cond_arr, np.asarray(h0), zs_arr, rs_arr, cs_arr, h_seq_arr)
    return h_seq_arr, cache


def gru_layer_backward(cache, double[:, ::1] wz, double[:, ::1] wr, double[:, ::1] wh,
                       double[:, :, ::1] g_seq, bint need_dx):
    x_seq_arr, cond_arr, h0_arr, zs_arr, rs_arr, cs_arr, h_seq_arr = cache
    cdef double[:, :, ::1] x_seq = x_seq_arr
    cdef double[:, ::1] h0 = h0_arr
    cdef double[:, :, ::1] zs = zs_arr
    cdef double[:, :, ::1] rs = rs_arr
    cdef double[:, :, ::1] cs = cs_arr
    cdef double[:, :, ::1] h_seq = h_seq_arr

    cdef Py_ssize_t T = x_seq.shape[0]
    cdef Py_ssize_t B = x_seq.shape[1]
    cdef Py_ssize_t Dx = x_seq.shape[2]
    cdef Py_ssize_t H = h0.shape[1]
    cdef Py_ssize_t Dc = 0
    cdef double[::1] cv = None
    if cond_arr is not None:
        cv = cond_arr
        Dc = cv.shape[0]
    cdef Py_ssize_t din = Dx + Dc

    dx_arr = np.zeros((T, B, Dx)) if need_dx else None
    dcond_arr = np.zeros(Dc) if cond_arr is not None else None
    dwz_arr = np.zeros((din + H, H))
    dwr_arr = np.zeros((din + H, H))
    dwh_arr = np.zeros((din + H, H))
    dbz_arr = np.zeros(H)
    dbr_arr = np.zeros(H)
    dbh_arr = np.zeros(H)
    dh_arr = np.zeros((B, H))

    cdef double[:, :, ::1] dx = dx_arr if need_dx else None
    cdef double[::1] dcond = dcond_arr if dcond_arr is not None else None
    cdef double[:, ::1] dwz = dwz_arr
    cdef double[:, ::1] dwr = dwr_arr
    cdef double[:, ::1] dwh = dwh_arr
    cdef double[::1] dbz = dbz_arr
    cdef double[::1] dbr = dbr_arr
    cdef double[::1] dbh = dbh_arr
    cdef double[:, ::1] dh = dh_arr

    xh_arr = np.empty((B, din + H))
    xrh_arr = np.empty((B, din + H))
    da_z_arr = np.empty((B, H))
    da_r_arr = np.empty((B, H))
    da_c_arr = np.empty((B, H))
    dxh_arr = np.empty((B, din + H))
    dxrh_arr = np.empty((B, din + H))
    dh_prev_arr = np.empty((B, H))
    cdef double[:, ::1] xh = xh_arr
    cdef double[:, ::1] xrh = xrh_arr
    cdef double[:, ::1] da_z = da_z_arr
    cdef double[:, ::1] da_r = da_r_arr
    cdef double[:, ::1] da_c = da_c_arr
    cdef double[:, ::1] dxh = dxh_arr
    cdef double[:, ::1] dxrh = dxrh_arr
    cdef double[:, ::1] dh_prev = dh_prev_arr

    cdef double[:, ::1] hp
    cdef Py_ssize_t t, i, j
    cdef double z_, r_, c_, hp_, dh_, dz_, dr_, drh_

    for t in range(T - 1, -1, -1):
        hp = h_seq[t - 1] if t > 0 else h0
        for i in range(B):
            for j in range(Dx):
                xh[i, j] = x_seq[t, i, j]
            for j in range(Dc):
                xh[i, Dx + j] = cv[j]
            for j in range(H):
                xh[i, din + j] = hp[i, j]
                xrh[i, din + j] = rs[t, i, j] * hp[i, j]
            for j in range(din):
                xrh[i, j] = xh[i, j]

        for i in range(B):
            for j in range(H):
                dh_ = dh[i, j] + g_seq[t, i, j]
                z_ = zs[t, i, j]
                c_ = cs[t, i, j]
                hp_ = hp[i, j]
                dz_ = dh_ * (c_ - hp_)
                da_c[i, j] = dh_ * z_ * (1.0 - c_ * c_)
                da_z[i, j] = dz_ * z_ * (1.0 - z_)
                dh_prev[i, j] = dh_ * (1.0 - z_)

        _mm_tn(xrh, da_c, dwh, 1.0)
        _mm_nt(da_c, wh, dxrh, 0.0)

        for i in range(B):
            for j in range(H):
                drh_ = dxrh[i, din + j]
                r_ = rs[t, i, j]
                dr_ = drh_ * hp[i, j]
                dh_prev[i, j] += drh_ * r_
                da_r[i, j] = dr_ * r_ * (1.0 - r_)
                dbh[j] += da_c[i, j]
                dbz[j] += da_z[i, j]

        _mm_tn(xh, da_z, dwz, 1.0)
        _mm_tn(xh, da_r, dwr, 1.0)
        _mm_nt(da_z, wz, dxh, 0.0)
        _mm_nt(da_r, wr, dxh, 1.0)

        for i in range(B):
            for j in range(H):
                dbr[j] += da_r[i, j]
                dh[i, j] = dh_prev[i, j] + dxh[i, din + j]
            if need_dx:
                for j in range(Dx):
                    dx[t, i, j] = dxrh[i, j] + dxh[i, j]
            if dcond is not None:
                for j in range(Dc):
                    dcond[j] += dxrh[i, Dx + j] + dxh[i, Dx + j]

    return (dx_arr, dcond_arr, dh_arr, dwz_arr, dwr_arr, dwh_arr,
            dbz_arr, dbr_arr, dbh_arr)
