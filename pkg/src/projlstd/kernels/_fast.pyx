# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: chain path sampling and incremental LSTD accumulation."""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


def sample_path(const double[:, ::1] cdf, const double[::1] u, Py_ssize_t x0):
    cdef Py_ssize_t n_states = cdf.shape[0]
    cdef Py_ssize_t last = n_states - 1
    cdef Py_ssize_t n_steps = u.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_arr = np.empty(n_steps + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t t, lo, hi, mid, x = x0
    cdef double ut
    out[0] = x
    for t in range(n_steps):
        ut = u[t]
        # bisect_right over cdf[x]
        lo = 0
        hi = n_states
        while lo < hi:
            mid = (lo + hi) >> 1
            if ut < cdf[x, mid]:
                hi = mid
            else:
                lo = mid + 1
        x = lo if lo <= last else last
        out[t + 1] = x
    return out_arr


cdef inline void _project(const double[:, ::1] Phi, const double[:, ::1] H,
                          bint identity, Py_ssize_t x, double* out) noexcept nogil:
    cdef int m, n, lda, inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b'T'
    cdef Py_ssize_t j
    if identity:
        for j in range(Phi.shape[1]):
            out[j] = Phi[x, j]
    else:
        # H is C-contiguous (d, D): column-major (D, d), so y = H phi is op 'T'
        m = <int>H.shape[1]
        n = <int>H.shape[0]
        lda = m
        dgemv(&trans, &m, &n, &one, <double*>&H[0, 0], &lda,
              <double*>&Phi[x, 0], &inc, &zero, out, &inc)


def lstd_accumulate(const double[:, ::1] Phi, H_in, const cnp.int64_t[::1] states,
                    const double[::1] rewards, double gamma, double lam):
    cdef bint identity = H_in is None
    cdef const double[:, ::1] H
    cdef Py_ssize_t k
    if identity:
        H = np.zeros((1, 1))
        k = Phi.shape[1]
    else:
        H = H_in
        k = H.shape[0]
        if H.shape[1] != Phi.shape[1]:
            raise ValueError("projection and feature dimensions disagree")
    cdef Py_ssize_t n = states.shape[0]
    cdef double lg = lam * gamma
    A_arr = np.zeros((k, k))
    b_arr = np.zeros(k)
    work_arr = np.zeros((4, k))
    cdef double[:, ::1] A = A_arr
    cdef double[::1] b = b_arr
    cdef double[:, ::1] work = work_arr
    cdef double* z = &work[0, 0]
    cdef double* psi = &work[1, 0]
    cdef double* psi_next = &work[2, 0]
    cdef double* diff = &work[3, 0]
    cdef double* tmp
    cdef Py_ssize_t t, i, j
    cdef double td, zi, r
    with nogil:
        _project(Phi, H, identity, states[0], psi)
        for t in range(1, n):
            td = <double>t
            _project(Phi, H, identity, states[t], psi_next)
            r = rewards[t - 1]
            for j in range(k):
                z[j] = lg * z[j] + psi[j]
                diff[j] = psi[j] - gamma * psi_next[j]
            for i in range(k):
                zi = z[i]
                for j in range(k):
                    A[i, j] = A[i, j] + (zi * diff[j] - A[i, j]) / td
                b[i] = b[i] + (zi * r - b[i]) / td
            tmp = psi
            psi = psi_next
            psi_next = tmp
    return A_arr, b_arr
