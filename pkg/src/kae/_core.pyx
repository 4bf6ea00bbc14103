# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: pairwise squared distances and the Jacobian recurrence."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport parallel, prange
from libc.stdlib cimport free, malloc

cnp.import_array()


def sq_dists(const double[:, ::1] X, const double[:, ::1] Y):
    cdef Py_ssize_t n = X.shape[0], m = Y.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, t
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                t = X[i, k] - Y[j, k]
                s = s + t * t
            o[i, j] = s
    return out


def jacobian_step(const double[:, :, :, ::1] J_prev, const double[:, :, ::1] G,
                  const double[:, ::1] phi, const double[::1] a_diag, int nthreads=1):
    cdef Py_ssize_t n = J_prev.shape[0], dp = J_prev.shape[1]
    cdef Py_ssize_t m = J_prev.shape[2], d0 = J_prev.shape[3]
    cdef Py_ssize_t dl = phi.shape[1]
    cdef Py_ssize_t width = m * d0
    cdef Py_ssize_t i, k, p, a, r
    cdef double g, c
    cdef double *tmp
    cdef double *M
    if nthreads < 1:
        nthreads = 1
    out = np.zeros((n, dl, m, d0), dtype=np.float64)
    # flat views: row (i, p) of J_prev and row (i, a) of out are contiguous
    cdef const double[:, ::1] Jf = np.asarray(J_prev).reshape(n * dp, width)
    cdef double[:, ::1] o = out.reshape(n * dl, width)
    # rows i are independent; each thread writes only its own rows of out
    with nogil, parallel(num_threads=nthreads):
        tmp = <double *> malloc(width * sizeof(double))
        M = <double *> malloc(dl * dp * sizeof(double))
        for i in prange(n, schedule="static"):
            # own-point term: (sum_k phi_k grad_1 k(x_i, x_k)^T) J_prev[i]
            for a in range(dl * dp):
                M[a] = 0.0
            for k in range(n):
                for p in range(dp):
                    g = G[i, k, p]
                    for a in range(dl):
                        M[a * dp + p] += phi[k, a] * g
            for a in range(dl):
                for p in range(dp):
                    c = M[a * dp + p]
                    if c != 0.0:
                        for r in range(width):
                            o[i * dl + a, r] += c * Jf[i * dp + p, r]
            # support term: sum_k phi_k (grad_1 k(x_k, x_i)^T J_prev[k])
            for k in range(n):
                for r in range(width):
                    tmp[r] = 0.0
                for p in range(dp):
                    g = G[k, i, p]
                    if g != 0.0:
                        for r in range(width):
                            tmp[r] += g * Jf[k * dp + p, r]
                for a in range(dl):
                    c = phi[k, a]
                    if c != 0.0:
                        for r in range(width):
                            o[i * dl + a, r] += c * tmp[r]
            for a in range(dl):
                for r in range(width):
                    o[i * dl + a, r] *= a_diag[a]
        free(tmp)
        free(M)
    return out
