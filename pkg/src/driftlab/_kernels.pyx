# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tridiagonal kernels used by the 1D time stepper."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef void _thomas(const double[:] lower, const double[:] diag,
                  const double[:] upper, double[:] rhs,
                  double[:] work) noexcept nogil:
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t k
    cdef double m
    work[0] = diag[0]
    for k in range(1, n):
        m = lower[k] / work[k - 1]
        work[k] = diag[k] - m * upper[k - 1]
        rhs[k] = rhs[k] - m * rhs[k - 1]
    rhs[n - 1] = rhs[n - 1] / work[n - 1]
    for k in range(n - 2, -1, -1):
        rhs[k] = (rhs[k] - upper[k] * rhs[k + 1]) / work[k]


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve one tridiagonal system with the Thomas algorithm.

    ``lower[k]`` multiplies ``x[k-1]`` in row ``k`` (``lower[0]`` unused),
    ``upper[k]`` multiplies ``x[k+1]`` (``upper[-1]`` unused).
    """
    cdef double[:] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[:] di = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[:] up = np.ascontiguousarray(upper, dtype=np.float64)
    out = np.array(rhs, dtype=np.float64, copy=True)
    cdef double[:] x = out
    cdef double[:] work = np.empty(di.shape[0], dtype=np.float64)
    with nogil:
        _thomas(lo, di, up, x, work)
    return out


def march_tridiagonal(lower, diag, upper, u0, forcing):
    """Backward-Euler march ``A_k u[k] = u[k-1] + forcing[k]`` for k = 1..K.

    ``lower``, ``diag``, ``upper`` and ``forcing`` have shape (K+1, N); row 0
    is ignored. Returns the (K+1, N) trajectory with ``u[0] = u0``.
    """
    cdef double[:, :] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[:, :] di = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[:, :] up = np.ascontiguousarray(upper, dtype=np.float64)
    cdef double[:, :] fo = np.ascontiguousarray(forcing, dtype=np.float64)
    cdef Py_ssize_t steps = di.shape[0]
    cdef Py_ssize_t n = di.shape[1]
    traj = np.empty((steps, n), dtype=np.float64)
    traj[0] = u0
    cdef double[:, :] u = traj
    cdef double[:] work = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t k, j
    with nogil:
        for k in range(1, steps):
            for j in range(n):
                u[k, j] = u[k - 1, j] + fo[k, j]
            _thomas(lo[k], di[k], up[k], u[k], work)
    return traj


def march_tridiagonal_adjoint(lower, diag, upper, y_end, forcing):
    """Backward-in-time march with transposed matrices.

    Solves ``A_k^T y[k-1] = y[k] + forcing[k]`` for k = K..1 where ``A_k`` has
    the given diagonals. Returns the (K+1, N) array ``y`` with ``y[K] = y_end``.
    """
    cdef double[:, :] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[:, :] di = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[:, :] up = np.ascontiguousarray(upper, dtype=np.float64)
    cdef double[:, :] fo = np.ascontiguousarray(forcing, dtype=np.float64)
    cdef Py_ssize_t steps = di.shape[0]
    cdef Py_ssize_t n = di.shape[1]
    out = np.empty((steps, n), dtype=np.float64)
    out[steps - 1] = y_end
    cdef double[:, :] y = out
    cdef double[:] work = np.empty(n, dtype=np.float64)
    # transpose of a tridiagonal: new lower[j] = upper[j-1], new upper[j] = lower[j+1]
    cdef double[:] tlo = np.zeros(n, dtype=np.float64)
    cdef double[:] tup = np.zeros(n, dtype=np.float64)
    cdef Py_ssize_t k, j
    with nogil:
        for k in range(steps - 1, 0, -1):
            for j in range(1, n):
                tlo[j] = up[k, j - 1]
            for j in range(n - 1):
                tup[j] = lo[k, j + 1]
            for j in range(n):
                y[k - 1, j] = y[k, j] + fo[k, j]
            _thomas(tlo, di[k], tup, y[k - 1], work)
    return out
