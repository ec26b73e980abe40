"""Pure-Python fallback for the tridiagonal kernels in ``_kernels.pyx``.

Same signatures and the same operation order as the compiled version, so
results agree to rounding.
"""

import numpy as np


def solve_tridiagonal(lower, diag, upper, rhs):
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    work = np.array(diag, dtype=np.float64, copy=True)
    x = np.array(rhs, dtype=np.float64, copy=True)
    n = work.shape[0]
    for k in range(1, n):
        m = lower[k] / work[k - 1]
        work[k] = work[k] - m * upper[k - 1]
        x[k] = x[k] - m * x[k - 1]
    x[n - 1] = x[n - 1] / work[n - 1]
    for k in range(n - 2, -1, -1):
        x[k] = (x[k] - upper[k] * x[k + 1]) / work[k]
    return x


def march_tridiagonal(lower, diag, upper, u0, forcing):
    diag = np.asarray(diag, dtype=np.float64)
    traj = np.empty(diag.shape, dtype=np.float64)
    traj[0] = u0
    for k in range(1, diag.shape[0]):
        traj[k] = solve_tridiagonal(lower[k], diag[k], upper[k],
                                    traj[k - 1] + forcing[k])
    return traj


def march_tridiagonal_adjoint(lower, diag, upper, y_end, forcing):
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    diag = np.asarray(diag, dtype=np.float64)
    steps, n = diag.shape
    out = np.empty((steps, n), dtype=np.float64)
    out[-1] = y_end
    tlo = np.zeros(n)
    tup = np.zeros(n)
    for k in range(steps - 1, 0, -1):
        tlo[1:] = upper[k, :-1]
        tup[:-1] = lower[k, 1:]
        out[k - 1] = solve_tridiagonal(tlo, diag[k], tup, out[k] + forcing[k])
    return out
