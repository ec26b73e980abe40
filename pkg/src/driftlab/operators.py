"""Sparse assembly of the advection and step operators.

Advection is the non-conservative form ``b . grad u``. With ``upwind`` each
row has a nonnegative diagonal, nonpositive off-diagonals and zero row sum
away from the boundary; the W-weighted column sums then play the role of
``-div b``. The ghost codes of the grid supply the boundary closure.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .grid import DIRICHLET, SYMMETRY, SpaceGrid

SCHEMES = ("upwind", "centered")


def advection_matrix(grid: SpaceGrid, comps: np.ndarray, scheme: str = "upwind") -> sp.csr_matrix:
    """Matrix of ``b . grad_h`` for per-node drift components (size, n_axes)."""
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown advection scheme {scheme!r}; expected one of {SCHEMES}")
    comps = np.asarray(comps, dtype=float).reshape(grid.size, grid.n_axes)
    n = grid.size
    idx = np.arange(n)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for d, h in enumerate(grid.spacings):
        c = comps[:, d]
        lo, hi = grid.lower[d], grid.upper[d]
        if scheme == "upwind":
            cp = np.maximum(c, 0.0) / h
            cm = np.maximum(-c, 0.0) / h
            for nb, coef in ((lo, cp), (hi, cm)):
                inner = nb >= 0
                diag += coef
                diag[nb == DIRICHLET] += coef[nb == DIRICHLET]
                diag[nb == SYMMETRY] -= coef[nb == SYMMETRY]
                rows.append(idx[inner])
                cols.append(nb[inner])
                vals.append(-coef[inner])
        else:
            half = c / (2.0 * h)
            for nb, sign in ((hi, 1.0), (lo, -1.0)):
                inner = nb >= 0
                coef = sign * half
                diag[nb == DIRICHLET] -= coef[nb == DIRICHLET]
                diag[nb == SYMMETRY] += coef[nb == SYMMETRY]
                rows.append(idx[inner])
                cols.append(nb[inner])
                vals.append(coef[inner])
    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def column_deficit(grid: SpaceGrid, matrix: sp.spmatrix) -> np.ndarray:
    """(M^T W 1) / W: the W-weighted column sums of ``matrix``."""
    w = grid.quad_weights
    return (matrix.T @ w) / w


def discrete_divergence(grid: SpaceGrid, comps: np.ndarray) -> np.ndarray:
    """Adjoint deficit of the upwind operator, -(B^T W 1) / W.

    Nonpositive at every node exactly when the upwind scheme is an L1
    contraction for this drift.
    """
    return -column_deficit(grid, advection_matrix(grid, comps, "upwind"))


def generator(grid: SpaceGrid, nu: float, comps: np.ndarray, scheme: str = "upwind") -> sp.csr_matrix:
    """L = -nu Lap_h + b . grad_h."""
    return (nu * grid.neg_laplacian() + advection_matrix(grid, comps, scheme)).tocsr()


def step_matrix(grid: SpaceGrid, nu: float, comps: np.ndarray, dt: float,
                scheme: str = "upwind") -> sp.csr_matrix:
    """Backward-Euler matrix I + dt L."""
    return (sp.identity(grid.size, format="csr") + dt * generator(grid, nu, comps, scheme)).tocsr()
