"""Backward-Euler integrator for the primal problem and its exact discrete
adjoint.

One step reads ``(I + dt L_k) u^k = u^{k-1} + dt f^k`` with the drift frozen
at ``t_k``. The dual step is ``A_k^T (W w^{k-1}) = W (w^k + dt g^k)``, which
makes the discrete duality identity hold to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .drift import DriftSpec
from .errors import ConfigurationError, ContractViolation, SolverDivergenceError
from .fields import NormSeries, ScalarField, Trajectory
from .grid import DIRICHLET, SYMMETRY, SpaceGrid, TimeGrid
from .operators import SCHEMES, advection_matrix, step_matrix


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance of the drift-diffusion problem with zero Dirichlet data.

    ``f`` is None, a per-node array (constant in time) or a (K+1, size)
    array whose row 0 is ignored.
    """

    grid: SpaceGrid
    times: TimeGrid
    nu: float
    drift: DriftSpec
    u0: np.ndarray
    f: np.ndarray | None = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigurationError(f"viscosity must be positive, got {self.nu}")
        u0 = np.asarray(self.u0.values if isinstance(self.u0, ScalarField) else self.u0,
                        dtype=float)
        if u0.shape != (self.grid.size,):
            raise ContractViolation(f"u0 has shape {u0.shape}, expected ({self.grid.size},)")
        object.__setattr__(self, "u0", u0)
        if self.f is not None:
            f = np.asarray(self.f, dtype=float)
            if f.shape not in ((self.grid.size,), (self.times.K + 1, self.grid.size)):
                raise ContractViolation(f"source has shape {f.shape}")
            object.__setattr__(self, "f", f)

    @property
    def domain(self):
        return self.grid.domain

    def source(self) -> np.ndarray:
        """Source at every time node, shape (K+1, size)."""
        shape = (self.times.K + 1, self.grid.size)
        if self.f is None:
            return np.zeros(shape)
        if self.f.ndim == 1:
            return np.broadcast_to(self.f, shape).copy()
        return self.f

    def with_(self, **changes) -> "ProblemSpec":
        kw = dict(grid=self.grid, times=self.times, nu=self.nu, drift=self.drift,
                  u0=self.u0, f=self.f)
        kw.update(changes)
        return ProblemSpec(**kw)


@dataclass(frozen=True)
class SolverConfig:
    advection_scheme: str = "upwind"
    time_scheme: str = "backward_euler"
    tolerance: float = 1e-12

    def __post_init__(self):
        if self.advection_scheme not in SCHEMES:
            raise ConfigurationError(
                f"unknown advection scheme {self.advection_scheme!r}; expected one of {SCHEMES}")
        if self.time_scheme != "backward_euler":
            raise ConfigurationError("only the backward_euler time scheme is available")
        if not self.tolerance > 0:
            raise ConfigurationError("linear-solver tolerance must be positive")

    def to_dict(self) -> dict:
        return {"advection_scheme": self.advection_scheme, "time_scheme": self.time_scheme,
                "tolerance": self.tolerance}


@dataclass(frozen=True, eq=False)
class SolveResult:
    trajectory: Trajectory
    l1: NormSeries
    l2: NormSeries
    linf: NormSeries
    gradient: NormSeries
    m_structure: np.ndarray
    backend: str = "sparse"
    extra: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.trajectory.values

    def summary(self) -> dict:
        return {
            "final_l1": float(self.l1.values[-1]),
            "final_l2": float(self.l2.values[-1]),
            "final_linf": float(self.linf.values[-1]),
            "m_structure_all_steps": bool(np.all(self.m_structure)),
            "backend": self.backend,
        }

    def series_table(self) -> tuple[list[str], np.ndarray]:
        cols = ["t", "l1", "l2", "linf", "grad_energy"]
        data = np.column_stack([self.l1.times, self.l1.values, self.l2.values,
                                self.linf.values, self.gradient.values])
        return cols, data


@dataclass(frozen=True)
class StepDiagnostics:
    """Sign pattern and deficits of the step matrix A = I + dt L.

    ``row_deficit`` is A 1 - 1 and ``column_deficit`` is (A^T W 1)/W - 1.
    """

    step: int
    m_structure: bool
    min_diagonal: float
    max_offdiagonal: float
    row_deficit: np.ndarray
    column_deficit: np.ndarray

    @property
    def min_row_deficit(self) -> float:
        return float(self.row_deficit.min())

    @property
    def min_column_deficit(self) -> float:
        return float(self.column_deficit.min())

    def to_dict(self) -> dict:
        return {"step": self.step, "m_structure": self.m_structure,
                "min_diagonal": self.min_diagonal, "max_offdiagonal": self.max_offdiagonal,
                "min_row_deficit": self.min_row_deficit,
                "min_column_deficit": self.min_column_deficit}


def _drift_rows(spec: ProblemSpec) -> list[np.ndarray]:
    """Drift components at t_1..t_K (index 0 duplicates step 1)."""
    tg, grid = spec.times, spec.grid
    if not spec.drift.time_dependent:
        c = np.asarray(spec.drift.sample(grid, tg.T, tg.K), dtype=float)
        c = c.reshape(grid.size, grid.n_axes)
        return [c] * (tg.K + 1)
    rows = [np.asarray(spec.drift.sample(grid, tg.nodes[k], k), dtype=float)
            .reshape(grid.size, grid.n_axes) for k in range(1, tg.K + 1)]
    return [rows[0]] + rows


def tridiagonal_bands(grid: SpaceGrid, nu: float, comps: np.ndarray, dt: float,
                      scheme: str = "upwind"):
    """Bands of I + dt L for a batch of drifts on a one-axis grid.

    ``comps`` has shape (steps, size); returns (lower, diag, upper) with
    ``lower[:, j] = A[j, j-1]`` and ``upper[:, j] = A[j, j+1]``.
    """
    if grid.n_axes != 1:
        raise ContractViolation("tridiagonal bands need a one-axis grid")
    c = np.atleast_2d(np.asarray(comps, dtype=float))
    h = grid.spacings[0]
    lo_nb, hi_nb = grid.lower[0], grid.upper[0]
    lap = grid.neg_laplacian().tocsr()
    n = grid.size
    ld = np.zeros(n)
    ud = np.zeros(n)
    ld[1:] = lap.diagonal(-1)
    ud[:-1] = lap.diagonal(1)
    lower = np.tile(nu * ld, (c.shape[0], 1))
    upper = np.tile(nu * ud, (c.shape[0], 1))
    diag = np.tile(nu * lap.diagonal(), (c.shape[0], 1))
    gl = lo_nb == DIRICHLET
    gu = hi_nb == DIRICHLET
    sl = lo_nb == SYMMETRY
    su = hi_nb == SYMMETRY
    if scheme == "upwind":
        cp = np.maximum(c, 0.0) / h
        cm = np.maximum(-c, 0.0) / h
        diag += cp + cm
        diag[:, gl] += cp[:, gl]
        diag[:, gu] += cm[:, gu]
        diag[:, sl] -= cp[:, sl]
        diag[:, su] -= cm[:, su]
        lower[:, lo_nb >= 0] -= cp[:, lo_nb >= 0]
        upper[:, hi_nb >= 0] -= cm[:, hi_nb >= 0]
    elif scheme == "centered":
        half = c / (2.0 * h)
        diag[:, gu] -= half[:, gu]
        diag[:, gl] += half[:, gl]
        diag[:, su] += half[:, su]
        diag[:, sl] -= half[:, sl]
        upper[:, hi_nb >= 0] += half[:, hi_nb >= 0]
        lower[:, lo_nb >= 0] -= half[:, lo_nb >= 0]
    else:
        raise ConfigurationError(f"unknown advection scheme {scheme!r}")
    lower *= dt
    upper *= dt
    diag = 1.0 + dt * diag
    lower[:, 0] = 0.0
    upper[:, -1] = 0.0
    return lower, diag, upper


def _series(traj: Trajectory):
    grid, t = traj.grid, traj.times.nodes
    a = np.abs(traj.values)
    w = grid.quad_weights
    l1 = NormSeries(t, a @ w, "l1")
    l2 = NormSeries(t, np.sqrt((a**2) @ w), "l2")
    linf = NormSeries(t, a.max(axis=1), "linf")
    grad = NormSeries(t, np.array([grid.gradient_energy(u) for u in traj.values]),
                      "grad_energy")
    return l1, l2, linf, grad


def _check_finite(values: np.ndarray) -> None:
    bad = ~np.all(np.isfinite(values), axis=1)
    if bad.any():
        raise SolverDivergenceError(int(np.argmax(bad)))


def _sparse_steps(spec: ProblemSpec, config: SolverConfig):
    """Yield (k, step matrix) for k = 1..K, reusing frozen drifts."""
    rows = _drift_rows(spec)
    dt = spec.times.dt
    last = None
    for k in range(1, spec.times.K + 1):
        if last is None or rows[k] is not rows[k - 1] or k == 1:
            A = step_matrix(spec.grid, spec.nu, rows[k], dt, config.advection_scheme)
            lu = spla.splu(A.tocsc())
            last = (A, lu)
        yield k, last[0], last[1]


def _m_flags_bands(lower, diag, upper) -> np.ndarray:
    return (np.all(diag > 0, axis=1) & np.all(lower <= 0, axis=1)
            & np.all(upper <= 0, axis=1))


def _m_flag_sparse(A: sp.csr_matrix) -> bool:
    coo = A.tocoo()
    off = coo.row != coo.col
    return bool(np.all(A.diagonal() > 0) and np.all(coo.data[off] <= 0))


def solve_primal(spec: ProblemSpec, config: SolverConfig | None = None) -> SolveResult:
    """March u^0 = u0 through K backward-Euler steps."""
    config = config or SolverConfig()
    grid, tg = spec.grid, spec.times
    forcing = tg.dt * spec.source()
    if grid.n_axes == 1:
        comps = np.stack([c[:, 0] for c in _drift_rows(spec)])
        lower, diag, upper = tridiagonal_bands(grid, spec.nu, comps, tg.dt,
                                               config.advection_scheme)
        with np.errstate(all="ignore"):
            values = kernels.march_tridiagonal(lower, diag, upper, spec.u0, forcing)
        flags = _m_flags_bands(lower, diag, upper)
        backend = kernels.BACKEND
    else:
        values = np.empty((tg.K + 1, grid.size))
        values[0] = spec.u0
        flags = np.ones(tg.K + 1, dtype=bool)
        for k, A, lu in _sparse_steps(spec, config):
            values[k] = lu.solve(values[k - 1] + forcing[k])
            flags[k] = _m_flag_sparse(A) if k == 1 or spec.drift.time_dependent else flags[k - 1]
            if not np.all(np.isfinite(values[k])):
                raise SolverDivergenceError(k)
        backend = "splu"
    flags[0] = flags[1] if len(flags) > 1 else True
    _check_finite(values)
    traj = Trajectory(grid, tg, values)
    return SolveResult(traj, *_series(traj), m_structure=flags, backend=backend)


def solve_dual(spec: ProblemSpec, g, w_T, config: SolverConfig | None = None) -> SolveResult:
    """Backward march of the exact adjoint: A_k^T W w^{k-1} = W (w^k + dt g^k).

    ``g`` is a (K+1, size) array (row 0 ignored), a per-node array or a
    Trajectory; ``w_T`` is the terminal field.
    """
    config = config or SolverConfig()
    grid, tg = spec.grid, spec.times
    W = grid.quad_weights
    g = g.values if isinstance(g, Trajectory) else np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = np.broadcast_to(g, (tg.K + 1, grid.size))
    if g.shape != (tg.K + 1, grid.size):
        raise ContractViolation(f"dual source has shape {g.shape}")
    wT = np.asarray(w_T.values if isinstance(w_T, ScalarField) else w_T, dtype=float)
    if wT.shape != (grid.size,):
        raise ContractViolation(f"terminal field has shape {wT.shape}")
    forcing = tg.dt * g * W
    y_end = W * wT
    if grid.n_axes == 1:
        comps = np.stack([c[:, 0] for c in _drift_rows(spec)])
        lower, diag, upper = tridiagonal_bands(grid, spec.nu, comps, tg.dt,
                                               config.advection_scheme)
        with np.errstate(all="ignore"):
            y = kernels.march_tridiagonal_adjoint(lower, diag, upper, y_end, forcing)
        flags = _m_flags_bands(lower, diag, upper)
        backend = kernels.BACKEND
    else:
        y = np.empty((tg.K + 1, grid.size))
        y[-1] = y_end
        flags = np.ones(tg.K + 1, dtype=bool)
        mats = list(_sparse_steps(spec, config)) if spec.drift.time_dependent else None
        if mats is None:
            _, A, lu = next(_sparse_steps(spec, config))
            flag = _m_flag_sparse(A)
        for k in range(tg.K, 0, -1):
            if mats is not None:
                _, A, lu = mats[k - 1]
                flag = _m_flag_sparse(A)
            y[k - 1] = lu.solve(y[k] + forcing[k], trans="T")
            flags[k] = flag
        backend = "splu"
    flags[0] = flags[1] if len(flags) > 1 else True
    values = y / W
    _check_finite(values)
    traj = Trajectory(grid, tg, values)
    return SolveResult(traj, *_series(traj), m_structure=flags, backend=backend)


def duality_residual(primal: SolveResult, dual: SolveResult, spec: ProblemSpec, g) -> dict:
    """Both sides of the discrete duality identity

    sum_k dt <u^k, g^k> + <u^K, w^K> = <u^0, w^0> + sum_k dt <f^k, w^{k-1}>.
    """
    grid, tg = spec.grid, spec.times
    W = grid.quad_weights
    u, w = primal.values, dual.values
    g = g.values if isinstance(g, Trajectory) else np.asarray(g, dtype=float)
    g = np.broadcast_to(g, u.shape)
    f = spec.source()
    lhs = tg.dt * np.sum((u[1:] * g[1:]) @ W) + float((u[-1] * w[-1]) @ W)
    rhs = float((u[0] * w[0]) @ W) + tg.dt * np.sum((f[1:] * w[:-1]) @ W)
    scale = max(abs(lhs), abs(rhs), tg.dt * np.sum(np.abs(u[1:] * g[1:]) @ W),
                float(np.abs(u[0] * w[0]) @ W), np.finfo(float).tiny)
    return {"lhs": float(lhs), "rhs": float(rhs), "abs_residual": float(abs(lhs - rhs)),
            "rel_residual": float(abs(lhs - rhs) / scale)}


def assembled_step_matrix(spec: ProblemSpec, config: SolverConfig | None, k: int) -> sp.csr_matrix:
    config = config or SolverConfig()
    if not 1 <= k <= spec.times.K:
        raise ContractViolation(f"step index {k} outside 1..{spec.times.K}")
    comps = _drift_rows(spec)[k]
    return step_matrix(spec.grid, spec.nu, comps, spec.times.dt, config.advection_scheme)


def step_matrix_report(spec: ProblemSpec, config: SolverConfig | None = None,
                       k: int = 1) -> StepDiagnostics:
    """Sign pattern, row-sum and W-weighted column-sum deficits at step k."""
    A = assembled_step_matrix(spec, config, k)
    W = spec.grid.quad_weights
    coo = A.tocoo()
    off = coo.row != coo.col
    max_off = float(coo.data[off].max()) if off.any() else -math.inf
    ones = np.ones(spec.grid.size)
    return StepDiagnostics(
        step=k,
        m_structure=_m_flag_sparse(A),
        min_diagonal=float(A.diagonal().min()),
        max_offdiagonal=max_off,
        row_deficit=A @ ones - 1.0,
        column_deficit=(A.T @ W) / W - 1.0,
    )


def adjoint_step_matrix(spec: ProblemSpec, config: SolverConfig | None, k: int) -> sp.csr_matrix:
    """Matrix applied to W w^{k-1} in the dual step: the transpose of A_k."""
    return assembled_step_matrix(spec, config, k).T.tocsr()
