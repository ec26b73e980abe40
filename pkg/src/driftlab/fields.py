"""Grid fields and the functionals built on them: Lebesgue and weak-Lebesgue
norms, the W^{-1}_2 norm, truncation, Steklov averages, level-set energies.

Space-time integrals use the backward-Euler rule ``sum_{k=1..K} dt * g(t_k)``
so that they match the time stepper exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ContractViolation
from .grid import SpaceGrid, TimeGrid, quadrature


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: SpaceGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ContractViolation(
                f"field has shape {v.shape}, grid expects ({self.grid.size},)")
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def map(self, fn) -> "ScalarField":
        return ScalarField(self.grid, fn(self.values))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fields at every node of a TimeGrid; ``values`` has shape (K+1, size)."""

    grid: SpaceGrid
    times: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.times.K + 1, self.grid.size):
            raise ContractViolation(
                f"trajectory shape {v.shape} != ({self.times.K + 1}, {self.grid.size})")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def at(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.values[k])

    def to_csv(self, path) -> None:
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")


@dataclass(frozen=True, eq=False)
class NormSeries:
    times: np.ndarray
    values: np.ndarray
    name: str = "value"

    def __len__(self):
        return len(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", self.name])
            for t, v in zip(self.times, self.values):
                w.writerow(["%.17g" % t, "%.17g" % v])


@dataclass(frozen=True)
class LevelSetReport:
    k: float
    measure: float
    sup_energy: float
    gradient_energy: float


def _values(field) -> np.ndarray:
    return field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=float)


def lp_norm(field: ScalarField, p: float) -> float:
    """(int |u|^p)^{1/p}; p = inf gives the max over nodes."""
    if p != math.inf and not p >= 1:
        raise ContractViolation(f"Lebesgue exponent must be >= 1, got {p}")
    u = np.abs(field.values)
    if p == math.inf:
        return float(u.max(initial=0.0))
    if p == 1:
        return quadrature(u, field.grid)
    top = float(u.max(initial=0.0))
    if top == 0.0:
        return 0.0
    # scale by the max so that large p cannot overflow
    return top * quadrature((u / top) ** p, field.grid) ** (1.0 / p)


def weak_lp_quasinorm(field: ScalarField, p: float, closed: bool = False) -> float:
    """sup_s s |{|u| > s}|^{1/p} evaluated at the node levels.

    With the default strict exceedance set the level s = |u_j| is weighed by
    the measure of nodes with strictly larger modulus, which converges to the
    continuum value for singular profiles sampled at cell centres. With
    ``closed=True`` the set {|u| >= s} is used instead; that is the exact
    quasinorm of the piecewise-constant reconstruction.
    """
    if not p >= 1:
        raise ContractViolation(f"weak Lebesgue exponent must be >= 1, got {p}")
    a = np.abs(field.values)
    w = field.grid.quad_weights
    order = np.argsort(-a, kind="stable")
    a, w = a[order], w[order]
    levels, start = np.unique(-a, return_index=True)
    levels = -levels
    cum = np.concatenate([[0.0], np.cumsum(w)])
    # start[i]: first sorted position holding levels[i]
    end = np.append(start[1:], len(a))
    measure = cum[end] if closed else cum[start]
    vals = levels * measure ** (1.0 / p)
    return float(vals.max(initial=0.0))


def dual_sobolev_norm(f: ScalarField, nu: float = 1.0) -> float:
    """||f||_{W^{-1}_2}: solve -nu Lap_h phi = f with phi = 0 on the boundary
    and return sqrt(nu) ||grad_h phi||_2."""
    grid = f.grid
    if not np.any(f.values):
        return 0.0
    phi = spla.spsolve((nu * grid.neg_laplacian()).tocsc(), f.values)
    if not np.all(np.isfinite(phi)):
        raise ArithmeticError("discrete Poisson solve failed")
    return math.sqrt(nu * grid.gradient_energy(phi))


def truncate(field: ScalarField, delta: float) -> ScalarField:
    """Clamp to [0, delta]."""
    if not delta > 0:
        raise ContractViolation(f"truncation level must be positive, got {delta}")
    return field.map(lambda u: np.clip(u, 0.0, delta))


def pos_part(field: ScalarField) -> ScalarField:
    return field.map(lambda u: np.maximum(u, 0.0))


def neg_part(field: ScalarField) -> ScalarField:
    return field.map(lambda u: np.maximum(-u, 0.0))


def steklov_average(traj: Trajectory, h: float) -> Trajectory:
    """Forward time average (1/h) int_t^{t+h} u, trapezoid rule in time.

    ``h`` must be a positive multiple of dt below T; the output lives on the
    shortened horizon T - h.
    """
    tg = traj.times
    m = h / tg.dt
    if not (0 < h < tg.T) or abs(m - round(m)) > 1e-9 * max(1.0, m):
        raise ContractViolation(f"Steklov window {h} is not a multiple of dt = {tg.dt} in (0, T)")
    m = int(round(m))
    u = traj.values
    csum = np.concatenate([np.zeros((1, u.shape[1])),
                           np.cumsum(0.5 * (u[1:] + u[:-1]), axis=0)])
    K_out = tg.K - m
    avg = (csum[m:m + K_out + 1] - csum[:K_out + 1]) / m
    return Trajectory(traj.grid, TimeGrid(K_out * tg.dt, K_out), avg)


def spacetime_integral(values: np.ndarray, grid: SpaceGrid, times: TimeGrid) -> float:
    """sum_{k=1..K} dt * int u(., t_k) for a (K+1, size) array."""
    v = np.asarray(values, dtype=float)
    return float(times.dt * np.sum(v[1:] @ grid.quad_weights))


def spacetime_lp(values: np.ndarray, grid: SpaceGrid, times: TimeGrid, p: float) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if p == math.inf:
        return float(v.max(initial=0.0))
    return spacetime_integral(v**p, grid, times) ** (1.0 / p)


def norm_series(traj: Trajectory, p: float, name: str | None = None) -> NormSeries:
    vals = np.array([lp_norm(traj.at(k), p) for k in range(len(traj))])
    return NormSeries(traj.times.nodes, vals, name or f"L{p}")


def gradient_series(traj: Trajectory) -> NormSeries:
    vals = np.array([traj.grid.gradient_energy(u) for u in traj.values])
    return NormSeries(traj.times.nodes, vals, "grad_energy")


def level_set_report(traj: Trajectory, k: float) -> LevelSetReport:
    """Left-hand side of the level-set energy inequality for (u - k)_+."""
    if not k >= 0:
        raise ContractViolation("level must be nonnegative")
    grid, tg = traj.grid, traj.times
    ex = np.maximum(traj.values - k, 0.0)
    measure = spacetime_integral((traj.values > k).astype(float), grid, tg)
    sup_energy = float(np.max((ex**2) @ grid.quad_weights))
    grad = tg.dt * sum(grid.gradient_energy(e) for e in ex[1:])
    return LevelSetReport(float(k), measure, sup_energy, float(grad))


def bochner_norm(series: NormSeries, outer) -> float:
    """Outer norm in time of a per-node series: max (outer = inf) or the
    backward-Euler L2 root (outer = 2)."""
    v = np.asarray(series.values, dtype=float)
    if outer in (math.inf, "inf"):
        return float(np.max(np.abs(v)))
    if outer == 2:
        dt = np.diff(series.times)
        return math.sqrt(float(np.sum(dt * v[1:] ** 2)))
    raise ContractViolation(f"outer exponent must be inf or 2, got {outer!r}")
