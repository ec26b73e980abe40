"""Spatial and temporal discretizations.

All spatial grids are cell centered. Homogeneous Dirichlet data is imposed on
the cell faces lying on the boundary through an antisymmetric ghost value, so
no node sits on the boundary itself. Ball domains are reduced to the radial
variable; the ambient dimension only enters through the measure
``omega_{n-1} r^{n-1} dr`` and the face areas.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractViolation, EmptySubdomainError

# neighbour codes used in SpaceGrid.lower / SpaceGrid.upper
DIRICHLET = -1
SYMMETRY = -2

DOMAIN_KINDS = ("radial_ball", "rectangle", "interval")


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(n: int, radius: float = 1.0) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius**n


@dataclass(frozen=True)
class Domain:
    """A ball (treated radially), an axis-aligned rectangle, or an interval."""

    kind: str
    dim: int
    radius: float = 1.0
    bounds: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ConfigurationError(
                f"unknown domain kind {self.kind!r}; expected one of {DOMAIN_KINDS}")
        if self.dim < 1:
            raise ConfigurationError("domain dimension must be >= 1")
        if self.kind == "radial_ball":
            if not self.radius > 0:
                raise ConfigurationError("ball radius must be positive")
        else:
            if len(self.bounds) != self.dim:
                raise ConfigurationError(
                    f"{self.kind} needs {self.dim} axis bounds, got {len(self.bounds)}")
            for lo, hi in self.bounds:
                if not lo < hi:
                    raise ConfigurationError(f"axis bounds ({lo}, {hi}) are not increasing")
            if self.kind == "interval" and self.dim != 1:
                raise ConfigurationError("an interval is one dimensional")
            if self.kind == "rectangle" and self.dim != 2:
                raise ConfigurationError("rectangles are two dimensional")

    @classmethod
    def interval(cls, a: float = 0.0, b: float = 1.0) -> "Domain":
        return cls("interval", 1, bounds=((float(a), float(b)),))

    @classmethod
    def rectangle(cls, xbounds=(0.0, 1.0), ybounds=(0.0, 1.0)) -> "Domain":
        return cls("rectangle", 2, bounds=(tuple(map(float, xbounds)),
                                           tuple(map(float, ybounds))))

    @classmethod
    def ball(cls, n: int, radius: float = 1.0) -> "Domain":
        return cls("radial_ball", int(n), radius=float(radius))

    @property
    def is_radial(self) -> bool:
        return self.kind == "radial_ball"

    def volume(self) -> float:
        if self.is_radial:
            return ball_volume(self.dim, self.radius)
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    def inradius(self) -> float:
        if self.is_radial:
            return self.radius
        return min(hi - lo for lo, hi in self.bounds) / 2.0

    def to_dict(self) -> dict:
        if self.is_radial:
            return {"kind": self.kind, "n": self.dim, "radius": self.radius}
        return {"kind": self.kind, "n": self.dim,
                "bounds": [list(b) for b in self.bounds]}


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of (0, T) into K steps."""

    T: float
    K: int

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigurationError("time horizon T must be positive")
        if int(self.K) != self.K or self.K < 1:
            raise ConfigurationError("number of time steps must be an integer >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.K + 1) * self.dt
        t[-1] = self.T
        return t

    def index_of(self, t: float) -> int:
        """Index of the node nearest to ``t``."""
        return int(np.clip(round(t / self.dt), 0, self.K))

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.T, self.K * factor)


@dataclass(frozen=True, eq=False)
class SpaceGrid:
    """Cell-centered grid with positive midpoint quadrature weights.

    ``lower[d]`` / ``upper[d]`` hold, for every node, the index of the
    neighbour along axis ``d`` or one of the codes ``DIRICHLET`` (ghost value
    ``-u``) and ``SYMMETRY`` (ghost value ``+u``, used at r = 0).
    Diffusive faces are stored as conductances ``area / distance`` so that the
    discrete Dirichlet energy is ``sum(cond * jump**2)``.
    """

    domain: Domain
    resolution: int
    shape: tuple[int, ...]
    nodes: np.ndarray
    quad_weights: np.ndarray
    boundary_mask: np.ndarray
    spacings: tuple[float, ...]
    lower: tuple[np.ndarray, ...]
    upper: tuple[np.ndarray, ...]
    face_left: np.ndarray
    face_right: np.ndarray
    face_cond: np.ndarray
    bface_cell: np.ndarray
    bface_cond: np.ndarray
    boundary_distance: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def h(self) -> float:
        return max(self.spacings)

    @property
    def size(self) -> int:
        return self.quad_weights.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def is_radial(self) -> bool:
        return self.domain.is_radial

    @property
    def n_axes(self) -> int:
        return len(self.spacings)

    def points(self) -> np.ndarray:
        """Node coordinates as an (size, n_axes) array (radius for balls)."""
        return self.nodes.reshape(self.size, -1)

    def radius(self) -> np.ndarray:
        """|x| at every node."""
        if self.is_radial:
            return self.nodes
        return np.linalg.norm(self.points(), axis=1)

    def normalized_radius(self) -> np.ndarray:
        """Distance to the domain centre scaled so the boundary sits at 1.

        For rectangles this is the max-norm of the scaled coordinates.
        """
        if self.is_radial:
            return self.nodes / self.domain.radius
        return np.max(np.abs(self.normalized_coordinates()), axis=1)

    def normalized_coordinates(self) -> np.ndarray:
        """Cartesian coordinates mapped affinely onto (-1, 1)^d."""
        if self.is_radial:
            raise ContractViolation("radial grids have no Cartesian coordinates")
        lo = np.array([b[0] for b in self.domain.bounds])
        hi = np.array([b[1] for b in self.domain.bounds])
        return (self.points() - (lo + hi) / 2) / ((hi - lo) / 2)

    def volume(self) -> float:
        return float(self.quad_weights.sum())

    def neg_laplacian(self) -> sp.csr_matrix:
        """The matrix of -Delta_h (W-self-adjoint, positive definite)."""
        if "neg_lap" not in self._cache:
            self._cache["neg_lap"] = sp.diags(1.0 / self.quad_weights) @ self.stiffness()
        return self._cache["neg_lap"]

    def stiffness(self) -> sp.csr_matrix:
        """Symmetric matrix S with u^T S u = ||grad_h u||^2."""
        if "stiffness" not in self._cache:
            n = self.size
            fl, fr, c = self.face_left, self.face_right, self.face_cond
            rows = np.concatenate([fl, fr, fl, fr, self.bface_cell])
            cols = np.concatenate([fl, fr, fr, fl, self.bface_cell])
            vals = np.concatenate([c, c, -c, -c, self.bface_cond])
            self._cache["stiffness"] = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return self._cache["stiffness"]

    def gradient_energy(self, values) -> float:
        """Discrete ||grad u||_2^2 including the Dirichlet boundary faces."""
        u = np.asarray(values, dtype=float)
        jump = u[self.face_right] - u[self.face_left]
        return float(np.sum(self.face_cond * jump**2)
                     + np.sum(self.bface_cond * u[self.bface_cell] ** 2))

    def refined(self, factor: int = 2) -> "SpaceGrid":
        return build_grid(self.domain, self.resolution * factor)

    def to_csv(self, path) -> None:
        """Write index, coordinate(s), weight, is_boundary."""
        pts = self.points()
        names = ["r"] if self.is_radial else ["x", "y"][: self.n_axes]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", *names, "weight", "is_boundary"])
            for i in range(self.size):
                w.writerow([i, *("%.17g" % v for v in pts[i]),
                            "%.17g" % self.quad_weights[i], int(self.boundary_mask[i])])


def _readonly(*arrays):
    for a in arrays:
        a.setflags(write=False)


def _axis_links(n: int, left_code: int, right_code: int):
    idx = np.arange(n)
    lower = idx - 1
    upper = idx + 1
    lower[0] = left_code
    upper[-1] = right_code
    return lower, upper


def build_grid(domain: Domain, resolution: int) -> SpaceGrid:
    """Build a cell-centered grid with ``resolution`` cells per axis.

    Radial grids place nodes at r_j = (j - 1/2) h, h = R / N.
    """
    if int(resolution) != resolution or resolution < 4:
        raise ConfigurationError(f"grid resolution must be an integer >= 4, got {resolution!r}")
    N = int(resolution)

    if domain.is_radial:
        R, n = domain.radius, domain.dim
        h = R / N
        r = (np.arange(1, N + 1) - 0.5) * h
        omega = sphere_area(n)
        weights = omega * r ** (n - 1) * h
        faces_r = np.arange(1, N) * h
        face_cond = omega * faces_r ** (n - 1) / h
        lower, upper = _axis_links(N, SYMMETRY, DIRICHLET)
        bmask = np.zeros(N, dtype=bool)
        bmask[-1] = True
        grid = SpaceGrid(
            domain=domain, resolution=N, shape=(N,), nodes=r,
            quad_weights=weights, boundary_mask=bmask, spacings=(h,),
            lower=(lower,), upper=(upper,),
            face_left=np.arange(N - 1), face_right=np.arange(1, N),
            face_cond=face_cond,
            bface_cell=np.array([N - 1]),
            bface_cond=np.array([omega * R ** (n - 1) / (h / 2)]),
            boundary_distance=R - r,
        )
    elif domain.kind == "interval":
        (a, b), = domain.bounds
        h = (b - a) / N
        x = a + (np.arange(N) + 0.5) * h
        lower, upper = _axis_links(N, DIRICHLET, DIRICHLET)
        bmask = np.zeros(N, dtype=bool)
        bmask[[0, -1]] = True
        grid = SpaceGrid(
            domain=domain, resolution=N, shape=(N,), nodes=x,
            quad_weights=np.full(N, h), boundary_mask=bmask, spacings=(h,),
            lower=(lower,), upper=(upper,),
            face_left=np.arange(N - 1), face_right=np.arange(1, N),
            face_cond=np.full(N - 1, 1.0 / h),
            bface_cell=np.array([0, N - 1]),
            bface_cond=np.full(2, 2.0 / h),
            boundary_distance=np.minimum(x - a, b - x),
        )
    else:
        (ax, bx), (ay, by) = domain.bounds
        hx, hy = (bx - ax) / N, (by - ay) / N
        x = ax + (np.arange(N) + 0.5) * hx
        y = ay + (np.arange(N) + 0.5) * hy
        X, Y = np.meshgrid(x, y, indexing="ij")
        idx = np.arange(N * N).reshape(N, N)  # idx[i, j], i along x
        pts = np.column_stack([X.ravel(), Y.ravel()])

        def links(axis):
            lo = np.full((N, N), DIRICHLET)
            hi = np.full((N, N), DIRICHLET)
            if axis == 0:
                lo[1:, :] = idx[:-1, :]
                hi[:-1, :] = idx[1:, :]
            else:
                lo[:, 1:] = idx[:, :-1]
                hi[:, :-1] = idx[:, 1:]
            return lo.ravel(), hi.ravel()

        lx, ux = links(0)
        ly, uy = links(1)
        fl = np.concatenate([idx[:-1, :].ravel(), idx[:, :-1].ravel()])
        fr = np.concatenate([idx[1:, :].ravel(), idx[:, 1:].ravel()])
        fc = np.concatenate([np.full((N - 1) * N, hy / hx), np.full(N * (N - 1), hx / hy)])
        bcells = np.concatenate([idx[0, :], idx[-1, :], idx[:, 0], idx[:, -1]])
        bcond = np.concatenate([np.full(2 * N, 2 * hy / hx), np.full(2 * N, 2 * hx / hy)])
        bmask = np.zeros(N * N, dtype=bool)
        bmask[bcells] = True
        dist = np.minimum.reduce([pts[:, 0] - ax, bx - pts[:, 0], pts[:, 1] - ay, by - pts[:, 1]])
        grid = SpaceGrid(
            domain=domain, resolution=N, shape=(N, N), nodes=pts,
            quad_weights=np.full(N * N, hx * hy), boundary_mask=bmask,
            spacings=(hx, hy), lower=(lx, ly), upper=(ux, uy),
            face_left=fl, face_right=fr, face_cond=fc,
            bface_cell=bcells, bface_cond=bcond, boundary_distance=dist,
        )
    _readonly(grid.nodes, grid.quad_weights, grid.boundary_mask, grid.face_cond,
              grid.bface_cond, grid.boundary_distance, *grid.lower, *grid.upper)
    return grid


def quadrature(values, grid: SpaceGrid) -> float:
    """Midpoint rule: sum_j values_j * w_j."""
    v = np.asarray(values, dtype=float)
    if v.shape != grid.quad_weights.shape:
        raise ContractViolation(
            f"field has shape {v.shape}, grid expects {grid.quad_weights.shape}")
    return float(np.dot(v, grid.quad_weights))


@dataclass(frozen=True)
class SubdomainSchedule:
    """Nested interior subdomains {dist(x, boundary) >= eps_m}."""

    base: Domain
    levels: tuple[float, ...]

    def __post_init__(self):
        lv = tuple(float(e) for e in self.levels)
        object.__setattr__(self, "levels", lv)
        if not lv:
            raise ConfigurationError("a subdomain schedule needs at least one level")
        if any(e <= 0 for e in lv):
            raise ConfigurationError("shrink distances must be positive")
        if any(a <= b for a, b in zip(lv, lv[1:])):
            raise ConfigurationError("shrink distances must be strictly decreasing")

    def __len__(self):
        return len(self.levels)


def subdomain_grid(grid: SpaceGrid, schedule: SubdomainSchedule, m: int) -> np.ndarray:
    """Boolean mask of nodes at distance >= eps_m from the boundary."""
    if not 0 <= m < len(schedule):
        raise ContractViolation(f"level {m} outside schedule of length {len(schedule)}")
    if schedule.base != grid.domain:
        raise ContractViolation("schedule and grid refer to different domains")
    eps = schedule.levels[m]
    if eps >= grid.domain.inradius():
        raise EmptySubdomainError(
            f"shrink distance {eps} is not below the inradius {grid.domain.inradius()}")
    # tolerance absorbs rounding in the node coordinates
    mask = grid.boundary_distance >= eps - 1e-12 * grid.domain.inradius()
    if not mask.any():
        raise EmptySubdomainError(f"no grid nodes at distance >= {eps} from the boundary")
    return mask


def interior_distance_mask(grid: SpaceGrid, eps: float) -> np.ndarray:
    return grid.boundary_distance >= eps - 1e-12 * grid.domain.inradius()


def as_domain(spec: dict | Domain) -> Domain:
    if isinstance(spec, Domain):
        return spec
    kind = spec.get("kind")
    if kind == "radial_ball":
        return Domain.ball(spec.get("n", 2), spec.get("radius", 1.0))
    if kind == "interval":
        b = spec.get("bounds", [0.0, 1.0])
        if len(b) == 1 and isinstance(b[0], Sequence):
            b = b[0]
        return Domain.interval(*b)
    if kind == "rectangle":
        b = spec.get("bounds", [[0.0, 1.0], [0.0, 1.0]])
        return Domain.rectangle(*b)
    raise ConfigurationError(f"unknown domain kind {kind!r}; expected one of {DOMAIN_KINDS}")


def restrict(fine: SpaceGrid, coarse: SpaceGrid, values) -> np.ndarray:
    """Weighted cell averages of a fine-grid field onto a grid twice as coarse."""
    if fine.domain != coarse.domain or fine.resolution != 2 * coarse.resolution:
        raise ContractViolation("restriction needs the same domain at half the resolution")
    v = np.asarray(values, dtype=float)
    w = fine.quad_weights
    if fine.n_axes == 1:
        num = (v * w).reshape(-1, 2).sum(axis=1)
        den = w.reshape(-1, 2).sum(axis=1)
    else:
        N = coarse.resolution
        num = (v * w).reshape(N, 2, N, 2).sum(axis=(1, 3)).ravel()
        den = w.reshape(N, 2, N, 2).sum(axis=(1, 3)).ravel()
    return num / den
