"""Drift catalog, closed-form and discrete divergence, non-spectral
certification and space-time mollification on nested subdomains."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, signal

from .errors import ConfigurationError, ContractViolation
from .grid import SpaceGrid, SubdomainSchedule, TimeGrid, sphere_area
from .operators import discrete_divergence

CATALOG = ("radial_power", "nonuniqueness", "instability", "constant", "linear",
           "kinked", "sampled")


class DriftSpec:
    """A drift field b(x, t).

    Radial kinds define ``radial(r, t)``, the component of b along x/|x|.
    Every analytic kind defines ``vector`` for Cartesian points.
    """

    kind = "abstract"
    time_dependent = False
    is_radial = False

    def radial(self, r, t):
        raise ConfigurationError(f"drift kind {self.kind!r} is not radially symmetric")

    def vector(self, points, t):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        if np.any(r == 0):
            raise ContractViolation(f"{self.kind} drift is singular at x = 0")
        return (self.radial(r, t) / r)[:, None] * pts

    def closed_divergence(self, x, t, n):
        """Closed-form div b at radii (radial kinds) or points; None if unknown."""
        return None

    def sample(self, grid: SpaceGrid, t: float, k: int | None = None) -> np.ndarray:
        """Drift components at every node, shape (size, n_axes)."""
        if grid.is_radial:
            return np.asarray(self.radial(grid.nodes, t), dtype=float).reshape(-1, 1)
        return self.vector(grid.points(), t)

    def scaled(self, factor: float) -> "DriftSpec":
        return Scaled(self, float(factor))

    def to_dict(self) -> dict:
        return {"kind": self.kind}

    def max_magnitude(self, grid: SpaceGrid, times: TimeGrid) -> float:
        ks = range(1, times.K + 1) if self.time_dependent else [times.K]
        return max(float(np.max(np.abs(self.sample(grid, times.nodes[k], k)), initial=0.0))
                   for k in ks)


@dataclass(frozen=True)
class RadialPower(DriftSpec):
    """b = alpha x / |x|^2."""

    alpha: float
    kind = "radial_power"
    is_radial = True

    def radial(self, r, t):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ContractViolation("radial_power drift is singular at r = 0")
        return self.alpha / r

    def closed_divergence(self, x, t, n):
        r = np.asarray(x, dtype=float) if np.ndim(x) <= 1 else np.linalg.norm(x, axis=1)
        return self.alpha * (n - 2) / r**2

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class Linear(DriftSpec):
    """b = rate * x."""

    rate: float
    kind = "linear"
    is_radial = True

    def radial(self, r, t):
        return self.rate * np.asarray(r, dtype=float)

    def vector(self, points, t):
        return self.rate * np.atleast_2d(np.asarray(points, dtype=float))

    def closed_divergence(self, x, t, n):
        return np.full(np.shape(x)[0] if np.ndim(x) else 1, self.rate * n)

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class Affine(DriftSpec):
    """b = A x + c (Cartesian grids only)."""

    matrix: tuple
    offset: tuple = ()
    kind = "affine"

    def vector(self, points, t):
        A = np.asarray(self.matrix, dtype=float)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(self.offset, dtype=float) if self.offset else 0.0
        return pts @ A.T + c

    def closed_divergence(self, x, t, n):
        return np.full(np.shape(x)[0], float(np.trace(np.asarray(self.matrix, dtype=float))))

    def to_dict(self):
        return {"kind": self.kind, "matrix": [list(r) for r in self.matrix],
                "offset": list(self.offset)}


@dataclass(frozen=True)
class Constant(DriftSpec):
    value: tuple
    kind = "constant"

    def vector(self, points, t):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v = np.asarray(self.value, dtype=float)
        if v.shape[0] != pts.shape[1]:
            raise ConfigurationError(
                f"constant drift has {v.shape[0]} components, domain has {pts.shape[1]} axes")
        return np.broadcast_to(v, pts.shape).copy()

    def closed_divergence(self, x, t, n):
        return np.zeros(np.shape(x)[0])

    def to_dict(self):
        return {"kind": self.kind, "value": list(self.value)}


@dataclass(frozen=True)
class Kinked(DriftSpec):
    """b = rate x - kink |x_1 - center| e_1: linear with a Lipschitz kink."""

    rate: float
    kink: float
    center: float = 0.5
    kind = "kinked"

    def vector(self, points, t):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        b = self.rate * pts
        b[:, 0] -= self.kink * np.abs(pts[:, 0] - self.center)
        return b

    def closed_divergence(self, x, t, n):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return self.rate * n - self.kink * np.sign(pts[:, 0] - self.center)

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate, "kink": self.kink, "center": self.center}


def zeta0(r, t):
    return np.expm1((np.asarray(r, dtype=float) - 1.0) / t)


def b0_profile(r, t, n):
    """n - 1 - zeta0 / ((2/r)(zeta0 + 1) - zeta0)."""
    r = np.asarray(r, dtype=float)
    z = zeta0(r, t)
    return n - 1 - z / ((2.0 / r) * (z + 1.0) - z)


def b0_profile_dr(r, t, n):
    r = np.asarray(r, dtype=float)
    E = np.exp((r - 1.0) / t)
    z = E - 1.0
    D = 2.0 * E / r - z
    D_r = 2.0 * E / (r * t) - 2.0 * E / r**2 - E / t
    return -((E / t) * D - z * D_r) / D**2


@dataclass(frozen=True)
class NonUniqueness(DriftSpec):
    """b = b0(|x|, t) x / |x|^2 carrying a nonzero solution from zero data."""

    n: int
    kind = "nonuniqueness"
    is_radial = True
    time_dependent = True

    def radial(self, r, t):
        if not t > 0:
            raise ContractViolation("nonuniqueness drift needs t > 0")
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ContractViolation("nonuniqueness drift is singular at r = 0")
        return b0_profile(r, t, self.n) / r

    def closed_divergence(self, x, t, n):
        r = np.asarray(x, dtype=float) if np.ndim(x) <= 1 else np.linalg.norm(x, axis=1)
        g = b0_profile(r, t, n)
        return b0_profile_dr(r, t, n) / r + g * (n - 2) / r**2

    def to_dict(self):
        return {"kind": self.kind, "n": self.n}


@dataclass(frozen=True)
class Instability(DriftSpec):
    """b = (n-2) x/|x|^2 - eps ln|x| x."""

    n: int
    eps: float
    kind = "instability"
    is_radial = True

    def radial(self, r, t):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ContractViolation("instability drift is singular at r = 0")
        return (self.n - 2) / r - self.eps * np.log(r) * r

    def closed_divergence(self, x, t, n):
        r = np.asarray(x, dtype=float) if np.ndim(x) <= 1 else np.linalg.norm(x, axis=1)
        return (self.n - 2) * (n - 2) / r**2 - self.eps * (n * np.log(r) + 1.0)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "eps": self.eps}


@dataclass(frozen=True)
class Scaled(DriftSpec):
    inner: DriftSpec
    factor: float
    kind = "scaled"

    @property
    def is_radial(self):
        return self.inner.is_radial

    @property
    def time_dependent(self):
        return self.inner.time_dependent

    def radial(self, r, t):
        return self.factor * self.inner.radial(r, t)

    def vector(self, points, t):
        return self.factor * self.inner.vector(points, t)

    def sample(self, grid, t, k=None):
        return self.factor * self.inner.sample(grid, t, k)

    def closed_divergence(self, x, t, n):
        d = self.inner.closed_divergence(x, t, n)
        return None if d is None else self.factor * d

    def to_dict(self):
        return {**self.inner.to_dict(), "scale": self.factor}


@dataclass(frozen=True, eq=False)
class Sampled(DriftSpec):
    """Grid data b[k, j, axis] on a fixed (SpaceGrid, TimeGrid) pair."""

    grid: SpaceGrid
    times: TimeGrid
    data: np.ndarray
    label: str = "sampled"
    provenance: dict = field(default_factory=dict)
    kind = "sampled"
    time_dependent = True

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim == 2:
            d = d[:, :, None]
        want = (self.times.K + 1, self.grid.size, self.grid.n_axes)
        if d.shape != want:
            raise ConfigurationError(f"sampled drift has shape {d.shape}, expected {want}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "time_dependent",
                           not bool(np.all(d == d[:1])))

    @property
    def is_radial(self):
        return self.grid.is_radial

    def _time_index(self, t, k):
        if k is not None:
            return int(k)
        return self.times.index_of(t)

    def sample(self, grid, t, k=None):
        if grid is not self.grid and not _same_grid(grid, self.grid):
            raise ConfigurationError("sampled drift used on a grid it was not sampled on")
        return self.data[self._time_index(t, k)]

    def _nearest(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ref = self.grid.points()
        if self.grid.is_radial:
            r = np.linalg.norm(pts, axis=1) if pts.shape[1] > 1 else np.abs(pts[:, 0])
            return np.abs(ref[:, 0][None, :] - r[:, None]).argmin(axis=1), r
        return np.linalg.norm(ref[None, :, :] - pts[:, None, :], axis=2).argmin(axis=1), None

    def radial(self, r, t):
        if not self.grid.is_radial:
            return super().radial(r, t)
        j, _ = self._nearest(np.asarray(r, dtype=float).reshape(-1, 1))
        return self.data[self._time_index(t, None)][j, 0]

    def vector(self, points, t):
        j, r = self._nearest(points)
        vals = self.data[self._time_index(t, None)][j]
        if self.grid.is_radial:
            pts = np.atleast_2d(np.asarray(points, dtype=float))
            return (vals[:, 0] / r)[:, None] * pts
        return vals

    def to_dict(self):
        return {"kind": self.kind, "label": self.label, **self.provenance}

    def to_csv(self, path) -> None:
        """Rows: time index, node index, components."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_index", "node_index",
                        *[f"b{a}" for a in range(self.grid.n_axes)]])
            for k in range(self.data.shape[0]):
                for j in range(self.data.shape[1]):
                    w.writerow([k, j, *("%.17g" % v for v in self.data[k, j])])

    @classmethod
    def from_csv(cls, path, grid: SpaceGrid, times: TimeGrid) -> "Sampled":
        data = np.zeros((times.K + 1, grid.size, grid.n_axes))
        seen = np.zeros((times.K + 1, grid.size), dtype=bool)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if len(header) != 2 + grid.n_axes:
                raise ConfigurationError(
                    f"{path}: expected {2 + grid.n_axes} columns, found {len(header)}")
            for line, row in enumerate(reader, start=2):
                try:
                    k, j = int(row[0]), int(row[1])
                    data[k, j] = [float(v) for v in row[2:]]
                except (ValueError, IndexError) as exc:
                    raise ConfigurationError(f"{path}:{line}: bad drift row {row!r}") from exc
                seen[k, j] = True
        if not seen.all():
            k, j = np.argwhere(~seen)[0]
            raise ConfigurationError(f"{path}: no value for time index {k}, node {j}")
        return cls(grid, times, data, label="sampled", provenance={"file": str(path)})

    @classmethod
    def from_drift(cls, spec: DriftSpec, grid: SpaceGrid, times: TimeGrid) -> "Sampled":
        t = times.nodes
        if spec.time_dependent:
            # t = 0 is never used by the implicit stepper; reuse the first step
            rows = [spec.sample(grid, t[max(k, 1)], k) for k in range(times.K + 1)]
        else:
            rows = [spec.sample(grid, t[-1])] * (times.K + 1)
        return cls(grid, times, np.stack(rows), label="sampled",
                   provenance={"source": spec.to_dict()})


def _same_grid(a: SpaceGrid, b: SpaceGrid) -> bool:
    return a.domain == b.domain and a.resolution == b.resolution


def eval_drift(spec: DriftSpec, x, t: float) -> np.ndarray:
    """b(x, t) at a single point."""
    return spec.vector(np.asarray(x, dtype=float).reshape(1, -1), t)[0]


def divergence(spec: DriftSpec, grid: SpaceGrid, t: float, k: int | None = None,
               method: str = "auto") -> np.ndarray:
    """div b at every node.

    ``auto`` uses the closed form when the kind has one and the discrete
    upwind adjoint deficit otherwise.
    """
    if method not in ("auto", "analytic", "discrete"):
        raise ContractViolation(f"unknown divergence method {method!r}")
    if method != "discrete":
        x = grid.nodes if grid.is_radial else grid.points()
        d = spec.closed_divergence(x, t, grid.dim)
        if d is not None:
            return np.asarray(d, dtype=float)
        if method == "analytic":
            raise ContractViolation(f"no closed-form divergence for {spec.kind!r}")
    return discrete_divergence(grid, spec.sample(grid, t, k))


@dataclass(frozen=True)
class NonSpectralReport:
    max_divergence: float
    verdict: str
    tolerance: float
    tested_region: str
    method: str
    argmax_node: int
    argmax_time: float

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {"max_divergence": self.max_divergence, "verdict": self.verdict,
                "tolerance": self.tolerance, "tested_region": self.tested_region,
                "method": self.method, "argmax_node": self.argmax_node,
                "argmax_time": self.argmax_time}


def default_tolerance(spec: DriftSpec, grid: SpaceGrid, times: TimeGrid) -> float:
    return 1e-10 * (1.0 + spec.max_magnitude(grid, times) / grid.h)


def check_nonspectral(spec: DriftSpec, grid: SpaceGrid, times: TimeGrid,
                      tol: float | None = None, region: np.ndarray | None = None,
                      region_label: str | None = None, method: str = "auto") -> NonSpectralReport:
    """Certify div b <= tol at every tested node and every step time t_1..t_K."""
    if tol is None:
        tol = default_tolerance(spec, grid, times)
    if tol < 0:
        raise ContractViolation("tolerance must be nonnegative")
    mask = np.ones(grid.size, dtype=bool) if region is None else np.asarray(region, dtype=bool)
    ks = range(1, times.K + 1) if spec.time_dependent else [times.K]
    best = (-math.inf, -1, math.nan)
    used = method
    for k in ks:
        t = times.nodes[k]
        div = divergence(spec, grid, t, k, method)
        if method == "auto":
            used = "analytic" if spec.closed_divergence(grid.nodes[:1] if grid.is_radial
                                                        else grid.points()[:1], t,
                                                        grid.dim) is not None else "discrete"
        sub = np.where(mask, div, -math.inf)
        j = int(np.argmax(sub))
        if sub[j] > best[0]:
            best = (float(sub[j]), j, float(t))
    label = region_label or ("all nodes" if region is None else f"{int(mask.sum())} of {grid.size} nodes")
    verdict = "pass" if best[0] <= tol else "fail"
    return NonSpectralReport(best[0], verdict, float(tol), label, used, best[1], best[2])


def _bump(rho2):
    out = np.zeros_like(rho2)
    inside = rho2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - rho2[inside]))
    return out


@dataclass(frozen=True)
class MollifierConfig:
    """Symmetric bump exp(-1/(1 - |z|^2)) on the unit space-time ball,
    scaled to radius ``scale``."""

    scale: float
    space_time: bool = True

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigurationError("mollifier scale must be positive")

    def normalization(self, dims: int) -> float:
        """int_{B^dims} exp(-1/(1-|z|^2)) dz."""
        val, _ = integrate.quad(lambda s: s ** (dims - 1) * math.exp(-1.0 / (1.0 - s * s)),
                                0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
        return sphere_area(dims) * val if dims > 1 else 2.0 * val

    def kernel(self, z: np.ndarray) -> np.ndarray:
        """Unit-mass kernel omega_eps(z) for z of shape (m, dims)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        dims = z.shape[1]
        rho2 = np.sum((z / self.scale) ** 2, axis=1)
        return _bump(rho2) / (self.normalization(dims) * self.scale**dims)

    def stencil(self, spacings, dt: float | None = None) -> np.ndarray:
        """Discrete weights on the lattice offsets, summing to 1.

        Axis order is (time, *space) when ``dt`` is given.
        """
        steps = ([dt] if dt is not None else []) + list(spacings)
        half = [int(math.floor(self.scale / s)) for s in steps]
        axes = [np.arange(-m, m + 1) * s / self.scale for m, s in zip(half, steps)]
        mesh = np.meshgrid(*axes, indexing="ij")
        w = _bump(sum(a**2 for a in mesh))
        return w / w.sum()


def mollify(spec: DriftSpec, config: MollifierConfig, grid: SpaceGrid, times: TimeGrid,
            schedule: SubdomainSchedule | None = None, level: int | None = None) -> Sampled:
    """Space-time convolution of the zero-extended drift, sampled on the grid.

    The spatial extension is by zero; the time extension repeats the end
    values, which leaves spatial divergence signs untouched.
    """
    if grid.is_radial:
        raise ConfigurationError("mollification is implemented for Cartesian grids only")
    if schedule is not None:
        eps_m = schedule.levels[level if level is not None else -1]
        if not config.scale < eps_m:
            raise ConfigurationError(
                f"mollifier scale {config.scale} must be below the subdomain distance {eps_m}")
    base = Sampled.from_drift(spec, grid, times) if not isinstance(spec, Sampled) else spec
    data = base.data  # (K+1, size, axes)
    use_time = config.space_time and base.time_dependent
    kern = config.stencil(grid.spacings, times.dt if use_time else None)
    out = np.empty_like(data)
    for a in range(grid.n_axes):
        comp = data[:, :, a].reshape((times.K + 1, *grid.shape))
        if use_time:
            pads = [(kern.shape[0] // 2,) * 2] + [(m // 2,) * 2 for m in kern.shape[1:]]
            padded = np.pad(comp, pads[:1] + [(0, 0)] * grid.n_axes, mode="edge")
            padded = np.pad(padded, [(0, 0)] + pads[1:], mode="constant")
            res = signal.fftconvolve(padded, np.flip(kern), mode="valid")
        else:
            pads = [(m // 2,) * 2 for m in kern.shape]
            res = np.stack([signal.fftconvolve(np.pad(c, pads, mode="constant"),
                                               np.flip(kern), mode="valid") for c in comp])
        out[:, :, a] = res.reshape(times.K + 1, grid.size)
    prov = {"source": spec.to_dict(), "scale": config.scale}
    return Sampled(grid, times, out, label="mollified", provenance=prov)


DRIFT_PARAMS = {
    "radial_power": {"alpha"},
    "nonuniqueness": {"n"},
    "instability": {"n", "eps"},
    "constant": {"value"},
    "linear": {"rate"},
    "affine": {"matrix", "offset"},
    "kinked": {"rate", "kink", "center"},
    "sampled": {"file"},
    "mollified": {"inner", "epsilon"},
}
KINDS = tuple(DRIFT_PARAMS)


def drift_from_dict(spec: dict, dim: int, grid: SpaceGrid | None = None,
                    times: TimeGrid | None = None) -> DriftSpec:
    """Build a drift from its config block; ``scale`` multiplies any kind."""
    if isinstance(spec, DriftSpec):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("drift block needs a 'kind' entry")
    kind = spec["kind"]
    if kind not in DRIFT_PARAMS:
        raise ConfigurationError(f"unknown drift kind {kind!r}; catalog kinds are {', '.join(KINDS)}")
    extra = set(spec) - DRIFT_PARAMS[kind] - {"kind", "scale"}
    if extra:
        raise ConfigurationError(f"unknown key {sorted(extra)[0]!r} for drift kind {kind!r}")

    def need(key):
        if key not in spec:
            raise ConfigurationError(f"drift kind {kind!r} needs parameter {key!r}")
        return spec[key]

    if kind == "radial_power":
        out = RadialPower(float(need("alpha")))
    elif kind == "nonuniqueness":
        out = NonUniqueness(int(spec.get("n", dim)))
    elif kind == "instability":
        out = Instability(int(spec.get("n", dim)), float(need("eps")))
    elif kind == "constant":
        out = Constant(tuple(float(v) for v in need("value")))
    elif kind == "linear":
        out = Linear(float(need("rate")))
    elif kind == "affine":
        out = Affine(tuple(tuple(float(v) for v in row) for row in need("matrix")),
                     tuple(float(v) for v in spec.get("offset", ())))
    elif kind == "kinked":
        out = Kinked(float(need("rate")), float(need("kink")), float(spec.get("center", 0.5)))
    elif kind == "sampled":
        if grid is None or times is None:
            raise ConfigurationError("sampled drifts need the run's grids")
        out = Sampled.from_csv(need("file"), grid, times)
    else:
        if grid is None or times is None:
            raise ConfigurationError("mollified drifts need the run's grids")
        inner = drift_from_dict(need("inner"), dim, grid, times)
        out = mollify(inner, MollifierConfig(float(need("epsilon"))), grid, times)
    scale = spec.get("scale", 1.0)
    return out if scale == 1.0 else out.scaled(float(scale))
