"""Declarative problem setups that experiments refine and rescale."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from ..drift import DriftSpec, check_nonspectral, drift_from_dict
from ..errors import ConfigurationError
from ..grid import Domain, SpaceGrid, TimeGrid, as_domain, build_grid
from ..presets import initial_field, source_field
from ..solver import ProblemSpec, SolverConfig


@dataclass(frozen=True, eq=False)
class Setup:
    """Everything needed to build a ProblemSpec at a chosen resolution."""

    domain: Domain
    resolution: int
    T: float
    steps: int
    nu: float = 1.0
    drift: dict = field(default_factory=lambda: {"kind": "constant", "value": [0.0]})
    u0: object = "bump"
    f: object = "zero"
    scheme: str = "upwind"

    def __post_init__(self):
        object.__setattr__(self, "domain", as_domain(self.domain))
        if not self.nu > 0:
            raise ConfigurationError(f"viscosity must be positive, got {self.nu}")

    def grid(self) -> SpaceGrid:
        return build_grid(self.domain, self.resolution)

    def times(self) -> TimeGrid:
        return TimeGrid(float(self.T), int(self.steps))

    def drift_spec(self, grid: SpaceGrid | None = None, times: TimeGrid | None = None) -> DriftSpec:
        return drift_from_dict(self.drift, self.domain.dim, grid or self.grid(),
                               times or self.times())

    def problem(self) -> ProblemSpec:
        grid, times = self.grid(), self.times()
        return ProblemSpec(grid, times, self.nu, self.drift_spec(grid, times),
                           initial_field(self.u0, grid), source_field(self.f, grid))

    def solver_config(self) -> SolverConfig:
        return SolverConfig(advection_scheme=self.scheme)

    def refined(self, factor: int = 2, time_factor: int | None = None) -> "Setup":
        tf = factor if time_factor is None else time_factor
        return replace(self, resolution=self.resolution * factor, steps=self.steps * tf)

    def scaled(self, factor: float) -> "Setup":
        d = copy.deepcopy(self.drift)
        d["scale"] = float(d.get("scale", 1.0)) * factor
        return replace(self, drift=d)

    def with_(self, **changes) -> "Setup":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(), "resolution": self.resolution,
                "T": self.T, "steps": self.steps, "nu": self.nu, "drift": self.drift,
                "u0": self.u0, "f": self.f, "scheme": self.scheme}


def certify(problem: ProblemSpec, tol: float | None = None) -> tuple[bool, dict]:
    """Discrete certificate (the scheme's contraction condition) plus the
    closed-form one when the drift has it."""
    disc = check_nonspectral(problem.drift, problem.grid, problem.times, tol, method="discrete")
    info = {"discrete": disc.to_dict()}
    ok = disc.passed
    probe = problem.grid.nodes[:1] if problem.grid.is_radial else problem.grid.points()[:1]
    if problem.drift.closed_divergence(probe, problem.times.T, problem.grid.dim) is not None:
        ana = check_nonspectral(problem.drift, problem.grid, problem.times, tol,
                                method="analytic")
        info["analytic"] = ana.to_dict()
        ok = ok and ana.passed
    info["verdict"] = "pass" if ok else "fail"
    return ok, info


def source_is_zero(problem: ProblemSpec) -> bool:
    return problem.f is None or not np.any(problem.f)
