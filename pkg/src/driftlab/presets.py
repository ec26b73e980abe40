"""Named initial data and sources.

Every preset is written in normalized coordinates, so the same name gives
comparable data on intervals, rectangles and balls of any size.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .grid import SpaceGrid

INITIAL_PRESETS = ("zero", "bump", "parabola", "sine", "signed_bumps", "log")
SOURCE_PRESETS = ("zero", "one", "bump")


def _coords(grid: SpaceGrid) -> np.ndarray:
    if grid.is_radial:
        return grid.normalized_radius().reshape(-1, 1)
    return grid.normalized_coordinates()


def _bump(rho, width=0.6):
    return np.clip(1.0 - (rho / width) ** 2, 0.0, None) ** 2


def _shape(name: str, grid: SpaceGrid) -> np.ndarray:
    z = _coords(grid)
    rho = np.linalg.norm(z, axis=1)
    if name == "zero":
        return np.zeros(grid.size)
    if name == "one":
        return np.ones(grid.size)
    if name == "bump":
        return _bump(rho)
    if name == "parabola":
        if grid.is_radial:
            return 1.0 - rho**2
        return np.prod(1.0 - z**2, axis=1)
    if name == "sine":
        return np.prod(np.cos(0.5 * np.pi * z), axis=1)
    if name == "signed_bumps":
        if grid.is_radial:
            return _bump(rho, 0.35) - _bump(np.abs(rho - 0.65), 0.3)
        shift = np.zeros(z.shape[1])
        shift[0] = 0.5
        return (_bump(np.linalg.norm(z + shift, axis=1), 0.45)
                - _bump(np.linalg.norm(z - shift, axis=1), 0.45))
    if name == "log":
        if not grid.is_radial:
            raise ConfigurationError("the 'log' preset is defined on balls only")
        return np.log(rho)
    raise ConfigurationError(f"unknown preset {name!r}")


def _resolve(spec, grid: SpaceGrid, allowed) -> np.ndarray:
    if isinstance(spec, str):
        name, amp = spec, 1.0
    elif isinstance(spec, dict):
        extra = set(spec) - {"preset", "amplitude"}
        if extra:
            raise ConfigurationError(f"unknown key {sorted(extra)[0]!r} in preset block")
        name, amp = spec.get("preset"), float(spec.get("amplitude", 1.0))
    else:
        raise ConfigurationError(f"preset must be a name or a block, got {spec!r}")
    if name not in allowed:
        raise ConfigurationError(f"unknown preset {name!r}; expected one of {', '.join(allowed)}")
    return amp * _shape(name, grid)


def initial_field(spec, grid: SpaceGrid) -> np.ndarray:
    return _resolve(spec, grid, INITIAL_PRESETS)


def source_field(spec, grid: SpaceGrid) -> np.ndarray:
    return _resolve(spec, grid, SOURCE_PRESETS)
