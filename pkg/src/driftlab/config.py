"""Experiment configuration: JSON parsing, validation and defaults.

Unknown keys are rejected with the line on which they appear. Every default
is filled in, so the resolved config fully determines a run.
"""

from __future__ import annotations

import copy
import inspect
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .drift import DRIFT_PARAMS, KINDS
from .errors import ConfigurationError
from .grid import DOMAIN_KINDS, as_domain
from .harness import (run_duality_check, run_energy_experiment, run_instability_experiment,
                      run_l1_decay_experiment, run_max_principle_experiment,
                      run_stability_sweep, run_uniqueness_check, verify_heat_kernel_family,
                      verify_nonuniqueness_example)
from .harness.recipe import Setup
from .presets import INITIAL_PRESETS, SOURCE_PRESETS
from .solver import SCHEMES


@dataclass(frozen=True)
class ExperimentInfo:
    name: str
    runner: object
    reference: str
    needs_setup: bool
    params: tuple[str, ...]
    tolerances: tuple[str, ...]


EXPERIMENTS = {
    e.name: e for e in (
        ExperimentInfo("energy", run_energy_experiment,
                       "Theorem 1.2: energy estimate", True,
                       ("refine", "drift_scale"), ("stability", "slack_tol")),
        ExperimentInfo("l1_decay", run_l1_decay_experiment,
                       "Theorem 1.3: L1 norm does not increase", True,
                       ("t1", "t2"), ("rel_tol",)),
        ExperimentInfo("max_principle", run_max_principle_experiment,
                       "Theorem 1.6: maximum principle, s > (n+2)/2", True,
                       ("s", "drift_scale", "refine", "levels"), ("stability", "abs_tol")),
        ExperimentInfo("stability_sweep", run_stability_sweep,
                       "Theorem 1.7: L1 stability under L2 drift perturbation", True,
                       ("scales", "shrink", "u0_perturbation", "workers"), ("headroom",)),
        ExperimentInfo("nonuniqueness", verify_nonuniqueness_example,
                       "Proposition 1.5: second solution from zero data", False,
                       ("n", "samples", "seed", "times", "resolution"),
                       ("residual_tol", "identity_tol", "slope_margin")),
        ExperimentInfo("heat_kernel", verify_heat_kernel_family,
                       "Proposition 1.5: growing heat-kernel family, alpha < n/4", False,
                       ("n", "alpha", "times", "resolution", "weak_resolutions"),
                       ("slope_tol",)),
        ExperimentInfo("instability", run_instability_experiment,
                       "Proposition 1.8: instability when div b <= 0 fails", False,
                       ("eps_values", "a", "quad_resolution"), ("residual_tol", "quad_tol")),
        ExperimentInfo("duality", run_duality_check,
                       "Theorem 1.3: L1 bound by duality", True,
                       ("probes", "seed", "drift_scale"), ("factor", "identity_tol")),
        ExperimentInfo("uniqueness", run_uniqueness_check,
                       "Theorem 1.4: at most one weak solution", True,
                       ("levels",), ("min_order",)),
    )
}

TOP_KEYS = ("experiment", "domain", "time", "physics", "solver", "tolerances", "params", "output")
DOMAIN_KEYS = ("kind", "n", "radius", "bounds", "resolution")
TIME_KEYS = ("T", "steps")
PHYSICS_KEYS = ("nu", "drift", "u0", "f")
SOLVER_KEYS = ("advection_scheme", "time_scheme")
OUTPUT_KEYS = ("dir",)


def list_experiments() -> str:
    width = max(len(n) for n in EXPERIMENTS)
    return "\n".join(f"{name:<{width}}  {info.reference}" for name, info in EXPERIMENTS.items())


def _defaults(fn) -> dict:
    return {k: p.default for k, p in inspect.signature(fn).parameters.items()
            if p.default is not inspect.Parameter.empty}


def _plainify(v):
    if isinstance(v, tuple):
        return [_plainify(x) for x in v]
    return v


class _Locator:
    """Maps keys back to line numbers of the source text."""

    def __init__(self, text: str, source: str):
        self.text, self.source = text, source

    def line(self, key: str) -> int | None:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text[: m.start()].count("\n") + 1 if m else None

    def fail(self, msg: str, key: str | None = None):
        ln = self.line(key) if key else None
        where = f"{self.source}:{ln}" if ln else self.source
        raise ConfigurationError(f"{where}: {msg}")


def _check_keys(block: dict, allowed, where: str, loc: _Locator):
    if not isinstance(block, dict):
        loc.fail(f"'{where}' must be an object")
    for k in block:
        if k not in allowed:
            loc.fail(f"unknown key '{k}' in '{where}' (allowed: {', '.join(allowed)})", k)


@dataclass
class RunConfig:
    experiment: str
    setup: dict | None
    params: dict
    tolerances: dict
    output_dir: str | None = None
    source: str = "<config>"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def info(self) -> ExperimentInfo:
        return EXPERIMENTS[self.experiment]

    def build_setup(self) -> Setup | None:
        if self.setup is None:
            return None
        s = self.setup
        return Setup(domain=as_domain(s["domain"]), resolution=s["domain"]["resolution"],
                     T=s["time"]["T"], steps=s["time"]["steps"], nu=s["physics"]["nu"],
                     drift=copy.deepcopy(s["physics"]["drift"]), u0=s["physics"]["u0"],
                     f=s["physics"]["f"], scheme=s["solver"]["advection_scheme"])

    def kwargs(self) -> dict:
        kw = dict(self.params)
        kw.update(self.tolerances)
        setup = self.build_setup()
        if setup is not None:
            kw["setup"] = setup
        return kw

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment}
        if self.setup is not None:
            out.update(copy.deepcopy(self.setup))
        out["params"] = dict(self.params)
        out["tolerances"] = dict(self.tolerances)
        return out


def _validate_ranges(exp: str, params: dict, setup: dict | None, loc: _Locator):
    if exp == "max_principle":
        n = setup["domain"]["n"]
        s = params.get("s")
        if s is None:
            loc.fail("max_principle needs params.s", "params")
        if not s > (n + 2) / 2:
            loc.fail(f"s must exceed (n+2)/2 = {(n + 2) / 2:g} (got s = {s:g}); "
                     "the maximum principle needs f in L_s with s > (n+2)/2", "s")
    if exp == "heat_kernel" and not params["alpha"] < params["n"] / 4:
        loc.fail(f"alpha must be below n/4 = {params['n'] / 4:g}", "alpha")
    if exp == "instability":
        if not all(0 < e < 1 for e in params["eps_values"]):
            loc.fail("every eps must lie in (0, 1)", "eps_values")
        if not 1 < params["a"] < 2:
            loc.fail("a must lie in (1, 2)", "a")
    if exp == "nonuniqueness" and params["n"] < 2:
        loc.fail("the non-uniqueness construction needs n >= 2", "n")


def _resolve_setup(raw: dict, loc: _Locator) -> dict:
    for key in ("domain", "time"):
        if key not in raw:
            loc.fail(f"missing required block '{key}'")
    dom = copy.deepcopy(raw["domain"])
    _check_keys(dom, DOMAIN_KEYS, "domain", loc)
    if "kind" not in dom:
        loc.fail("missing key 'kind' in 'domain'", "domain")
    if dom["kind"] not in DOMAIN_KINDS:
        loc.fail(f"unknown domain kind '{dom['kind']}' (expected one of {', '.join(DOMAIN_KINDS)})",
                 "kind")
    if "resolution" not in dom:
        loc.fail("missing key 'resolution' in 'domain'", "domain")
    try:
        d = as_domain(dom)
    except (ConfigurationError, TypeError) as exc:
        loc.fail(str(exc), "domain")
    dom.setdefault("n", d.dim)
    if d.is_radial:
        dom.setdefault("radius", d.radius)
    else:
        dom.setdefault("bounds", [list(b) for b in d.bounds])
    tm = copy.deepcopy(raw["time"])
    _check_keys(tm, TIME_KEYS, "time", loc)
    for k in TIME_KEYS:
        if k not in tm:
            loc.fail(f"missing key '{k}' in 'time'", "time")
    phys = copy.deepcopy(raw.get("physics", {}))
    _check_keys(phys, PHYSICS_KEYS, "physics", loc)
    phys.setdefault("nu", 1.0)
    if d.is_radial:
        phys.setdefault("drift", {"kind": "linear", "rate": 0.0})
    else:
        phys.setdefault("drift", {"kind": "constant", "value": [0.0] * len(d.bounds)})
    phys.setdefault("u0", "bump")
    phys.setdefault("f", "zero")
    drift = phys["drift"]
    if not isinstance(drift, dict) or "kind" not in drift:
        loc.fail("physics.drift must be an object with a 'kind'", "drift")
    if drift["kind"] not in KINDS:
        loc.fail(f"unknown drift kind '{drift['kind']}'; catalog kinds are {', '.join(KINDS)}",
                 "kind")
    for k in drift:
        if k not in DRIFT_PARAMS[drift["kind"]] | {"kind", "scale"}:
            loc.fail(f"unknown key '{k}' for drift kind '{drift['kind']}'", k)
    for key, allowed in (("u0", INITIAL_PRESETS), ("f", SOURCE_PRESETS)):
        v = phys[key]
        name = v.get("preset") if isinstance(v, dict) else v
        if name not in allowed:
            loc.fail(f"unknown {key} preset '{name}' (expected one of {', '.join(allowed)})", key)
    if not phys["nu"] > 0:
        loc.fail("nu must be positive", "nu")
    sol = copy.deepcopy(raw.get("solver", {}))
    _check_keys(sol, SOLVER_KEYS, "solver", loc)
    sol.setdefault("advection_scheme", "upwind")
    sol.setdefault("time_scheme", "backward_euler")
    if sol["advection_scheme"] not in SCHEMES:
        loc.fail(f"unknown advection scheme '{sol['advection_scheme']}'", "advection_scheme")
    if sol["time_scheme"] != "backward_euler":
        loc.fail("only time_scheme 'backward_euler' is available", "time_scheme")
    return {"domain": dom, "time": tm, "physics": phys, "solver": sol}


def config_from_dict(raw: dict, source: str = "<config>", text: str | None = None) -> RunConfig:
    loc = _Locator(text if text is not None else json.dumps(raw, indent=2), source)
    _check_keys(raw, TOP_KEYS, "config", loc)
    exp = raw.get("experiment")
    if exp is None:
        loc.fail("missing key 'experiment'")
    if exp not in EXPERIMENTS:
        loc.fail(f"unknown experiment '{exp}' (expected one of {', '.join(EXPERIMENTS)})",
                 "experiment")
    info = EXPERIMENTS[exp]
    defaults = _defaults(info.runner)
    params = raw.get("params", {})
    tols = raw.get("tolerances", {})
    _check_keys(params, info.params, "params", loc)
    _check_keys(tols, info.tolerances, "tolerances", loc)
    for k, v in tols.items():
        if not isinstance(v, (int, float)) or not v > 0:
            loc.fail(f"tolerance '{k}' must be a positive number", k)
    params = {k: _plainify(params.get(k, defaults.get(k))) for k in info.params}
    tols = {k: _plainify(tols.get(k, defaults.get(k))) for k in info.tolerances}
    if exp == "l1_decay" and params["t2"] is None:
        params["t2"] = raw.get("time", {}).get("T")
    setup = None
    if info.needs_setup:
        setup = _resolve_setup(raw, loc)
    else:
        for key in ("domain", "time", "physics", "solver"):
            if key in raw:
                loc.fail(f"experiment '{exp}' is closed-form and takes no '{key}' block", key)
    _validate_ranges(exp, params, setup, loc)
    out = raw.get("output", {})
    _check_keys(out, OUTPUT_KEYS, "output", loc)
    return RunConfig(exp, setup, params, tols, out.get("dir"), source, raw)


def parse_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}: malformed JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw, str(path), text)


def _interval_setup(N, T, K, drift, u0, f):
    return {"domain": {"kind": "interval", "bounds": [0.0, 1.0], "resolution": N},
            "time": {"T": T, "steps": K},
            "physics": {"nu": 1.0, "drift": drift, "u0": u0, "f": f}}


_LIN = {"kind": "linear", "rate": -1.0}
_KINK = {"kind": "kinked", "rate": -1.0, "kink": 0.3, "center": 0.5}

DEFAULT_CONFIGS = {
    "energy": {"experiment": "energy", **_interval_setup(100, 0.5, 100, _LIN, "bump", "one")},
    "l1_decay": {"experiment": "l1_decay",
                 **_interval_setup(200, 1.0, 400, _LIN, "signed_bumps", "zero")},
    "max_principle": {"experiment": "max_principle",
                      **_interval_setup(200, 1.0, 400, _LIN, "zero", "one"),
                      "params": {"s": 3.0}},
    "stability_sweep": {"experiment": "stability_sweep",
                        **_interval_setup(200, 0.5, 200, _KINK, "bump", "one"),
                        "params": {"scales": [0.2, 0.1, 0.05, 0.025]}},
    "nonuniqueness": {"experiment": "nonuniqueness", "params": {"n": 2}},
    "heat_kernel": {"experiment": "heat_kernel", "params": {"n": 2, "alpha": 0.0}},
    "instability": {"experiment": "instability", "params": {"eps_values": [0.5, 0.25, 0.1]}},
    "duality": {"experiment": "duality", **_interval_setup(200, 0.5, 200, _LIN, "bump", "one")},
    "uniqueness": {"experiment": "uniqueness", **_interval_setup(50, 0.5, 50, _KINK, "bump", "one")},
}


def default_config(name: str) -> RunConfig:
    if name not in DEFAULT_CONFIGS:
        raise ConfigurationError(f"unknown experiment '{name}'")
    return config_from_dict(copy.deepcopy(DEFAULT_CONFIGS[name]), f"<default:{name}>")
