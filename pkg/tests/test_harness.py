import json
import math

import numpy as np
import pytest
from scipy import integrate

from driftlab.errors import ConfigurationError
from driftlab.grid import Domain
from driftlab.harness import (ExperimentReport, InstabilityCertificate, Setup, find_instability_certificate,
                              run_duality_check, run_energy_experiment, run_instability_experiment,
                              run_l1_decay_experiment, run_max_principle_experiment, run_stability_sweep,
                              run_uniqueness_check, verify_heat_kernel_family, verify_nonuniqueness_example)
from driftlab.harness.analytic import (gradient_bound_constant, nonuniqueness_residual, search_delta,
                                       zeta_identity_residual)

LIN = {"kind": "linear", "rate": -1.0}
KINK = {"kind": "kinked", "rate": -1.0, "kink": 0.3, "center": 0.5}
EXPAND = {"kind": "linear", "rate": 1.0}


def interval(N=60, K=60, T=0.5, drift=LIN, u0="bump", f="one"):
    return Setup(Domain.interval(0, 1), N, T, K, 1.0, drift, u0, f)


def test_report_serialization():
    rep = ExperimentReport("demo", parameters={"x": np.float64(1.5), "v": np.arange(2)})
    rep.check("ok", 1.0, 2.0)
    rep.check("nan", math.nan, 1.0)
    assert rep.verdict == "fail" and rep.exit_code == 1
    assert rep.failed_checks() == ["nan"]
    d = json.loads(rep.to_json())
    assert list(d) == ["name", "verdict", "parameters", "tolerances", "certificate", "measured",
                       "checks", "notes"]
    assert d["parameters"]["v"] == [0, 1]
    assert rep.to_json() == rep.to_json()


def test_energy_zero_source_and_with_source():
    rep = run_energy_experiment(interval(f="zero"))
    assert rep.passed, rep.failed_checks()
    assert rep.get_check("energy_inequality").value <= 1e-10
    rep = run_energy_experiment(interval())
    assert rep.passed, rep.failed_checks()
    assert rep.get_check("C_emp_refinement_spread").value < 0.2
    zero = run_energy_experiment(interval(u0="zero", f="zero"))
    assert zero.passed and zero.get_check("max_abs_solution").value == 0.0


def test_l1_decay_variants():
    rep = run_l1_decay_experiment(interval(100, 100, u0="signed_bumps", f="zero"))
    assert rep.passed, rep.failed_checks()
    rep = run_l1_decay_experiment(interval(100, 100, u0="parabola", f="one"), t1=0.1, t2=0.4)
    assert rep.passed, rep.failed_checks()
    assert rep.get_check("stays_nonnegative").passed


@pytest.mark.parametrize("runner", [run_energy_experiment, run_l1_decay_experiment,
                                    run_duality_check, run_uniqueness_check])
def test_expanding_drift_is_gated(runner):
    rep = runner(interval(30, 20, drift=EXPAND))
    assert rep.verdict == "hypothesis_violated" and rep.exit_code == 2
    assert rep.checks == []
    assert rep.certificate["base"]["verdict"] == "fail"


def test_instability_drift_is_gated():
    s = Setup(Domain.ball(2), 40, 0.2, 10, 1.0, {"kind": "instability", "eps": 0.5}, "bump", "zero")
    for runner in (run_energy_experiment, run_l1_decay_experiment):
        assert runner(s).exit_code == 2
    assert run_max_principle_experiment(s, s=3.0).exit_code == 2


def test_max_principle():
    rep = run_max_principle_experiment(interval(100, 100, u0="zero"), s=3.0)
    assert rep.passed, rep.failed_checks()
    assert "levelsets" in rep.tables
    rep = run_max_principle_experiment(interval(100, 100, u0="signed_bumps", f="zero"), s=3.0)
    assert rep.passed and rep.get_check("sup_bound").value <= 1e-12
    with pytest.raises(ConfigurationError, match=r"\(n\+2\)/2"):
        run_max_principle_experiment(interval(), s=1.0)


def test_stability_sweep():
    rep = run_stability_sweep(interval(200, 100, drift=KINK))
    assert rep.passed, rep.failed_checks()
    d = rep.measured["solution_distance"]
    assert np.all(np.diff(d) < 0)
    with pytest.raises(ConfigurationError):
        run_stability_sweep(interval(drift=KINK), shrink=1.0)


def test_duality_check():
    rep = run_duality_check(interval(100, 100))
    assert rep.passed, rep.failed_checks()
    assert rep.get_check("duality_identity").value <= 1e-9


def test_uniqueness_check():
    rep = run_uniqueness_check(interval(25, 25, drift=KINK))
    assert rep.passed, rep.failed_checks()


def test_zeta_and_residual_oracles(rng):
    r = rng.uniform(0.01, 0.99, 50)
    t = rng.uniform(0.05, 1.0, 50)
    assert np.max(np.abs(zeta_identity_residual(r, t))) <= 1e-12
    for n in (2, 3):
        assert np.max(np.abs(nonuniqueness_residual(r, t, n))) <= 1e-8


@pytest.mark.parametrize("n", [2, 3])
def test_nonuniqueness_example(n):
    rep = verify_nonuniqueness_example(n)
    assert rep.passed, rep.failed_checks()
    assert rep.get_check("l2_slope").value >= n / 2 - 0.1
    assert gradient_bound_constant(n) > 0


@pytest.mark.parametrize("alpha", [0.0, 0.2])
def test_heat_kernel_family(alpha):
    rep = verify_heat_kernel_family(2, alpha)
    assert rep.passed, rep.failed_checks()
    assert rep.measured["l2_exponent"] == pytest.approx(1 - 2 * alpha, abs=0.02)


def test_heat_family_rejects_large_alpha():
    with pytest.raises(ConfigurationError):
        verify_heat_kernel_family(2, 0.6)


def test_instability_spot_value():
    l2_sq, _ = integrate.quad(lambda r: (r * math.log(r)) ** 2 * 2 * math.pi * r, 0, 1)
    l1, _ = integrate.quad(lambda r: -math.log(r) * 2 * math.pi * r, 0, 1)
    cert = InstabilityCertificate.at(0.5, 1.5, 0.5)
    t = 0.5 ** -1.5
    assert cert.horizon == pytest.approx(2.828, abs=1e-3)
    assert cert.perturbation_norm == pytest.approx(0.5 * math.sqrt(l2_sq * t), rel=1e-10)
    assert cert.perturbation_norm == pytest.approx(0.3725, abs=2e-4)
    assert cert.growth == pytest.approx(math.expm1(0.5 * t) * l1, rel=1e-10)
    assert cert.growth == pytest.approx(4.89, abs=5e-3)


@pytest.mark.parametrize("eps", [0.5, 0.25, 0.1])
def test_instability_search(eps):
    delta, _ = search_delta(eps, 1.5)
    cert, binding, quad = find_instability_certificate(eps, 1.5)
    assert cert.delta == delta
    assert cert.perturbation_norm < eps and cert.growth >= 1 / eps
    assert quad["residual"] <= 1e-10


def test_instability_experiment():
    rep = run_instability_experiment()
    assert rep.passed, rep.failed_checks()
    assert rep.certificate["instability_drift"]["verdict"] == "fail"
