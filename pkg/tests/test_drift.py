import math

import numpy as np
import pytest
from scipy import integrate

from driftlab.drift import (Affine, Constant, Instability, Kinked, Linear, MollifierConfig,
                            NonUniqueness, RadialPower, Sampled, b0_profile, check_nonspectral,
                            default_tolerance, divergence, drift_from_dict, eval_drift, mollify)
from driftlab.errors import ConfigurationError, ContractViolation
from driftlab.fields import ScalarField, weak_lp_quasinorm
from driftlab.grid import Domain, SubdomainSchedule, TimeGrid, build_grid, quadrature, subdomain_grid


def fd_divergence(spec, x, t, h=1e-5):
    """Central-difference divergence of the pointwise field."""
    x = np.asarray(x, dtype=float)
    tot = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        tot += (eval_drift(spec, x + e, t)[i] - eval_drift(spec, x - e, t)[i]) / (2 * h)
    return tot


def test_radial_power_point():
    np.testing.assert_allclose(eval_drift(RadialPower(3), [0.5, 0, 0], 0.0), [6, 0, 0], rtol=1e-14)


def test_instability_at_kink_radius():
    x = [math.exp(-1), 0.0]
    np.testing.assert_allclose(eval_drift(Instability(2, 0.5), x, 0.0), 0.5 * np.array(x), rtol=1e-14)


def test_b0_bounds():
    r, t = np.meshgrid(np.linspace(1e-3, 1, 60), np.linspace(1e-3, 1, 60))
    b = b0_profile(r, t, 2)
    assert b.min() >= 1 - 1e-12 and b.max() <= 2 + 1e-12


@pytest.mark.parametrize("spec,n", [(RadialPower(0.5), 2), (RadialPower(1.5), 3),
                                    (NonUniqueness(2), 2), (NonUniqueness(3), 3),
                                    (Instability(2, 0.3), 2), (Instability(3, 0.3), 3),
                                    (Kinked(-1.0, 0.5), 2), (Linear(-2.0), 3)])
def test_closed_divergence_matches_finite_differences(spec, n, rng):
    for _ in range(5):
        x = rng.uniform(-0.6, 0.6, n)
        t = rng.uniform(0.05, 1.0)
        ref = fd_divergence(spec, x, t)
        val = float(np.atleast_1d(spec.closed_divergence(x[None, :] if not spec.is_radial
                                                          else np.array([np.linalg.norm(x)]), t, n))[0])
        assert val == pytest.approx(ref, rel=1e-6, abs=1e-6)


def test_radial_power_divergence_formula():
    r = np.array([0.2, 0.7])
    np.testing.assert_allclose(RadialPower(2.0).closed_divergence(r, 0, 3), 2.0 / r**2)


def test_instability_divergence_sign():
    r = np.array([0.1, 0.3, 0.55, 0.62, 0.9])
    d = Instability(2, 0.4).closed_divergence(r, 0, 2)
    np.testing.assert_array_equal(d > 0, r < math.exp(-0.5))


def test_linear_divergence_everywhere():
    for dom in (Domain.interval(-1, 1), Domain.rectangle(), Domain.ball(3)):
        g = build_grid(dom, 12)
        np.testing.assert_allclose(divergence(Linear(1.0), g, 0.0, method="analytic"), g.dim)


def test_discrete_divergence_consistent():
    g = build_grid(Domain.ball(3), 200)
    d = divergence(Linear(-1.0), g, 0.0, method="discrete")
    inner = g.nodes < 0.9
    np.testing.assert_allclose(d[inner], -3.0, atol=3 * 3 * g.h / g.nodes[inner].min() + 1e-9)
    g2 = build_grid(Domain.rectangle(), 40)
    d2 = divergence(Affine(((-1.0, 0.0), (0.0, -2.0)), (2.0, 3.0)), g2, 0.0, method="discrete")
    x = g2.points()
    interior = np.all((x > 0.05) & (x < 0.95), axis=1)
    np.testing.assert_allclose(d2[interior], -3.0, atol=1e-12)


def test_check_nonspectral_verdicts():
    g = build_grid(Domain.ball(3), 40)
    tg = TimeGrid(1.0, 10)
    good = check_nonspectral(Linear(-1.0), g, tg)
    assert good.passed and good.max_divergence == pytest.approx(-3.0)
    bad = check_nonspectral(Linear(1.0), g, tg)
    assert not bad.passed and bad.max_divergence == pytest.approx(3.0)
    nu = check_nonspectral(NonUniqueness(3), g, tg)
    assert nu.verdict == "fail" and nu.argmax_node == 0
    assert nu.max_divergence > nu.tolerance


def test_check_nonspectral_tolerance_rule():
    g = build_grid(Domain.rectangle(), 20)
    tg = TimeGrid(1.0, 4)
    spec = Constant((0.0, 1e-12))
    assert default_tolerance(spec, g, tg) == pytest.approx(1e-10 * (1 + 1e-12 / g.h))
    rep = check_nonspectral(Kinked(-1.0, 0.25), g, tg, tol=0.0)
    assert rep.passed == (rep.max_divergence <= 0.0)
    with pytest.raises(ContractViolation):
        check_nonspectral(Kinked(-1.0, 0.25), g, tg, tol=-1.0)


def test_region_restriction():
    g = build_grid(Domain.ball(2), 50)
    tg = TimeGrid(1.0, 2)
    spec = Instability(2, 0.4)
    mask = g.nodes > 0.7
    assert not check_nonspectral(spec, g, tg).passed
    assert check_nonspectral(spec, g, tg, region=mask).passed


def test_weak_norm_bounded_across_resolutions():
    for spec in (RadialPower(0.5), Instability(2, 0.3)):
        vals = []
        for N in (100, 200, 400):
            g = build_grid(Domain.ball(2), N)
            mag = np.abs(spec.radial(g.nodes, 0.5))
            vals.append(weak_lp_quasinorm(ScalarField(g, mag), 2))
        assert max(vals) / min(vals) < 1.05


def test_kernel_unit_mass_and_symmetry(rng):
    for dims in (1, 2, 3):
        cfg = MollifierConfig(0.3)
        radial, _ = integrate.quad(lambda s: s ** (dims - 1) * cfg.kernel(np.eye(dims)[:1] * s)[0],
                                   0, 0.3, epsabs=1e-14)
        area = {1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi}[dims]
        assert area * radial == pytest.approx(1.0, abs=1e-10)
        z = rng.uniform(-0.3, 0.3, (20, dims))
        np.testing.assert_allclose(cfg.kernel(z), cfg.kernel(-z))


def test_stencil():
    st = MollifierConfig(0.1).stencil([0.02, 0.025], dt=0.05)
    assert st.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(st, st[::-1, ::-1, ::-1])
    assert st.shape == (5, 11, 9)


def test_mollify_constant_and_affine():
    g = build_grid(Domain.rectangle(), 40)
    tg = TimeGrid(1.0, 8)
    sched = SubdomainSchedule(g.domain, (0.2,))
    inner = subdomain_grid(g, sched, 0)
    out = mollify(Constant((1.5, -0.5)), MollifierConfig(0.1), g, tg, sched, 0)
    np.testing.assert_allclose(out.data[:, inner], np.broadcast_to([1.5, -0.5], out.data[:, inner].shape), atol=1e-12)
    A = Affine(((-1.0, 0.3), (0.2, -0.5)), (0.1, 0.0))
    out = mollify(A, MollifierConfig(0.1), g, tg, sched, 0)
    exact = A.vector(g.points(), 0.0)
    np.testing.assert_allclose(out.data[-1][inner], exact[inner], atol=1e-8)


def test_mollify_rejects():
    tg = TimeGrid(1.0, 4)
    with pytest.raises(ConfigurationError):
        mollify(Linear(-1.0), MollifierConfig(0.1), build_grid(Domain.ball(2), 20), tg)
    g = build_grid(Domain.interval(), 40)
    with pytest.raises(ConfigurationError):
        mollify(Linear(-1.0), MollifierConfig(0.3), g, tg, SubdomainSchedule(g.domain, (0.2,)), 0)
    with pytest.raises(ConfigurationError):
        MollifierConfig(0.0)


@pytest.mark.parametrize("dom,spec", [(Domain.interval(), Kinked(-1.0, 0.3)),
                                      (Domain.rectangle(), Kinked(-2.0, 0.25)),
                                      (Domain.rectangle(), Linear(-1.0))])
def test_mollify_keeps_sign(dom, spec):
    g = build_grid(dom, 80 if dom.dim == 1 else 40)
    tg = TimeGrid(1.0, 4)
    sched = SubdomainSchedule(g.domain, (0.2,))
    out = mollify(spec, MollifierConfig(0.1), g, tg, sched, 0)
    mask = subdomain_grid(g, sched, 0)
    assert check_nonspectral(out, g, tg, region=mask).passed


def test_mollify_convergence_rate():
    g = build_grid(Domain.interval(), 800)
    tg = TimeGrid(1.0, 2)
    x = g.nodes
    # Lipschitz, vanishing on the boundary, with an interior kink
    data = np.broadcast_to((x * (1 - x) * np.abs(x - 0.4))[None, :, None], (3, g.size, 1)).copy()
    base = Sampled(g, tg, data)
    errs = []
    scales = (0.08, 0.04, 0.02)
    for eps in scales:
        out = mollify(base, MollifierConfig(eps), g, tg)
        errs.append(math.sqrt(quadrature((out.data[-1, :, 0] - data[-1, :, 0]) ** 2, g)))
    rates = np.diff(np.log(errs)) / np.diff(np.log(scales))
    assert np.all(errs[1:] < errs[:-1])
    assert rates.min() >= 1.0


def test_sampled_csv_roundtrip(tmp_path):
    g = build_grid(Domain.rectangle(), 6)
    tg = TimeGrid(0.5, 3)
    s = Sampled.from_drift(Kinked(-1.0, 0.3), g, tg)
    s.to_csv(tmp_path / "b.csv")
    back = Sampled.from_csv(tmp_path / "b.csv", g, tg)
    np.testing.assert_array_equal(back.data, s.data)
    assert not back.time_dependent
    (tmp_path / "bad.csv").write_text("k,index,b0\n0,0,zz\n")
    with pytest.raises(ConfigurationError):
        Sampled.from_csv(tmp_path / "bad.csv", g, tg)


def test_drift_from_dict():
    assert isinstance(drift_from_dict({"kind": "instability", "eps": 0.4}, 2), Instability)
    with pytest.raises(ConfigurationError, match="radial_power"):
        drift_from_dict({"kind": "vortex"}, 2)
    with pytest.raises(ConfigurationError, match="alpha"):
        drift_from_dict({"kind": "radial_power"}, 2)
    with pytest.raises(ConfigurationError, match="bogus"):
        drift_from_dict({"kind": "linear", "rate": 1, "bogus": 2}, 2)
    b = drift_from_dict({"kind": "linear", "rate": -1, "scale": 3}, 2)
    np.testing.assert_allclose(eval_drift(b, [0.5, 0.5], 0), [-1.5, -1.5])
