"""Property-based checks of the discrete invariants over random certified drifts."""

import numpy as np
from hypothesis import given, settings, strategies as st

from driftlab.drift import Kinked, Linear, check_nonspectral
from driftlab.fields import ScalarField, lp_norm, truncate, weak_lp_quasinorm
from driftlab.grid import Domain, TimeGrid, build_grid
from driftlab.solver import ProblemSpec, solve_primal, step_matrix_report

drifts = st.one_of(
    st.builds(Linear, st.floats(-20, 0)),
    # div = rate * n - kink * sign(x_1 - center) <= 0 needs kink <= |rate|
    st.builds(lambda r, frac, c: Kinked(r, frac * abs(r), c),
              st.floats(-20, -0.01), st.floats(0.0, 0.95), st.floats(0.3, 0.7)),
)
domains = st.sampled_from([Domain.interval(0, 1), Domain.rectangle()])
SETTINGS = settings(max_examples=30, deadline=None)


def _problem(dom, drift, seed, nu, dt_scale, f=False):
    rng = np.random.default_rng(seed)
    g = build_grid(dom, 24 if dom.dim == 1 else 10)
    tg = TimeGrid(dt_scale * 8, 8)
    src = rng.normal(size=g.size) if f else None
    return ProblemSpec(g, tg, nu, drift, rng.normal(size=g.size), src)


@SETTINGS
@given(domains, drifts, st.integers(0, 2**31), st.floats(1e-3, 2), st.floats(1e-4, 10))
def test_max_principle_and_contractions(dom, drift, seed, nu, dt_scale):
    spec = _problem(dom, drift, seed, nu, dt_scale)
    assert check_nonspectral(drift, spec.grid, spec.times, method="discrete").passed
    res = solve_primal(spec)
    u = res.values
    u0 = spec.u0
    tol = 1e-12 * np.abs(u0).max()
    assert u.max() <= max(0.0, u0.max()) + tol
    assert u.min() >= min(0.0, u0.min()) - tol
    l1, l2 = res.l1.values, res.l2.values
    assert np.all(np.diff(l1) <= 1e-12 * l1[0])
    assert np.all(np.diff(l2) <= 1e-12 * l2[0])
    assert res.m_structure.all()


@SETTINGS
@given(domains, drifts, st.floats(1e-3, 2), st.floats(1e-4, 10))
def test_step_matrix_deficits(dom, drift, nu, dt_scale):
    spec = _problem(dom, drift, 0, nu, dt_scale)
    rep = step_matrix_report(spec)
    scale = rep.min_diagonal  # entries are O(diagonal); deficits are sums of such entries
    assert rep.m_structure
    assert rep.row_deficit.min() >= -1e-13 * scale
    assert rep.min_column_deficit >= -1e-13 * scale


@SETTINGS
@given(domains, drifts, st.integers(0, 2**31))
def test_l1_with_source(dom, drift, seed):
    spec = _problem(dom, drift, seed, 0.5, 0.01, f=True)
    res = solve_primal(spec)
    W = spec.grid.quad_weights
    fl1 = spec.times.dt * float(np.abs(spec.f) @ W)
    assert np.all(np.diff(res.l1.values) <= fl1 + 1e-12 * (res.l1.values[0] + fl1))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8), st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8),
       st.floats(1.0, 6.0))
def test_holder_and_chebyshev(a, b, p):
    g = build_grid(Domain.interval(0, 2), 8)
    u, v = ScalarField(g, np.array(a)), ScalarField(g, np.array(b))
    q = p / (p - 1) if p > 1 else np.inf
    prod = lp_norm(ScalarField(g, u.values * v.values), 1)
    assert prod <= lp_norm(u, p) * lp_norm(v, q) * (1 + 1e-12) + 1e-300
    assert weak_lp_quasinorm(u, p) <= lp_norm(u, p) * (1 + 1e-12)
    assert weak_lp_quasinorm(u, p, closed=True) <= lp_norm(u, p) * (1 + 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=5, max_size=5), st.floats(0.01, 5))
def test_truncation_identity(vals, delta):
    g = build_grid(Domain.interval(), 5)
    u = np.array(vals)
    t = truncate(ScalarField(g, u), delta).values
    assert np.all((0 <= t) & (t <= delta))
    np.testing.assert_allclose(t, np.clip(u, 0, None) - np.clip(u - delta, 0, None), atol=1e-15)
