import math

import numpy as np
import pytest

from driftlab.drift import Instability, Kinked, Linear, NonUniqueness, RadialPower
from driftlab.errors import ConfigurationError, ContractViolation, SolverDivergenceError
from driftlab.grid import Domain, TimeGrid, build_grid, quadrature
from driftlab.solver import (ProblemSpec, SolverConfig, adjoint_step_matrix, assembled_step_matrix,
                             duality_residual, solve_dual, solve_primal, step_matrix_report,
                             tridiagonal_bands)


def dense_interval_step(x, h, nu, c, dt):
    """Hand assembly of I + dt(-nu Lap + upwind b d/dx) with odd ghosts."""
    n = len(x)
    A = np.zeros((n, n))
    for i in range(n):
        A[i, i] += 2 * nu / h**2
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                A[i, j] -= nu / h**2
            else:
                A[i, i] += nu / h**2
        if c[i] > 0:
            A[i, i] += c[i] / h
            if i > 0:
                A[i, i - 1] -= c[i] / h
            else:
                A[i, i] += c[i] / h
        else:
            A[i, i] -= c[i] / h
            if i < n - 1:
                A[i, i + 1] += c[i] / h
            else:
                A[i, i] -= c[i] / h
    return np.eye(n) + dt * A


def heat_problem(N, K, T=0.1, nu=1.0, drift=None):
    g = build_grid(Domain.interval(0, 1), N)
    return ProblemSpec(g, TimeGrid(T, K), nu, drift or Linear(0.0), np.sin(np.pi * g.nodes))


def test_step_matrix_against_hand_assembly():
    spec = heat_problem(10, 5, drift=Kinked(-2.0, 0.3))
    g = spec.grid
    c = spec.drift.sample(g, 0.1)[:, 0]
    ref = dense_interval_step(g.nodes, g.h, 1.0, c, spec.times.dt)
    np.testing.assert_allclose(assembled_step_matrix(spec, None, 1).toarray(), ref, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("scheme", ["upwind", "centered"])
@pytest.mark.parametrize("dom", [Domain.interval(-1, 2), Domain.ball(2), Domain.ball(3)])
def test_bands_match_sparse(scheme, dom):
    g = build_grid(dom, 12)
    spec = ProblemSpec(g, TimeGrid(1.0, 3), 0.7, Linear(0.0), np.zeros(g.size))
    comps = np.stack([np.linspace(-3, 2, g.size), np.linspace(1, -1, g.size)])
    lo, di, up = tridiagonal_bands(g, 0.7, comps, 0.1, scheme)
    from driftlab.operators import step_matrix
    for s in range(2):
        A = step_matrix(g, 0.7, comps[s][:, None], 0.1, scheme).toarray()
        np.testing.assert_allclose(np.diag(A), di[s], rtol=1e-14)
        np.testing.assert_allclose(np.diag(A, -1), lo[s, 1:], rtol=1e-14, atol=1e-15)
        np.testing.assert_allclose(np.diag(A, 1), up[s, :-1], rtol=1e-14, atol=1e-15)


def test_heat_sine_error_and_order(kernel_backend):
    errs = []
    for N, K in ((20, 40), (40, 160)):
        spec = heat_problem(N, K)
        res = solve_primal(spec)
        x, t = spec.grid.nodes, spec.times.nodes
        exact = np.exp(-np.pi**2 * t)[:, None] * np.sin(np.pi * x)[None, :]
        errs.append(np.max(np.abs(res.values - exact)))
    assert errs[1] < errs[0] and math.log2(errs[0] / errs[1]) >= 1.8
    assert errs[0] <= 2 * (0.1 / 40 + 1 / 20**2)


def test_zero_data_stays_zero():
    for dom, drift in ((Domain.ball(2), Instability(2, 0.3)), (Domain.rectangle(), Kinked(-1.0, 0.2)),
                       (Domain.ball(3), NonUniqueness(3))):
        g = build_grid(dom, 16)
        res = solve_primal(ProblemSpec(g, TimeGrid(0.5, 10), 1.0, drift, np.zeros(g.size)))
        assert np.all(res.values == 0.0)


def _mms_ball(N, K, T=0.5, nu=1.0):
    g = build_grid(Domain.ball(2), N)
    tg = TimeGrid(T, K)
    r, t = g.nodes[None, :], tg.nodes[:, None]
    f = np.exp(-t) * (-(1 - r**2) + 4 * nu + 2 * r**2)
    spec = ProblemSpec(g, tg, nu, Linear(-1.0), 1 - g.nodes**2, f)
    return spec, np.exp(-t) * (1 - r**2)


def _mms_square(N, K, T=0.5, nu=1.0):
    g = build_grid(Domain.rectangle(), N)
    tg = TimeGrid(T, K)
    x, y = g.points().T
    s = np.sin(np.pi * x) * np.sin(np.pi * y)
    adv = -x * np.pi * np.cos(np.pi * x) * np.sin(np.pi * y) - y * np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    e = np.exp(-tg.nodes)[:, None]
    spec = ProblemSpec(g, tg, nu, Linear(-1.0), s, e * (-s + 2 * np.pi**2 * nu * s + adv))
    return spec, e * s


@pytest.mark.parametrize("make", [_mms_ball, _mms_square])
def test_manufactured_solution_order(make):
    errs = []
    # upwind advection: first order in h and dt together
    for N in (64, 128):
        spec, exact = make(N, N)
        res = solve_primal(spec)
        W = spec.grid.quad_weights
        errs.append(np.sqrt(np.max(((res.values - exact) ** 2) @ W)))
    assert errs[1] < 2e-3
    assert math.log2(errs[0] / errs[1]) >= 0.9


def test_dual_is_reversed_heat_flow():
    for dom in (Domain.interval(0, 1), Domain.ball(2), Domain.rectangle()):
        g = build_grid(dom, 16)
        tg = TimeGrid(0.2, 10)
        wT = np.cos(np.linspace(0, 3, g.size))
        spec = ProblemSpec(g, tg, 0.8, Linear(0.0), wT)
        dual = solve_dual(spec, np.zeros(g.size), wT)
        fwd = solve_primal(spec)
        np.testing.assert_allclose(dual.values[::-1], fwd.values, atol=1e-12)


def test_dual_zero_data():
    g = build_grid(Domain.rectangle(), 10)
    spec = ProblemSpec(g, TimeGrid(0.2, 5), 1.0, Kinked(-1.0, 0.2), np.zeros(g.size))
    assert np.all(solve_dual(spec, np.zeros(g.size), np.zeros(g.size)).values == 0.0)


@pytest.mark.parametrize("dom,drift", [(Domain.interval(0, 1), Kinked(-3.0, 0.3)),
                                       (Domain.ball(2), Instability(2, 0.25)),
                                       (Domain.rectangle(), Linear(-2.0)),
                                       (Domain.ball(3), RadialPower(0.5))])
def test_duality_identity(dom, drift, rng, kernel_backend):
    g = build_grid(dom, 20)
    tg = TimeGrid(0.3, 12)
    spec = ProblemSpec(g, tg, 0.5, drift, rng.normal(size=g.size), rng.normal(size=(tg.K + 1, g.size)))
    gsrc = rng.normal(size=(tg.K + 1, g.size))
    wT = rng.normal(size=g.size)
    res = duality_residual(solve_primal(spec), solve_dual(spec, gsrc, wT), spec, gsrc)
    assert res["rel_residual"] <= 1e-9


def test_step_report_signs():
    g = build_grid(Domain.interval(0, 1), 10)
    tg = TimeGrid(0.1, 2)
    for rate, expect in ((0.0, True), (-1.0, True), (1.0, False)):
        spec = ProblemSpec(g, tg, 1.0, Linear(rate), np.zeros(g.size))
        rep = step_matrix_report(spec)
        assert rep.m_structure
        assert np.all(rep.row_deficit >= -1e-12)
        assert (rep.min_column_deficit >= -1e-12) == expect


def test_column_deficit_is_minus_dt_divergence():
    g = build_grid(Domain.ball(3), 30)
    spec = ProblemSpec(g, TimeGrid(0.1, 2), 1.0, Linear(-1.0), np.zeros(g.size))
    rep = step_matrix_report(spec)
    from driftlab.drift import divergence
    div = divergence(Linear(-1.0), g, 0.1, method="discrete")
    lap_part = (g.neg_laplacian().T @ g.quad_weights) / g.quad_weights
    np.testing.assert_allclose(rep.column_deficit, spec.times.dt * (lap_part - div), atol=1e-12)


def test_centered_can_lose_m_structure():
    g = build_grid(Domain.interval(0, 1), 20)
    spec = ProblemSpec(g, TimeGrid(0.1, 2), 1e-3, Linear(-5.0), np.zeros(g.size))
    assert step_matrix_report(spec, SolverConfig("centered")).m_structure is False
    assert step_matrix_report(spec).m_structure is True
    assert not solve_primal(spec, SolverConfig("centered")).m_structure.all()


def test_adjoint_matrix_is_exact_transpose():
    g = build_grid(Domain.rectangle(), 8)
    spec = ProblemSpec(g, TimeGrid(0.1, 3), 1.0, Kinked(-1.0, 0.3), np.zeros(g.size))
    A = assembled_step_matrix(spec, None, 2)
    assert (adjoint_step_matrix(spec, None, 2) != A.T).nnz == 0


def test_linearity(rng):
    g = build_grid(Domain.ball(2), 24)
    tg = TimeGrid(0.2, 8)
    u, v = rng.normal(size=(2, g.size))
    f1, f2 = rng.normal(size=(2, g.size))
    base = ProblemSpec(g, tg, 1.0, Instability(2, 0.3), u, f1)
    a, b = 1.7, -0.4
    lhs = solve_primal(base.with_(u0=a * u + b * v, f=a * f1 + b * f2)).values
    rhs = a * solve_primal(base).values + b * solve_primal(base.with_(u0=v, f=f2)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_divergence_detection():
    g = build_grid(Domain.interval(0, 1), 10)
    tg = TimeGrid(0.1, 6)
    f = np.zeros((7, g.size))
    f[3, 4] = np.inf
    with pytest.raises(SolverDivergenceError) as info:
        solve_primal(ProblemSpec(g, tg, 1.0, Linear(-1.0), np.zeros(g.size), f))
    assert info.value.step == 3
    g2 = build_grid(Domain.rectangle(), 6)
    f2 = np.zeros((7, g2.size))
    f2[2, 0] = np.nan
    with pytest.raises(SolverDivergenceError) as info:
        solve_primal(ProblemSpec(g2, tg, 1.0, Linear(-1.0), np.zeros(g2.size), f2))
    assert info.value.step == 2


def test_problem_validation():
    g = build_grid(Domain.interval(), 8)
    with pytest.raises(ConfigurationError):
        ProblemSpec(g, TimeGrid(1, 2), 0.0, Linear(0), np.zeros(8))
    with pytest.raises(ContractViolation):
        ProblemSpec(g, TimeGrid(1, 2), 1.0, Linear(0), np.zeros(7))
    with pytest.raises(ConfigurationError):
        SolverConfig("lax")
    with pytest.raises(ConfigurationError):
        SolverConfig(time_scheme="crank_nicolson")


def test_backends_agree(rng):
    from driftlab import _kernels_py, kernels
    g = build_grid(Domain.ball(2), 64)
    tg = TimeGrid(0.3, 30)
    spec = ProblemSpec(g, tg, 0.5, Instability(2, 0.3), rng.normal(size=g.size), np.ones(g.size))
    fast = solve_primal(spec).values
    saved = kernels.march_tridiagonal
    try:
        kernels.march_tridiagonal = _kernels_py.march_tridiagonal
        slow = solve_primal(spec).values
    finally:
        kernels.march_tridiagonal = saved
    np.testing.assert_allclose(fast, slow, rtol=1e-13, atol=1e-14)


def test_series_table_columns():
    res = solve_primal(heat_problem(10, 4))
    cols, data = res.series_table()
    assert cols == ["t", "l1", "l2", "linf", "grad_energy"]
    assert data.shape == (5, 5)
    assert data[0, 1] == pytest.approx(quadrature(np.abs(res.values[0]), res.trajectory.grid))
