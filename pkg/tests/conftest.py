import numpy as np
import pytest

from driftlab import _kernels_py, kernels

try:
    from driftlab import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = ["python"] + (["cython"] if _compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def kernel_backend(request, monkeypatch):
    """Route the solver through one kernel implementation."""
    mod = _kernels_py if request.param == "python" else _compiled
    for name in ("solve_tridiagonal", "march_tridiagonal", "march_tridiagonal_adjoint"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    monkeypatch.setattr(kernels, "BACKEND", request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
