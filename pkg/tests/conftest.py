import numpy as np
import pytest

from gaplm.io import load_pima
from gaplm.spline import Dataset, build_centered_basis, make_knots

ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def pima():
    return load_pima()


@pytest.fixture(scope="session")
def pima_basis(pima):
    return build_centered_basis(pima, [make_knots(0, 4, "quantile", pima.x[:, k]) for k in range(pima.d1)])


def logistic_data(seed, n=300, d2=3, d1=2, beta=None):
    """A well-conditioned logistic GAPLM sample with smooth additive terms."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, d1))
    z = rng.normal(size=(n, d2))
    beta = np.linspace(1.0, -0.5, d2) if beta is None else np.asarray(beta, dtype=float)
    eta = np.sin(2 * np.pi * x[:, 0]) if d1 else np.zeros(n)
    if d1 > 1:
        eta = eta + (x[:, 1] - 0.5) ** 2 * 2 - 1 / 6
    m = eta + z @ beta - 0.3
    y = rng.binomial(1, 1 / (1 + np.exp(-m))).astype(float)
    return Dataset(y=y, x=x, z=z)


def basis_for(data, J=3, order=4):
    return build_centered_basis(data, [make_knots(J, order, "quantile", data.x[:, k]) for k in range(data.d1)])
