import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplm.fit import FitOptions, beta_covariance, component, fit, fit_glm, full_design, predict, solve_spd
from gaplm.spline import Dataset, RankDeficiencyError

from conftest import basis_for, logistic_data


def irls(X, y, iters=100):
    """Plain iteratively reweighted least squares for logistic regression."""
    b = np.zeros(X.shape[1])
    for _ in range(iters):
        eta = X @ b
        mu = 1 / (1 + np.exp(-eta))
        w = mu * (1 - mu)
        zwork = eta + (y - mu) / w
        b_new = np.linalg.solve(X.T @ (w[:, None] * X), X.T @ (w * zwork))
        if np.max(np.abs(b_new - b)) < 1e-14:
            b = b_new
            break
        b = b_new
    mu = 1 / (1 + np.exp(-X @ b))
    W = mu * (1 - mu)
    return b, np.linalg.inv(X.T @ (W[:, None] * X))


@pytest.mark.parametrize("seed", range(20))
def test_glm_matches_irls(seed):
    rng = np.random.default_rng(seed)
    n, d2 = int(rng.integers(40, 120)), int(rng.integers(1, 5))
    z = rng.normal(size=(n, d2))
    y = rng.binomial(1, 1 / (1 + np.exp(-(z @ rng.normal(0, 0.7, d2) + 0.2)))).astype(float)
    data = Dataset(y=y, x=np.zeros((n, 0)), z=z)
    res = fit_glm(data)
    b, cov = irls(np.hstack([z, np.ones((n, 1))]), y)
    assert res.converged
    assert np.max(np.abs(res.beta - b[:-1])) <= 1e-8
    assert abs(res.intercept - b[-1]) <= 1e-8
    assert np.max(np.abs(res.covariance - cov[:-1, :-1])) <= 1e-8


def test_gaussian_matches_least_squares():
    rng = np.random.default_rng(5)
    n = 200
    x = rng.uniform(size=(n, 2))
    z = rng.normal(size=(n, 3))
    y = np.sin(3 * x[:, 0]) + x[:, 1] ** 2 + z @ [1.0, -2.0, 0.5] + rng.normal(0, 0.3, n)
    data = Dataset(y=y, x=x, z=z)
    basis = basis_for(data, J=4)
    res = fit(data, basis, "gaussian-identity")
    D = full_design(basis, data)
    theta = np.linalg.lstsq(D, y, rcond=None)[0]
    assert np.max(np.abs(res.theta - theta)) <= 1e-10


def test_quasi_likelihood_ascends():
    data = logistic_data(1)
    res = fit(data, basis_for(data, J=5))
    path = np.array(res.loglik_path)
    assert res.converged
    assert np.all(np.diff(path) >= -1e-12 * np.abs(path[1:]))


def test_score_at_convergence_recomputed():
    data = logistic_data(2)
    basis = basis_for(data)
    res = fit(data, basis)
    D = full_design(basis, data)
    score = D.T @ res.family.q1(D @ res.theta, data.y) / data.n
    assert res.converged and res.score_norm <= 1e-8
    assert np.max(np.abs(score)) <= 1e-8


def test_intercept_score_equation():
    data = logistic_data(3)
    res = fit(data, basis_for(data))
    assert abs(np.mean(res.fitted_mean()) - np.mean(data.y)) <= 1e-8


def test_covariance_halves_when_data_duplicated():
    data = logistic_data(4)
    basis = basis_for(data)
    once = fit(data, basis)
    twice_data = Dataset(y=np.r_[data.y, data.y], x=np.r_[data.x, data.x], z=np.r_[data.z, data.z])
    twice = fit(twice_data, basis)
    assert np.max(np.abs(twice.beta - once.beta)) <= 1e-8
    assert np.max(np.abs(twice.covariance / once.covariance - 0.5)) <= 1e-8


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 2))
def test_rescaling_a_linear_covariate(c, j):
    data = logistic_data(6, n=200)
    basis = basis_for(data, J=2)
    base = fit(data, basis)
    z = data.z.copy()
    z[:, j] *= c
    scaled = fit(Dataset(y=data.y, x=data.x, z=z), basis)
    assert scaled.beta[j] == pytest.approx(base.beta[j] / c, rel=1e-7, abs=1e-9)
    assert np.max(np.abs(scaled.fitted_mean() - base.fitted_mean())) <= 1e-8


def test_predict_and_component_identities():
    data = logistic_data(7)
    basis = basis_for(data)
    res = fit(data, basis)
    assert np.allclose(predict(res, data.x, data.z), res.linear_predictor, atol=1e-12)
    assert np.allclose(predict(res, data.x, data.z, scale="mean"), res.fitted_mean(), atol=1e-12)
    parts = sum(component(res, k, data.x[:, k]) for k in range(data.d1))
    assert np.allclose(parts + data.z @ res.beta + res.intercept, res.linear_predictor, atol=1e-10)
    assert abs(np.mean(component(res, 0, data.x[:, 0]))) <= 1e-10
    assert isinstance(predict(res, data.x[0], data.z[0]), float)
    with pytest.warns(UserWarning, match="outside"):
        predict(res, np.array([1.5, 0.2]), data.z[0])
    with pytest.raises(IndexError):
        component(res, 5, [0.5])


def test_beta_covariance_recomputed_matches_stored():
    data = logistic_data(8)
    res = fit(data, basis_for(data))
    assert np.allclose(beta_covariance(res, data), res.covariance, rtol=1e-10, atol=1e-14)


def test_rank_deficiency_names_columns():
    data = logistic_data(9)
    z = np.column_stack([data.z, data.z[:, 0] * 2])
    with pytest.raises(RankDeficiencyError, match="Z4"):
        fit(Dataset(y=data.y, x=data.x, z=z), basis_for(data))


def test_nonconvergence_is_reported():
    data = logistic_data(10)
    res = fit(data, basis_for(data), opts=FitOptions(max_iter=1))
    assert not res.converged
    assert any("did not converge" in w for w in res.warnings)


def test_separation_warning():
    rng = np.random.default_rng(11)
    z = rng.normal(size=(100, 1))
    data = Dataset(y=(z[:, 0] > 0).astype(float), x=np.zeros((100, 0)), z=z)
    res = fit_glm(data)
    assert res.n_clamped > 10
    assert any("separation" in w for w in res.warnings)


def test_invalid_response_and_options():
    data = logistic_data(12)
    with pytest.raises(ValueError):
        fit(Dataset(y=data.y * 2, x=data.x, z=data.z), basis_for(data))
    with pytest.raises(ValueError):
        FitOptions(tol=0)


def test_solve_spd_escalates_ridge():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    x, ridge = solve_spd(A, np.array([1.0, 1.0]))
    assert ridge > 0
    assert np.allclose(A @ x, [1.0, 1.0], atol=1e-6)


def test_pima_glm_baseline(pima):
    res = fit_glm(pima.__class__(y=pima.y, x=np.zeros((pima.n, 0)), z=np.column_stack([pima.z, pima.x]),
                                 z_names=[*pima.z_names, *pima.x_names]))
    assert res.converged and res.n == 724


def test_poisson_fit_converges():
    rng = np.random.default_rng(13)
    x = rng.uniform(size=(300, 1))
    z = rng.normal(size=(300, 2))
    y = rng.poisson(np.exp(0.5 + np.cos(2 * x[:, 0]) + z @ [0.3, -0.2])).astype(float)
    data = Dataset(y=y, x=x, z=z)
    res = fit(data, basis_for(data), "poisson-log")
    assert res.converged
    assert np.allclose(res.beta, [0.3, -0.2], atol=0.15)
