import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplm.fit import fit, fit_glm, full_design
from gaplm.select import (
    Penalty,
    PenaltyConfigError,
    _gcv_value,
    best_subset_bic,
    effective_parameters,
    fit_penalized,
    gcv,
    penalty_derivative,
    penalty_value,
    sandwich_covariance,
    tune_lambda,
)
from gaplm.spline import Dataset

from conftest import basis_for, logistic_data

SPARSE_BETA = [1.2, 0.0, -0.8, 0.0, 0.0]


def test_scad_values():
    p = Penalty("scad", 1.0, a=3.7)
    assert penalty_value(p, 0, 0.5) == pytest.approx(0.5)
    assert penalty_value(p, 0, 2.0) == pytest.approx((2 * 3.7 * 2 - 4 - 1) / (2 * 2.7))
    assert penalty_value(p, 0, 10.0) == pytest.approx(4.7 / 2)
    assert penalty_derivative(p, 0, 0.5) == pytest.approx(1.0)
    assert penalty_derivative(p, 0, 2.0) == pytest.approx((3.7 - 2) / 2.7)
    assert penalty_derivative(p, 0, 5.0) == 0.0


def test_l1_and_l0_values():
    assert penalty_value(Penalty("lasso", 0.3), 0, -2.0) == pytest.approx(0.6)
    assert penalty_derivative(Penalty("l1", 0.3), 0, -2.0) == pytest.approx(0.3)
    assert penalty_value(Penalty("l0", 2.0), 0, 0.1) == pytest.approx(2.0)
    assert penalty_value(Penalty("l0", 2.0), 0, 0.0) == 0.0
    with pytest.raises(PenaltyConfigError):
        penalty_derivative(Penalty("l0", 1.0), 0, 1.0)


@settings(max_examples=100)
@given(st.floats(1e-3, 1e3), st.floats(2.01, 10.0))
def test_scad_derivative_continuous_at_breakpoints(lam, a):
    p = Penalty("scad", lam, a=a)
    for t in (lam, a * lam):
        left = penalty_derivative(p, 0, np.nextafter(t, 0))
        right = penalty_derivative(p, 0, np.nextafter(t, np.inf))
        assert abs(left - right) <= 1e-12 * max(1.0, lam)


@settings(max_examples=100)
@given(st.floats(1e-3, 1e3), st.floats(2.01, 10.0), st.floats(0, 20))
def test_scad_value_continuous_and_bounded(lam, a, u):
    p = Penalty("scad", lam, a=a)
    t = u * lam
    assert penalty_value(p, 0, t) <= lam * t + 1e-9 * lam * lam
    assert penalty_value(p, 0, t) <= (a + 1) * lam * lam / 2 * (1 + 1e-12)


def test_penalty_validation():
    with pytest.raises(PenaltyConfigError):
        Penalty("scad", 1.0, a=2.0)
    with pytest.raises(PenaltyConfigError):
        Penalty("l1", -1.0)
    with pytest.raises(PenaltyConfigError):
        Penalty("ridge", 1.0)
    p = Penalty("scad", [1.0, 2.0, 3.0], unpenalized=(1,))
    assert list(p.lambdas(3)) == [1.0, 0.0, 3.0]


@pytest.fixture(scope="module")
def sparse():
    data = logistic_data(21, n=400, d2=5, beta=SPARSE_BETA)
    basis = basis_for(data)
    return data, basis, fit(data, basis)


@pytest.mark.parametrize("kind", ["scad", "l1"])
def test_zero_lambda_is_unpenalized(sparse, kind):
    data, basis, init = sparse
    res = fit_penalized(data, basis, "binomial-logit", Penalty(kind, 0.0), init)
    assert np.max(np.abs(res.beta - init.beta)) <= 1e-6
    assert np.max(np.abs(res.gamma - init.gamma)) <= 1e-6
    assert res.effective_params == pytest.approx(data.d2, abs=1e-8)


@pytest.mark.parametrize("kind", ["scad", "l1"])
def test_huge_lambda_zeroes_everything(sparse, kind):
    data, basis, init = sparse
    res = fit_penalized(data, basis, "binomial-logit", Penalty(kind, 1e6), init)
    assert res.zero_set == tuple(range(data.d2))
    assert np.all(res.beta == 0)
    assert np.all(res.se == 0)
    assert res.effective_params == 0


def test_unpenalized_coefficients_survive(sparse):
    data, basis, init = sparse
    res = fit_penalized(data, basis, "binomial-logit", Penalty("l1", 1e6, unpenalized=(1,)), init)
    assert res.zero_set == (0, 2, 3, 4)
    assert res.beta[1] != 0


def test_zero_lambda_sandwich_matches_glm_covariance():
    data = logistic_data(22, n=250, d1=0, d2=3)
    data = Dataset(y=data.y, x=np.zeros((data.n, 0)), z=data.z)
    init = fit_glm(data)
    res = fit_penalized(data, init.basis, "binomial-logit", Penalty("scad", 0.0), init)
    assert np.max(np.abs(res.covariance - init.covariance)) <= 1e-6


@pytest.mark.parametrize("kind", ["scad", "l1"])
def test_duplication_halves_sandwich(sparse, kind):
    data, basis, init = sparse
    _, res = tune_lambda(data, basis, "binomial-logit", kind, init=init)
    lam = res.penalty
    twice = Dataset(y=np.r_[data.y, data.y], x=np.r_[data.x, data.x], z=np.r_[data.z, data.z])
    init2 = fit(twice, basis)
    res2 = fit_penalized(twice, basis, "binomial-logit", lam, init2)
    assert res2.zero_set == res.zero_set
    act = res.active
    ratio = np.diag(res2.covariance)[act] / np.diag(res.covariance)[act]
    assert np.max(np.abs(ratio - 0.5)) <= 1e-8


@pytest.mark.parametrize("kind", ["scad", "l1"])
def test_lqa_fixed_point(sparse, kind):
    data, basis, init = sparse
    _, res = tune_lambda(data, basis, "binomial-logit", kind, init=init)
    D = full_design(basis, data)
    score = D.T @ res.family.q1(D @ res.theta, data.y)
    nb = basis.n_columns
    for j in res.active:
        d = penalty_derivative(res.penalty, j, res.beta[j]) * np.sign(res.beta[j])
        assert abs(score[nb + j] - data.n * d) <= 1e-5 * data.n


@pytest.mark.parametrize("kind", ["scad", "l1"])
def test_refit_from_solution_is_idempotent(sparse, kind):
    data, basis, init = sparse
    _, res = tune_lambda(data, basis, "binomial-logit", kind, init=init)
    again = fit_penalized(data, basis, "binomial-logit", res.penalty, init, start=res.theta)
    assert again.zero_set == res.zero_set
    assert np.max(np.abs(again.theta - res.theta)) <= 1e-10


def test_l1_zero_set_grows_along_path(sparse):
    data, basis, init = sparse
    _, res = tune_lambda(data, basis, "binomial-logit", "l1", init=init)
    counts = [row["n_zero"] for row in res.criterion["path"]]
    assert counts == sorted(counts)
    assert counts[-1] == data.d2


def test_gcv_definition(sparse):
    data, basis, init = sparse
    _, res = tune_lambda(data, basis, "binomial-logit", "scad", init=init)
    assert gcv(res, data) == pytest.approx(res.gcv, rel=1e-10)
    assert res.gcv == pytest.approx(res.deviance / (data.n * (1 - res.effective_params / data.n) ** 2))
    assert 0 <= effective_parameters(res, data) <= len(res.active) + 1e-10
    assert _gcv_value(10.0, 5.0, 5) == float("inf")


def test_ties_go_to_larger_lambda(sparse):
    data, basis, init = sparse
    grid = [1e4, 1e5, 1e6]
    lam_hat, res = tune_lambda(data, basis, "binomial-logit", "scad", grid, init=init)
    assert lam_hat == 1e6
    assert res.zero_set == tuple(range(data.d2))


def test_selection_recovers_sparse_truth(sparse):
    data, basis, init = sparse
    _, scad = tune_lambda(data, basis, "binomial-logit", "scad", init=init)
    bic = best_subset_bic(data, basis, "binomial-logit", full_fit=init)
    for res in (scad, bic):
        assert {0, 2} <= set(res.active)
    assert set(bic.zero_set) == {1, 3, 4}


def test_selection_invariant_to_covariate_units(sparse):
    data, basis, init = sparse
    _, base = tune_lambda(data, basis, "binomial-logit", "scad", init=init)
    z = data.z * np.array([10.0, 0.1, 3.0, 1.0, 100.0])
    scaled = Dataset(y=data.y, x=data.x, z=z)
    _, res = tune_lambda(scaled, basis, "binomial-logit", "scad")
    assert res.zero_set == base.zero_set
    assert np.allclose(res.beta * [10.0, 0.1, 3.0, 1.0, 100.0], base.beta, rtol=1e-5, atol=1e-8)


def test_best_subset_respects_unpenalized(sparse):
    data, basis, init = sparse
    res = best_subset_bic(data, basis, "binomial-logit", unpenalized=(3,), full_fit=init)
    assert 3 in res.active
    assert res.criterion["n_subsets"] == 2 ** (data.d2 - 1)
    with pytest.raises(ValueError):
        best_subset_bic(data, basis, "binomial-logit", max_d2=3)


def test_empirical_sandwich_option(sparse):
    data, basis, init = sparse
    _, res = tune_lambda(data, basis, "binomial-logit", "scad", init=init)
    emp = sandwich_covariance(res, data, score_cov="empirical")
    assert np.all(np.diag(emp)[res.active] > 0)
    with pytest.raises(ValueError):
        sandwich_covariance(res, data, score_cov="bootstrap")
