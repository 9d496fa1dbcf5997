import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplm.family import (
    BoundaryError,
    InvalidInputError,
    deviance,
    eval_q,
    eval_q1,
    eval_q2,
    eval_rho,
    get_family,
)

H = 1e-5


def _random_points(name, rng, size=1000):
    m = rng.uniform(-10, 10, size)
    if name == "bernoulli-logit":
        y = rng.integers(0, 2, size).astype(float)
    elif name == "gaussian-identity":
        y = rng.normal(0, 5, size)
    else:
        m = rng.uniform(-3, 3, size)
        y = rng.poisson(3, size).astype(float)
    return m, y


@pytest.mark.parametrize("name", ["bernoulli-logit", "gaussian-identity", "poisson-log"])
def test_q1_matches_central_difference_of_q(name):
    fam = get_family(name)
    m, y = _random_points(name, np.random.default_rng(1))
    fd = (fam.q(m + H, y) - fam.q(m - H, y)) / (2 * H)
    q1 = fam.q1(m, y)
    assert np.all(np.abs(q1 - fd) <= 1e-6 * np.maximum(1, np.abs(q1)))


@pytest.mark.parametrize("name", ["bernoulli-logit", "gaussian-identity", "poisson-log"])
def test_q2_matches_central_difference_of_q1(name):
    fam = get_family(name)
    m, y = _random_points(name, np.random.default_rng(2))
    fd = (fam.q1(m + H, y) - fam.q1(m - H, y)) / (2 * H)
    q2 = fam.q2(m, y)
    assert np.all(np.abs(q2 - fd) <= 1e-6 * np.maximum(1, np.abs(q2)))


@pytest.mark.parametrize("name", ["bernoulli-logit", "gaussian-identity", "poisson-log"])
def test_q2_negative(name):
    fam = get_family(name)
    m, y = _random_points(name, np.random.default_rng(3))
    assert np.all(fam.q2(m, y) < 0)


def test_documented_values():
    logit = get_family("bernoulli-logit")
    gauss = get_family("gaussian-identity")
    assert eval_q(logit, 0.0, 1.0) == pytest.approx(np.log(0.5), abs=1e-12)
    assert eval_q(gauss, 2.5, 2.5) == 0.0
    assert eval_q(logit, 700.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert eval_rho(logit, 1, 3.7) == 1.0
    assert eval_rho(logit, 2, 0.0) == pytest.approx(0.25, abs=1e-15)
    assert eval_rho(gauss, 2, -4.0) == 1.0
    assert eval_q1(logit, 0.0, 1.0) == pytest.approx(0.5)
    assert eval_q2(logit, 0.0, 0.3) == pytest.approx(-0.25)
    assert eval_q1(gauss, 2.0, 5.0) == pytest.approx(3.0)
    assert eval_q2(gauss, 2.0, 5.0) == pytest.approx(-1.0)


def test_deviance_values():
    logit = get_family("bernoulli-logit")
    gauss = get_family("gaussian-identity")
    assert deviance(logit, np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(2.772589, abs=1e-6)
    assert deviance(gauss, np.array([1.0, 2.0]), np.zeros(2)) == pytest.approx(5.0)
    y = np.array([0.0, 1.0, 3.0])
    assert deviance(get_family("poisson-log"), y, np.where(y > 0, y, 1e-300)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidInputError):
        deviance(gauss, np.ones(3), np.ones(2))


@pytest.mark.parametrize("name", ["bernoulli-logit", "poisson-log"])
def test_canonical_identity(name):
    fam = get_family(name)
    m, y = _random_points(name, np.random.default_rng(4))
    assert np.all(fam.rho(1, m) == 1.0)
    assert np.max(np.abs(fam.q1(m, y) - (y - fam.mean(m)))) <= 1e-12


@settings(max_examples=200)
@given(st.floats(-1, 1), st.sampled_from(["bernoulli-logit", "gaussian-identity", "poisson-log"]))
def test_link_roundtrip(u, name):
    # logit loses digits as mu rounds towards 0 or 1, so its range is kept moderate
    m = u * {"bernoulli-logit": 5.0, "gaussian-identity": 1e3, "poisson-log": 20.0}[name]
    fam = get_family(name)
    assert abs(float(fam.link(fam.inverse_link(np.asarray(m)))) - m) <= 1e-12 * max(1, abs(m))


def test_invalid_inputs():
    logit = get_family("bernoulli-logit")
    with pytest.raises(InvalidInputError):
        eval_q(logit, np.nan, 1.0)
    with pytest.raises(InvalidInputError):
        eval_q(logit, 0.0, 2.0)
    with pytest.raises(InvalidInputError):
        eval_q1(get_family("poisson-log"), 0.0, -1.0)
    with pytest.raises(ValueError):
        get_family("gamma-inverse")


def test_boundary_error_on_variance_underflow():
    with pytest.raises(BoundaryError):
        eval_rho(get_family("poisson-log"), 2, -800.0)


def test_aliases_and_dispersion():
    assert get_family("binomial").name == "bernoulli-logit"
    g = get_family("gaussian-identity").with_dispersion(4.0)
    assert g.q1(np.array(1.0), np.array(3.0)) == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        g.with_dispersion(0.0)
