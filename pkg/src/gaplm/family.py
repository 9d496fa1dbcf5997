"""Quasi-likelihood families: link, variance, Q and its derivatives in the linear predictor.

Q is normalized against the saturated model, so ``Q(mu=y, y) = 0`` and the
deviance ``2 * sum(Q(y, y) - Q(mu, y))`` is nonnegative by construction. Only
the m-derivative of Q is pinned down by the quasi-likelihood definition; the
additive constant is a convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import expit, xlogy

__all__ = [
    "QuasiFamily",
    "InvalidInputError",
    "BoundaryError",
    "get_family",
    "FAMILY_NAMES",
    "eval_q",
    "eval_rho",
    "eval_q1",
    "eval_q2",
    "deviance",
]

LOGIT_CLAMP = 30.0


class InvalidInputError(ValueError):
    pass


class BoundaryError(ArithmeticError):
    pass


Array = np.ndarray


@dataclass(frozen=True)
class QuasiFamily:
    """A link/variance pair plus the saturated-normalized quasi-likelihood.

    All callables act elementwise on numpy arrays. ``mean_d1``/``mean_d2`` are
    the first two derivatives of the inverse link in the linear predictor and
    ``variance_d1`` is dV/dmu; together they give rho_1' for non-canonical
    combinations without special-casing.
    """

    name: str
    link: Callable[[Array], Array]
    inverse_link: Callable[[Array], Array]
    mean_d1: Callable[[Array], Array]
    mean_d2: Callable[[Array], Array]
    variance: Callable[[Array], Array]
    variance_d1: Callable[[Array], Array]
    quasi_loglik: Callable[[Array, Array], Array]  # Q(mu, y), saturated-normalized
    valid_response: Callable[[Array], bool]
    clamp: float | None = None
    quasi_loglik_m: Callable[[Array, Array], Array] | None = None  # Q as a function of m, if more stable
    canonical: bool = True
    dispersion: float = 1.0
    aliases: tuple[str, ...] = field(default=())

    def clamp_predictor(self, m):
        m = np.asarray(m, dtype=float)
        if self.clamp is None:
            return m
        return np.clip(m, -self.clamp, self.clamp)

    def mean(self, m):
        return self.inverse_link(self.clamp_predictor(m))

    def rho(self, ell: int, m):
        m = self.clamp_predictor(m)
        mu = self.inverse_link(m)
        v = self.variance(mu)
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            bad = np.atleast_1d(m)[np.atleast_1d(v <= 0) | ~np.isfinite(np.atleast_1d(v))]
            raise BoundaryError(f"variance underflow for {self.name} at m={bad[0]!r}")
        return self.mean_d1(m) ** ell / v

    def rho1_d1(self, m):
        """Derivative of rho_1 in m; zero for canonical links."""
        if self.canonical:
            return np.zeros_like(np.asarray(m, dtype=float))
        m = self.clamp_predictor(m)
        mu = self.inverse_link(m)
        v = self.variance(mu)
        d1 = self.mean_d1(m)
        return self.mean_d2(m) / v - d1 * d1 * self.variance_d1(mu) / (v * v)

    def q(self, m, y):
        if self.quasi_loglik_m is not None:
            return self.quasi_loglik_m(np.asarray(m, dtype=float), y) / self.dispersion
        return self.quasi_loglik(self.mean(m), y) / self.dispersion

    def q1(self, m, y):
        return (y - self.mean(m)) * self.rho(1, m) / self.dispersion

    def q2(self, m, y):
        return ((y - self.mean(m)) * self.rho1_d1(m) - self.rho(2, m)) / self.dispersion

    def weights(self, m):
        """Fisher weights rho_2(m) / sigma^2 (minus the expected q2)."""
        return self.rho(2, m) / self.dispersion

    def with_dispersion(self, dispersion: float) -> "QuasiFamily":
        if not dispersion > 0:
            raise InvalidInputError("dispersion must be positive")
        return replace(self, dispersion=float(dispersion))


def _bernoulli_q(mu, y):
    return xlogy(y, mu) + xlogy(1 - y, 1 - mu) - xlogy(y, y) - xlogy(1 - y, 1 - y)


def _bernoulli_logit():
    def inv(m):
        return expit(m)

    def d1(m):
        mu = expit(m)
        return mu * (1 - mu)

    def d2(m):
        mu = expit(m)
        return mu * (1 - mu) * (1 - 2 * mu)

    def q_of_m(m, y):
        # log-sigmoid form stays finite for large |m| where mu rounds to 0 or 1
        return y * m - np.logaddexp(0.0, m) - xlogy(y, y) - xlogy(1 - y, 1 - y)

    return QuasiFamily(
        name="bernoulli-logit",
        link=lambda mu: np.log(mu) - np.log1p(-mu),
        inverse_link=inv,
        mean_d1=d1,
        mean_d2=d2,
        variance=lambda mu: mu * (1 - mu),
        variance_d1=lambda mu: 1 - 2 * mu,
        quasi_loglik=_bernoulli_q,
        valid_response=lambda y: bool(np.all((y >= 0) & (y <= 1))),
        clamp=LOGIT_CLAMP,
        quasi_loglik_m=q_of_m,
        aliases=("binomial-logit", "binomial", "bernoulli", "logistic"),
    )


def _gaussian_identity():
    return QuasiFamily(
        name="gaussian-identity",
        link=lambda mu: np.asarray(mu, dtype=float),
        inverse_link=lambda m: np.asarray(m, dtype=float),
        mean_d1=lambda m: np.ones_like(np.asarray(m, dtype=float)),
        mean_d2=lambda m: np.zeros_like(np.asarray(m, dtype=float)),
        variance=lambda mu: np.ones_like(np.asarray(mu, dtype=float)),
        variance_d1=lambda mu: np.zeros_like(np.asarray(mu, dtype=float)),
        quasi_loglik=lambda mu, y: -0.5 * (y - mu) ** 2,
        valid_response=lambda y: bool(np.all(np.isfinite(y))),
        aliases=("gaussian", "normal"),
    )


def _poisson_log():
    return QuasiFamily(
        name="poisson-log",
        link=np.log,
        inverse_link=np.exp,
        mean_d1=np.exp,
        mean_d2=np.exp,
        variance=lambda mu: np.asarray(mu, dtype=float),
        variance_d1=lambda mu: np.ones_like(np.asarray(mu, dtype=float)),
        quasi_loglik=lambda mu, y: xlogy(y, mu) - mu - xlogy(y, y) + y,
        valid_response=lambda y: bool(np.all(y >= 0)),
        aliases=("poisson",),
    )


_FAMILIES = {f.name: f for f in (_bernoulli_logit(), _gaussian_identity(), _poisson_log())}
FAMILY_NAMES = ("binomial-logit", "gaussian-identity", "poisson-log")


def get_family(name: str | QuasiFamily) -> QuasiFamily:
    if isinstance(name, QuasiFamily):
        return name
    key = name.strip().lower()
    for fam in _FAMILIES.values():
        if key == fam.name or key in fam.aliases:
            return fam
    raise InvalidInputError(f"unknown family {name!r}; choose from {', '.join(FAMILY_NAMES)}")


def _check(family: QuasiFamily, m, y=None):
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("linear predictor must be finite")
    if y is not None:
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)) or not family.valid_response(y):
            raise InvalidInputError(f"response outside the range of {family.name}")
    return m, y


def eval_q(family, m, y):
    """Q(g^{-1}(m), y), zero when the fitted mean equals y."""
    family = get_family(family)
    m, y = _check(family, m, y)
    return family.q(m, y)


def eval_rho(family, ell: int, m):
    family = get_family(family)
    if ell not in (1, 2):
        raise InvalidInputError("ell must be 1 or 2")
    m, _ = _check(family, m)
    return family.rho(ell, m)


def eval_q1(family, m, y):
    family = get_family(family)
    m, y = _check(family, m, y)
    return family.q1(m, y)


def eval_q2(family, m, y):
    family = get_family(family)
    m, y = _check(family, m, y)
    return family.q2(m, y)


def deviance(family, y, mu) -> float:
    family = get_family(family)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if y.shape != mu.shape:
        raise InvalidInputError(f"length mismatch: y has {y.shape}, mu has {mu.shape}")
    return float(-2.0 * np.sum(family.quasi_loglik(mu, y)))
