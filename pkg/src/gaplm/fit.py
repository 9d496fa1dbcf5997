"""Unpenalized GAPLM fitting by Fisher scoring over (gamma, beta, intercept).

Parameter layout used throughout: ``theta = [gamma (spline), beta (linear), intercept]``
against the design ``D = [B, Z, 1]``, where ``B`` is the centered spline block.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .family import QuasiFamily, get_family
from .family import deviance as _deviance
from .spline import AdditiveSplineBasis, Dataset, RankDeficiencyError

__all__ = [
    "FitOptions",
    "GaplmFit",
    "fit",
    "fit_glm",
    "predict",
    "component",
    "beta_covariance",
    "full_design",
    "solve_spd",
]


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-8
    max_iter: int = 100
    max_halving: int = 30
    ridge: float = 0.0
    ridge_max: float = 1e-8

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.max_halving < 0 or self.ridge < 0:
            raise ValueError("invalid FitOptions")


@dataclass(frozen=True)
class GaplmFit:
    gamma: np.ndarray
    beta: np.ndarray
    intercept: float
    converged: bool
    iterations: int
    score_norm: float
    quasi_loglik: float  # n^{-1} sum Q at the estimate
    loglik_path: tuple[float, ...]
    covariance: np.ndarray  # beta block
    information: np.ndarray  # full Fisher information at the estimate
    linear_predictor: np.ndarray
    deviance: float
    dispersion_pearson: float
    n_clamped: int
    basis: AdditiveSplineBasis
    family: QuasiFamily
    z_names: tuple[str, ...] = ()
    x_names: tuple[str, ...] = ()
    warnings: tuple[str, ...] = field(default=())

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.beta, [self.intercept]])

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    @property
    def n(self) -> int:
        return self.linear_predictor.size

    def fitted_mean(self) -> np.ndarray:
        return self.family.mean(self.linear_predictor)

    def to_dict(self) -> dict:
        return {
            "family": self.family.name,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "score_norm": float(self.score_norm),
            "quasi_loglik": float(self.quasi_loglik),
            "deviance": float(self.deviance),
            "dispersion_pearson": float(self.dispersion_pearson),
            "n": int(self.n),
            "n_clamped": int(self.n_clamped),
            "intercept": float(self.intercept),
            "coefficients": {name: float(b) for name, b in zip(self.z_names, self.beta)},
            "standard_errors": {name: float(s) for name, s in zip(self.z_names, self.se)},
            "gamma": [float(g) for g in self.gamma],
            "knots": {
                name: kv.to_dict() for name, kv in zip(self.x_names, self.basis.knots)
            },
            "warnings": list(self.warnings),
        }


def full_design(basis: AdditiveSplineBasis, data: Dataset) -> np.ndarray:
    return np.hstack([basis.transform(data.x), data.z, np.ones((data.n, 1))])


def solve_spd(A, b, ridge=0.0, ridge_max=1e-8):
    """Solve ``A x = b`` for symmetric PSD ``A`` by Cholesky, escalating a relative ridge on failure.

    Returns ``(x, ridge_used)``; ``ridge_used`` is relative to the mean diagonal.
    """
    A = np.asarray(A, dtype=float)
    scale = float(np.mean(np.abs(np.diag(A)))) if A.size else 1.0
    scale = scale if scale > 0 else 1.0
    ladder = [ridge] + [r for r in (1e-12, 1e-10, ridge_max) if r > ridge]
    for r in ladder:
        try:
            c = scipy.linalg.cho_factor(A + r * scale * np.eye(A.shape[0]), check_finite=False)
            x = scipy.linalg.cho_solve(c, b, check_finite=False)
            if np.all(np.isfinite(x)):
                return x, r
        except np.linalg.LinAlgError:
            continue
    return np.linalg.lstsq(A, b, rcond=None)[0], float("inf")


def _check_rank(D, names):
    n, p = D.shape
    if n <= p:
        raise RankDeficiencyError(f"need more observations ({n}) than parameters ({p})")
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms == 0):
        raise RankDeficiencyError(f"all-zero design columns: {[names[j] for j in np.flatnonzero(norms == 0)]}")
    _, R, piv = scipy.linalg.qr(D / norms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > diag[0] * max(n, p) * np.finfo(float).eps * 10))
    if rank < p:
        raise RankDeficiencyError(
            f"design has rank {rank} < {p}; dependent columns: {[names[j] for j in sorted(piv[rank:])]}"
        )


def _objective(D, y, family, theta, offset):
    m = D @ theta + offset
    return float(np.sum(family.q(m, y))), m


def _maximize(D, y, family, theta0, opts, offset=None):
    """Fisher scoring with step-halving on sum Q. Returns a dict of solver state."""
    n = D.shape[0]
    offset = np.zeros(n) if offset is None else offset
    theta = np.asarray(theta0, dtype=float).copy()
    L, m = _objective(D, y, family, theta, offset)
    path = [L / n]
    notes = []
    converged = False
    it = 0
    ridge_used = 0.0

    def ok(Lc, L):
        return np.isfinite(Lc) and Lc >= L - 1e-12 * max(1.0, abs(L))

    for it in range(1, opts.max_iter + 1):
        w = family.weights(m)
        score = D.T @ family.q1(m, y)
        info = D.T @ (D * w[:, None])
        if np.max(np.abs(score), initial=0.0) / n <= opts.tol:
            converged = True
            # one more full step: scoring is quadratically convergent here, so this
            # takes the estimate from O(tol) to roundoff accuracy
            delta, _ = solve_spd(info, score, opts.ridge, opts.ridge_max)
            Lc, mc = _objective(D, y, family, theta + delta, offset)
            if ok(Lc, L):
                theta, L, m = theta + delta, Lc, mc
                path.append(L / n)
            break
        delta, r = solve_spd(info, score, opts.ridge, opts.ridge_max)
        ridge_used = max(ridge_used, r)
        step = 1.0
        accepted = False
        for _ in range(opts.max_halving + 1):
            cand = theta + step * delta
            Lc, mc = _objective(D, y, family, cand, offset)
            if ok(Lc, L):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            notes.append("step-halving exhausted without ascent")
            break
        theta, L, m = cand, Lc, mc
        path.append(L / n)
    score = D.T @ family.q1(m, y)
    score_norm = float(np.max(np.abs(score), initial=0.0) / n)
    converged = converged or score_norm <= opts.tol
    if ridge_used:
        notes.append(f"information matrix regularized (relative ridge {ridge_used:g})")
    return {
        "theta": theta,
        "m": m,
        "loglik": L,
        "path": path,
        "iterations": it,
        "converged": converged,
        "score_norm": score_norm,
        "notes": notes,
    }


def _glm_start(z, y, family, opts):
    """Ordinary GLM on [Z, 1] from an intercept-only start."""
    n = y.size
    D = np.hstack([z, np.ones((n, 1))])
    ybar = float(np.clip(np.mean(y), 1e-3, 1 - 1e-3)) if family.clamp is not None else float(np.mean(y))
    if family.name == "poisson-log":
        ybar = max(ybar, 1e-3)
    theta0 = np.zeros(D.shape[1])
    theta0[-1] = float(family.link(np.asarray(ybar)))
    return _maximize(D, y, family, theta0, opts)


def _make_fit(D, data, basis, family, sol, notes) -> GaplmFit:
    n = data.n
    nb = basis.n_columns
    theta = sol["theta"]
    m = sol["m"]
    w = family.weights(m)
    info = D.T @ (D * w[:, None])
    cov_full, r = _inverse(info)
    if r:
        notes.append("singular information: ridge-jittered inverse used for the covariance")
    mu = family.mean(m)
    d2 = data.d2
    pearson = float(np.sum((data.y - mu) ** 2 / family.variance(mu)) / max(n - D.shape[1], 1))
    clamped = 0
    if family.clamp is not None:
        clamped = int(np.sum(np.abs(m) >= family.clamp))
        if clamped > 0.1 * n:
            notes.append(f"possible separation: {clamped} of {n} linear predictors at the clamp")
    if not sol["converged"]:
        notes.append(f"did not converge in {sol['iterations']} iterations (score norm {sol['score_norm']:.3g})")
    return GaplmFit(
        gamma=theta[:nb].copy(),
        beta=theta[nb : nb + d2].copy(),
        intercept=float(theta[-1]),
        converged=bool(sol["converged"]),
        iterations=int(sol["iterations"]),
        score_norm=float(sol["score_norm"]),
        quasi_loglik=float(sol["loglik"] / n),
        loglik_path=tuple(sol["path"]),
        covariance=cov_full[nb : nb + d2, nb : nb + d2].copy(),
        information=info,
        linear_predictor=m,
        deviance=_deviance(family, data.y, mu),
        dispersion_pearson=pearson,
        n_clamped=clamped,
        basis=basis,
        family=family,
        z_names=tuple(data.z_names),
        x_names=tuple(data.x_names),
        warnings=tuple(notes),
    )


def _inverse(A):
    """Inverse of a symmetric PSD matrix, ridge-jittered if singular."""
    p = A.shape[0]
    inv, r = solve_spd(A, np.eye(p))
    return 0.5 * (inv + inv.T), r


def fit(data: Dataset, basis: AdditiveSplineBasis, family="binomial-logit", opts: FitOptions | None = None,
        start=None) -> GaplmFit:
    """Maximize sum_i Q[g^{-1}(B_i gamma + Z_i beta + c), Y_i].

    Starts from an ordinary GLM on the linear covariates with gamma = 0 unless
    ``start`` (a full theta vector) is given. Nonconvergence is reported on the
    result, not raised.
    """
    family = get_family(family)
    opts = opts or FitOptions()
    if not family.valid_response(data.y):
        raise ValueError(f"response outside the range of {family.name}")
    D = full_design(basis, data)
    names = [f"{data.x_names[k] if k < len(data.x_names) else k}:b{j + 2}"
             for k in range(basis.d1) for j in range(basis.n_basis[k])]
    names += list(data.z_names) + ["(intercept)"]
    _check_rank(D, names)
    notes = []
    if start is None:
        glm = _glm_start(data.z, data.y, family, opts)
        theta0 = np.concatenate([np.zeros(basis.n_columns), glm["theta"]])
    else:
        theta0 = np.asarray(start, dtype=float)
    sol = _maximize(D, data.y, family, theta0, opts)
    notes.extend(sol["notes"])
    return _make_fit(D, data, basis, family, sol, notes)


def fit_glm(data: Dataset, family="binomial-logit", opts: FitOptions | None = None) -> GaplmFit:
    """Linear GLM on Z with an intercept (no spline terms)."""
    empty = Dataset(y=data.y, x=np.zeros((data.n, 0)), z=data.z, y_name=data.y_name, z_names=list(data.z_names))
    return fit(empty, AdditiveSplineBasis(knots=(), means=()), family, opts)


def beta_covariance(fit_: GaplmFit, data: Dataset | None = None, basis=None, family=None) -> np.ndarray:
    """Beta block of the inverse Fisher information of the joint problem.

    Equivalent to profiling out gamma and the intercept. ``data`` lets the
    information be recomputed from scratch rather than taken from the fit.
    """
    if data is None:
        return fit_.covariance
    basis = basis or fit_.basis
    family = get_family(family or fit_.family)
    D = full_design(basis, data)
    m = D @ fit_.theta
    info = D.T @ (D * family.weights(m)[:, None])
    inv, r = _inverse(info)
    if r:
        warnings.warn("singular information: ridge-jittered inverse", stacklevel=2)
    nb = basis.n_columns
    return inv[nb : nb + data.d2, nb : nb + data.d2]


def _unit_x(basis, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        warnings.warn("prediction outside the training covariate range; clamped to [0, 1]", stacklevel=3)
        x = np.clip(x, 0.0, 1.0)
    return x


def predict(fit_: GaplmFit, x, z, scale: str = "linear", basis: AdditiveSplineBasis | None = None):
    """eta_hat(x) + z' beta_hat (+ intercept); ``scale='mean'`` applies the inverse link.

    ``x`` is on the unit scale (see ``Dataset.to_unit``); one row or a matrix.
    """
    basis = basis or fit_.basis
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    x2 = np.atleast_2d(x).reshape(-1, basis.d1) if basis.d1 else None
    z2 = np.atleast_2d(z).reshape(-1, fit_.beta.size) if fit_.beta.size else None
    nrow = (x2 if x2 is not None else z2).shape[0]
    m = np.full(nrow, fit_.intercept)
    if x2 is not None:
        m = m + basis.transform(_unit_x(basis, x2)) @ fit_.gamma
    if z2 is not None:
        m = m + z2 @ fit_.beta
    if scale == "mean":
        m = fit_.family.mean(m)
    elif scale != "linear":
        raise ValueError("scale must be 'linear' or 'mean'")
    return float(m[0]) if nrow == 1 and x.ndim <= 1 and z.ndim <= 1 else m


def component(fit_: GaplmFit, k: int, grid, basis: AdditiveSplineBasis | None = None) -> np.ndarray:
    """Centered estimate of the k-th additive function on a unit-scale grid (k is 0-based)."""
    basis = basis or fit_.basis
    if not 0 <= k < basis.d1:
        raise IndexError(f"covariate index {k} out of range for d1={basis.d1}")
    grid = _unit_x(basis, grid)
    return basis.evaluate_component(k, grid) @ fit_.gamma[basis.block(k)]
