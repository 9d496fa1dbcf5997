"""Penalized selection of the linear coefficients: SCAD, L1 and best-subset (L0/BIC).

Penalized coefficients are fitted by Fisher scoring where the penalty is
replaced, at each step, by its local quadratic approximation around the
current iterate. Coefficients that fall below a scale-relative threshold are
set to exactly zero and stay there.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .family import deviance as _deviance
from .family import QuasiFamily, get_family
from .fit import FitOptions, GaplmFit, _check_rank, _maximize, fit, full_design, solve_spd
from .spline import AdditiveSplineBasis, Dataset

__all__ = [
    "Penalty",
    "SelectionResult",
    "PenaltyConfigError",
    "penalty_value",
    "penalty_derivative",
    "fit_penalized",
    "sandwich_se",
    "sandwich_covariance",
    "gcv",
    "effective_parameters",
    "tune_lambda",
    "best_subset_bic",
    "default_lambda_grid",
    "covariate_scale",
]

LQA_EPS = 1e-8
ZERO_THRESHOLD = 1e-3  # times SE of the unpenalized estimate


class PenaltyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Penalty:
    """Penalty family with one lambda per linear coefficient.

    The penalty on coefficient j is ``p_{lam_j}(scale_j * |beta_j|)``; with
    ``scale_j`` the covariate's standard deviation this penalizes the
    standardized coefficient while everything stays in original units.
    ``unpenalized`` lists linear-coefficient indices exempt from the penalty;
    the intercept is never penalized and is not indexed here.
    """

    kind: str
    lam: np.ndarray
    a: float = 3.7
    unpenalized: tuple[int, ...] = ()
    scale: np.ndarray | None = None

    def __post_init__(self):
        kind = {"lasso": "l1"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "lam", np.atleast_1d(np.asarray(self.lam, dtype=float)))
        if kind not in ("scad", "l1", "l0"):
            raise PenaltyConfigError(f"unknown penalty {self.kind!r}")
        if kind == "scad" and not self.a > 2:
            raise PenaltyConfigError(f"SCAD needs a > 2, got {self.a}")
        if np.any(self.lam < 0) or not np.all(np.isfinite(self.lam)):
            raise PenaltyConfigError("lambda must be finite and nonnegative")
        if self.scale is not None:
            sc = np.atleast_1d(np.asarray(self.scale, dtype=float))
            if np.any(sc <= 0):
                raise PenaltyConfigError("penalty scales must be positive")
            object.__setattr__(self, "scale", sc)

    def lam_of(self, j: int) -> float:
        if j in self.unpenalized:
            return 0.0
        return float(self.lam[j] if self.lam.size > 1 else self.lam[0])

    def lambdas(self, d2: int) -> np.ndarray:
        return np.array([self.lam_of(j) for j in range(d2)])

    def scales(self, d2: int) -> np.ndarray:
        if self.scale is None:
            return np.ones(d2)
        return np.broadcast_to(self.scale, (d2,)).astype(float)

    def scale_of(self, j: int) -> float:
        if self.scale is None:
            return 1.0
        return float(self.scale[j] if self.scale.size > 1 else self.scale[0])


def _scad_value(t, lam, a):
    t = np.abs(t)
    return np.where(
        t <= lam,
        lam * t,
        np.where(t <= a * lam, (2 * a * lam * t - t * t - lam * lam) / (2 * (a - 1)), (a + 1) * lam * lam / 2),
    )


def _scad_derivative(t, lam, a):
    t, lam = np.broadcast_arrays(np.abs(np.asarray(t, dtype=float)), np.asarray(lam, dtype=float))
    taper = np.divide(np.maximum(a * lam - t, 0.0), (a - 1) * lam, out=np.zeros(t.shape), where=lam > 0)
    return np.where(t <= lam, lam, lam * taper)


def penalty_value(p: Penalty, j: int, beta):
    lam = p.lam_of(j)
    beta = np.asarray(beta, dtype=float) * p.scale_of(j)
    if p.kind == "scad":
        out = _scad_value(beta, lam, p.a)
    elif p.kind == "l1":
        out = lam * np.abs(beta)
    else:
        out = 0.5 * lam * lam * (beta != 0)
    return out.item() if out.ndim == 0 else out


def penalty_derivative(p: Penalty, j: int, beta):
    """d/d|beta| of p_lambda(scale * |beta|) (the L0 penalty has no useful derivative)."""
    lam = p.lam_of(j)
    sc = p.scale_of(j)
    beta = np.abs(np.asarray(beta, dtype=float)) * sc
    if p.kind == "scad":
        out = sc * _scad_derivative(beta, lam, p.a)
    elif p.kind == "l1":
        out = np.full_like(beta, sc * lam)
    else:
        raise PenaltyConfigError("the L0 penalty is handled by best-subset search, not by derivatives")
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True)
class SelectionResult:
    beta: np.ndarray
    intercept: float
    gamma: np.ndarray
    zero_set: tuple[int, ...]
    covariance: np.ndarray  # sandwich, full d2 x d2 with zero rows/cols for the zero set
    gcv: float
    effective_params: float
    deviance: float
    penalty: Penalty
    iterations: int
    converged: bool
    linear_predictor: np.ndarray
    basis: AdditiveSplineBasis
    family: QuasiFamily
    z_names: tuple[str, ...] = ()
    criterion: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    @property
    def active(self) -> np.ndarray:
        return np.array([j for j in range(self.beta.size) if j not in self.zero_set], dtype=int)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.beta, [self.intercept]])

    def to_dict(self) -> dict:
        names = self.z_names or tuple(f"Z{j + 1}" for j in range(self.beta.size))
        return {
            "penalty": self.penalty.kind,
            "a": self.penalty.a,
            "lambda": [float(v) for v in self.penalty.lambdas(self.beta.size)],
            "zero_set": [names[j] for j in self.zero_set],
            "coefficients": {n: float(b) for n, b in zip(names, self.beta)},
            "standard_errors": {n: (None if j in self.zero_set else float(s))
                                for j, (n, s) in enumerate(zip(names, self.se))},
            "intercept": float(self.intercept),
            "gcv": float(self.gcv),
            "effective_params": float(self.effective_params),
            "deviance": float(self.deviance),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "criterion": self.criterion,
            "warnings": list(self.warnings),
        }


def _penalized_objective(L, beta, pen_idx, lam, scale, p):
    t = np.abs(beta[pen_idx]) * scale[pen_idx]
    if p.kind == "scad":
        pv = _scad_value(t, lam[pen_idx], p.a)
    else:
        pv = lam[pen_idx] * t
    return L - float(np.sum(pv))


def _lqa_weights(beta_abs, lam, scale, p):
    """Diagonal of Sigma_lambda: s^2 p'(s|b|) / (s|b| + eps), the LQA curvature in original units."""
    t = beta_abs * scale
    if p.kind == "scad":
        d = _scad_derivative(t, lam, p.a)
    else:
        d = lam.astype(float)
    return scale * scale * d / (t + LQA_EPS)


def _scad_second_derivative(t, lam, a):
    return np.where((t > lam) & (t < a * lam), -1.0 / (a - 1), 0.0)


def _newton_polish(D, y, family, theta, Lp, zero, nb, pen, lam, scale, p, objective, steps=5):
    """Exact Newton steps on the active set with coefficient signs held fixed.

    LQA converges only linearly for small nonzero coefficients; where the signs
    are settled the penalized objective is smooth, so a few exact steps take
    the LQA fixed point to roundoff accuracy. A step is kept only if it keeps
    every sign and does not lower the objective.
    """
    n = D.shape[0]
    act = np.flatnonzero(~zero)
    Da = D[:, act]
    live = np.array([j for j in pen if not zero[nb + j]], dtype=int)
    pos = np.searchsorted(act, nb + live)
    for _ in range(steps):
        m = D @ theta
        g = Da.T @ family.q1(m, y)
        H = Da.T @ (Da * family.weights(m)[:, None])
        if live.size:
            b = theta[nb + live]
            t = scale[live] * np.abs(b)
            if np.any(t == 0):
                break
            if p.kind == "scad":
                d1 = scale[live] * _scad_derivative(t, lam[live], p.a)
                d2 = scale[live] ** 2 * lam[live] * _scad_second_derivative(t, lam[live], p.a)
            else:
                d1 = scale[live] * lam[live]
                d2 = np.zeros(live.size)
            g[pos] -= n * d1 * np.sign(b)
            H[pos, pos] += n * d2
        try:
            delta = scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), g)
        except np.linalg.LinAlgError:
            break
        cand = theta.copy()
        cand[act] += delta
        if live.size and np.any(np.sign(cand[nb + live]) != np.sign(theta[nb + live])):
            break
        Lc, _ = objective(cand)
        if not (np.isfinite(Lc) and Lc >= Lp - 1e-12 * max(1.0, abs(Lp))):
            break
        theta, Lp = cand, Lc
        if np.max(np.abs(delta)) <= 1e-14 * max(1.0, np.max(np.abs(theta))):
            break
    return theta, Lp


def _selection_theta_layout(basis, d2):
    nb = basis.n_columns
    return nb, slice(nb, nb + d2)


def fit_penalized(data: Dataset, basis: AdditiveSplineBasis, family, p: Penalty, init: GaplmFit,
                  opts: FitOptions | None = None, max_iter: int = 500, tol: float = 1e-8,
                  score_cov: str = "model", start=None) -> SelectionResult:
    """Maximize sum Q - n sum_j p_lambda_j(|beta_j|) by LQA-modified Fisher scoring on (gamma, beta).

    ``init`` is the unpenalized fit; its standard errors set the zero threshold
    and its estimate is the starting point unless ``start`` (a full theta) is given.
    Stops when the largest coefficient change is below ``tol`` or, as in the
    unpenalized solver, when n^-1 times the LQA-penalized score is below ``tol``
    in sup-norm (the only test that fires when spline coefficients drift under
    near-separation).
    """
    family = get_family(family)
    opts = opts or FitOptions()
    if p.kind not in ("scad", "l1"):
        raise PenaltyConfigError("fit_penalized handles scad and l1; use best_subset_bic for l0")
    n, d2 = data.n, data.d2
    D = full_design(basis, data)
    y = data.y
    nb, bsl = _selection_theta_layout(basis, d2)
    lam = p.lambdas(d2)
    scale = p.scales(d2)
    pen = np.array([j for j in range(d2) if lam[j] > 0], dtype=int)
    threshold = ZERO_THRESHOLD * init.se
    theta = init.theta.copy() if start is None else np.array(start, dtype=float)
    zero = np.zeros(D.shape[1], dtype=bool)
    notes = []

    def objective(th):
        m = D @ th
        L = float(np.sum(family.q(m, y)))
        return _penalized_objective(L, th[bsl], pen, n * lam, scale, p), m

    Lp, m = objective(theta)
    history = [theta.copy()]
    best = (Lp, theta.copy())
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        beta = theta[bsl]
        newly = [j for j in pen if not zero[nb + j] and abs(beta[j]) < threshold[j]]
        for j in newly:
            zero[nb + j] = True
            theta[nb + j] = 0.0
        if newly:
            Lp, m = objective(theta)
        act = np.flatnonzero(~zero)
        Da = D[:, act]
        w = family.weights(m)
        score = Da.T @ family.q1(m, y)
        info = Da.T @ (Da * w[:, None])
        sig = np.zeros(D.shape[1])
        if pen.size:
            live = [j for j in pen if not zero[nb + j]]
            sig[[nb + j for j in live]] = _lqa_weights(np.abs(theta[[nb + j for j in live]]), lam[live], scale[live], p)
        sig_a = n * sig[act]
        H = info + np.diag(sig_a)
        g = score - sig_a * theta[act]
        if not newly and np.max(np.abs(g), initial=0.0) / n <= tol:
            converged = True
            break
        delta, _ = solve_spd(H, g, opts.ridge, opts.ridge_max)
        step = 1.0
        accepted = False
        for _ in range(opts.max_halving + 1):
            cand = theta.copy()
            cand[act] = theta[act] + step * delta
            Lc, mc = objective(cand)
            if np.isfinite(Lc) and Lc >= Lp - 1e-12 * max(1.0, abs(Lp)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            notes.append("step-halving exhausted in penalized scoring")
            converged = True if np.max(np.abs(delta), initial=0.0) <= tol * 10 else converged
            break
        change = float(np.max(np.abs(cand - theta), initial=0.0))
        theta, Lp, m = cand, Lc, mc
        if Lp > best[0]:
            best = (Lp, theta.copy())
        if change <= tol:
            converged = True
            break
        # cycle: back to an iterate seen 2-4 steps ago without settling
        if any(np.max(np.abs(theta - h)) <= tol for h in history[-4:-1]):
            notes.append("oscillating iterates; returning the best one seen")
            theta = best[1]
            break
        history.append(theta.copy())
        history = history[-4:]
    else:
        notes.append(f"penalized scoring hit max_iter={max_iter}")
    if converged:
        theta, Lp = _newton_polish(D, y, family, theta, Lp, zero, nb, pen, lam, scale, p, objective)

    zero_set = tuple(int(j) for j in range(d2) if zero[nb + j] or (j in pen and theta[nb + j] == 0.0))
    beta_mpl = theta[bsl].copy()
    beta_mpl[list(zero_set)] = 0.0

    # refit the spline part (and intercept) with beta held at its penalized estimate
    keep = np.r_[np.arange(nb), D.shape[1] - 1]
    sol = _maximize(D[:, keep], y, family, theta[keep], opts, offset=data.z @ beta_mpl)
    theta = theta.copy()
    theta[keep] = sol["theta"]
    theta[bsl] = beta_mpl
    m = D @ theta

    res = SelectionResult(
        beta=beta_mpl,
        intercept=float(theta[-1]),
        gamma=theta[:nb].copy(),
        zero_set=zero_set,
        covariance=np.zeros((d2, d2)),
        gcv=np.nan,
        effective_params=np.nan,
        deviance=_deviance(family, y, family.mean(m)),
        penalty=p,
        iterations=it,
        converged=converged,
        linear_predictor=m,
        basis=basis,
        family=family,
        z_names=tuple(data.z_names),
        warnings=tuple(notes),
    )
    cov = sandwich_covariance(res, data, basis, family, score_cov=score_cov)
    e = effective_parameters(res, data, basis, family)
    return replace(res, covariance=cov, effective_params=e, gcv=_gcv_value(res.deviance, e, n))


def _penalty_matrix(res: SelectionResult, n: int, act_beta) -> np.ndarray:
    p = res.penalty
    lam = p.lambdas(res.beta.size)
    sc = p.scales(res.beta.size)[act_beta]
    b = np.abs(res.beta[act_beta])
    la = lam[act_beta]
    out = np.zeros(len(act_beta))
    if p.kind in ("scad", "l1"):
        mask = la > 0
        if np.any(mask):
            out[mask] = _lqa_weights(b[mask], la[mask], sc[mask], p)
    return n * out


def _active_design(res, data, basis):
    D = full_design(basis, data)
    nb = basis.n_columns
    act_beta = res.active
    cols = np.r_[np.arange(nb), nb + act_beta, D.shape[1] - 1].astype(int)
    return D, cols, nb, act_beta


def sandwich_covariance(res: SelectionResult, data: Dataset, basis=None, family=None,
                        score_cov: str = "model") -> np.ndarray:
    """A^{-1} B A^{-1} over the active parameters, reported for the linear coefficients.

    ``A`` is the Fisher information plus n * Sigma_lambda (zero off the penalized
    block). ``B`` is the score covariance: the Fisher information itself
    (``score_cov='model'``) or the centered outer product of per-row scores
    (``'empirical'``). Spline coefficients and the intercept are nuisance
    parameters and are profiled out by taking the linear-coefficient block.
    """
    basis = basis or res.basis
    family = get_family(family or res.family)
    n, d2 = data.n, data.d2
    D, cols, nb, act_beta = _active_design(res, data, basis)
    Da = D[:, cols]
    m = D @ res.theta
    w = family.weights(m)
    info = Da.T @ (Da * w[:, None])
    sig = np.zeros(len(cols))
    sig[nb : nb + len(act_beta)] = _penalty_matrix(res, n, act_beta)
    A = info + np.diag(sig)
    if score_cov == "model":
        B = info
    elif score_cov == "empirical":
        s = Da * family.q1(m, data.y)[:, None]
        s = s - s.mean(axis=0)
        B = s.T @ s
    else:
        raise ValueError("score_cov must be 'model' or 'empirical'")
    Ainv, r = solve_spd(A, np.eye(A.shape[0]))
    if r:
        warnings.warn("singular sandwich bracket; ridge jitter applied", stacklevel=2)
    cov_a = Ainv @ B @ Ainv
    cov_a = 0.5 * (cov_a + cov_a.T)
    out = np.zeros((d2, d2))
    blk = slice(nb, nb + len(act_beta))
    out[np.ix_(act_beta, act_beta)] = cov_a[blk, blk]
    return out


def sandwich_se(res: SelectionResult, data: Dataset, basis=None, family=None, score_cov: str = "model") -> np.ndarray:
    """Sandwich standard errors; exactly 0 for coefficients in the zero set."""
    cov = sandwich_covariance(res, data, basis, family, score_cov=score_cov)
    return np.sqrt(np.clip(np.diag(cov), 0, None))


def effective_parameters(res: SelectionResult, data: Dataset, basis=None, family=None) -> float:
    """tr[(I_p + n Sigma_lambda)^{-1} I_p] over the nonzero linear coefficients.

    ``I_p`` is the Fisher information for those coefficients with the spline
    coefficients and intercept profiled out (Schur complement).
    """
    basis = basis or res.basis
    family = get_family(family or res.family)
    n = data.n
    D, cols, nb, act_beta = _active_design(res, data, basis)
    if act_beta.size == 0:
        return 0.0
    Da = D[:, cols]
    w = family.weights(D @ res.theta)
    info = Da.T @ (Da * w[:, None])
    b = np.arange(nb, nb + act_beta.size)
    o = np.setdiff1d(np.arange(len(cols)), b)
    Ibb = info[np.ix_(b, b)]
    Ibo = info[np.ix_(b, o)]
    Ioo = info[np.ix_(o, o)]
    Ip = Ibb - Ibo @ solve_spd(Ioo, Ibo.T)[0]
    Ip = 0.5 * (Ip + Ip.T)
    M = Ip + np.diag(_penalty_matrix(res, n, act_beta))
    return float(np.trace(solve_spd(M, Ip)[0]))


def _gcv_value(dev, e, n):
    if e >= n:
        return float("inf")
    return float(dev / (n * (1 - e / n) ** 2))


def gcv(res: SelectionResult, data: Dataset, basis=None, family=None) -> float:
    """Deviance / [n (1 - e/n)^2] at the penalized estimate."""
    basis = basis or res.basis
    family = get_family(family or res.family)
    D = full_design(basis, data)
    dev = _deviance(family, data.y, family.mean(D @ res.theta))
    return _gcv_value(dev, effective_parameters(res, data, basis, family), data.n)


def default_lambda_grid(n_points: int = 50, lo: float = 1e-3, hi: float = 1e2) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n_points)


def covariate_scale(data: Dataset) -> np.ndarray:
    """Sample standard deviations of the linear covariates (1 for constant columns)."""
    sd = data.z.std(axis=0)
    return np.where(sd > 0, sd, 1.0)


def tune_lambda(data: Dataset, basis: AdditiveSplineBasis, family, kind: str, grid=None,
                init: GaplmFit | None = None, a: float = 3.7, unpenalized=(), opts: FitOptions | None = None,
                score_cov: str = "model", standardize: bool = True):
    """Grid search on lambda with lambda_j = lambda * SE(beta_j) from the unpenalized fit.

    With ``standardize`` the penalty acts on sd-scaled coefficients and SE is
    the standard error on that scale, which makes selection independent of
    covariate units. Returns ``(lambda_hat, result)``; ties in GCV go to the
    larger lambda. The per-lambda path is stored in ``result.criterion['path']``.
    """
    family = get_family(family)
    opts = opts or FitOptions()
    grid = default_lambda_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    init = init or fit(data, basis, family, opts)
    scale = covariate_scale(data) if standardize else np.ones(data.d2)
    se = init.se * scale
    path = []
    results = []
    failures = []
    for lam in np.sort(grid):
        pen = Penalty(kind, lam * se, a=a, unpenalized=tuple(unpenalized), scale=scale)
        try:
            res = fit_penalized(data, basis, family, pen, init, opts, score_cov=score_cov)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            failures.append(f"lambda={lam:g}: {exc}")
            continue
        path.append({"lambda": float(lam), "gcv": res.gcv, "e": res.effective_params,
                     "n_zero": len(res.zero_set)})
        results.append((float(lam), res))
    if not results:
        raise RuntimeError("all penalized fits failed: " + "; ".join(failures))
    best_i = 0
    for i, (lam, res) in enumerate(results):
        g0 = results[best_i][1].gcv
        if res.gcv <= g0 + 1e-12 * abs(g0):
            best_i = i
    lam_hat, res = results[best_i]
    crit = {"lambda_hat": lam_hat, "path": path, "failures": failures}
    return lam_hat, replace(res, criterion=crit)


def best_subset_bic(data: Dataset, basis: AdditiveSplineBasis, family, unpenalized=(), opts: FitOptions | None = None,
                    max_d2: int = 20, score_cov: str = "model", full_fit: GaplmFit | None = None) -> SelectionResult:
    """Exhaustive search over subsets of the penalized linear covariates.

    BIC = deviance + (#linear coefficients + #spline coefficients + 1) log n.
    Each subset is refitted from the full-model estimate restricted to it.
    """
    family = get_family(family)
    opts = opts or FitOptions()
    d2, n = data.d2, data.n
    if d2 > max_d2:
        raise ValueError(f"best-subset search over {d2} covariates is too large; use SCAD instead")
    free = [j for j in range(d2) if j not in set(unpenalized)]
    full = full_fit or fit(data, basis, family, opts)
    nb = basis.n_columns
    D = full_design(basis, data)
    best = None
    scores = []
    for size in range(len(free) + 1):
        for sub in itertools.combinations(free, size):
            keep_beta = sorted(set(unpenalized) | set(sub))
            cols = np.r_[np.arange(nb), nb + np.array(keep_beta, dtype=int), D.shape[1] - 1].astype(int)
            Dsub = D[:, cols]
            try:
                _check_rank(Dsub, [str(c) for c in cols])
            except ValueError:
                continue
            sol = _maximize(Dsub, data.y, family, full.theta[cols], opts)
            dev = _deviance(family, data.y, family.mean(sol["m"]))
            bic = dev + (len(keep_beta) + nb + 1) * np.log(n)
            scores.append((tuple(keep_beta), float(bic), bool(sol["converged"])))
            if best is None or bic < best[0] - 1e-12 * abs(best[0]):
                best = (bic, keep_beta, sol, cols)
    bic, keep_beta, sol, cols = best
    theta = np.zeros(D.shape[1])
    theta[cols] = sol["theta"]
    zero_set = tuple(j for j in range(d2) if j not in keep_beta)
    m = D @ theta
    res = SelectionResult(
        beta=theta[nb : nb + d2].copy(),
        intercept=float(theta[-1]),
        gamma=theta[:nb].copy(),
        zero_set=zero_set,
        covariance=np.zeros((d2, d2)),
        gcv=np.nan,
        effective_params=np.nan,
        deviance=_deviance(family, data.y, family.mean(m)),
        penalty=Penalty("l0", np.zeros(1)),
        iterations=int(sol["iterations"]),
        converged=bool(sol["converged"]),
        linear_predictor=m,
        basis=basis,
        family=family,
        z_names=tuple(data.z_names),
        criterion={"bic": float(bic), "n_subsets": len(scores),
                   "subsets": [{"subset": list(s), "bic": b, "converged": c} for s, b, c in scores]},
    )
    cov = sandwich_covariance(res, data, basis, family, score_cov=score_cov)
    e = effective_parameters(res, data, basis, family)
    return replace(res, covariance=cov, effective_params=e, gcv=_gcv_value(res.deviance, e, n))
