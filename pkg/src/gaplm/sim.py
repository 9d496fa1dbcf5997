"""Monte Carlo harness for the logistic GAPLM scenarios.

Scenario ``s1``: logit P(Y=1) = eta1(X1) + eta2(X2) + Z'beta with
beta = (3, 1.5, 0, 0, 0, 0, 2, 0). The vector (Z1..Z8, X1, X2) is driven by a
Gaussian AR(1) latent vector W with correlation rho = 0.5; Z_j = 0.5 + 0.3 W_j
and X_k = Phi(W_k), so the Z's are N(0.5, 0.09) and the X's Uniform[0, 1].

Scenario ``s2``: beta = (3, 1.5, 2); (Z1, Z2, X1, X2) are N(0, 0.09) with AR(rho)
correlation in that order, Z3 ~ Bernoulli(0.5) independent; the X's enter the
model (and the spline fit) through Phi(X / 0.3).

Replicate r of a run with master seed s uses
``np.random.SeedSequence(s).spawn(replicates)[r]``, so replicates are
independent and the order they are computed in does not matter.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import expit
from scipy.stats import norm

from .family import deviance as _deviance
from .family import get_family
from .fit import FitOptions, _glm_start, component, fit, fit_glm
from .select import best_subset_bic, default_lambda_grid, tune_lambda
from .spline import Dataset, build_centered_basis, make_knots

log = logging.getLogger(__name__)

__all__ = [
    "Truth",
    "SimConfig",
    "SimSummary",
    "eta1",
    "eta2",
    "ETA2_MEAN",
    "generate_s1",
    "generate_s2",
    "generate",
    "prediction_error",
    "model_error",
    "second_moment",
    "eta_error",
    "run_monte_carlo",
    "select_knots",
    "KnotChoice",
]

BETA_S1 = np.array([3.0, 1.5, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0])
BETA_S2 = np.array([3.0, 1.5, 2.0])
METHODS = ("oracle", "scad", "lasso", "bic")


def eta1(x):
    return np.sin(4 * np.pi * np.asarray(x, dtype=float))


def _eta2_raw(x):
    x = np.asarray(x, dtype=float)
    return 10 * (np.exp(-3.25 * x) + 4 * np.exp(-6.5 * x) + 3 * np.exp(-9.75 * x))


ETA2_MEAN = quad(_eta2_raw, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)[0]


def eta2(x):
    """Second additive function, centered to mean zero under Uniform[0, 1]."""
    return _eta2_raw(x) - ETA2_MEAN


@dataclass(frozen=True)
class Truth:
    scenario: str
    beta: np.ndarray
    eta: np.ndarray  # true additive part at each row
    m: np.ndarray  # true linear predictor at each row

    @property
    def zero_idx(self) -> np.ndarray:
        return np.flatnonzero(self.beta == 0)

    @property
    def nonzero_idx(self) -> np.ndarray:
        return np.flatnonzero(self.beta != 0)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ar1_latent(rng, n, d, rho):
    w = np.empty((n, d))
    w[:, 0] = rng.standard_normal(n)
    innov = np.sqrt(1 - rho * rho)
    for k in range(1, d):
        w[:, k] = rho * w[:, k - 1] + innov * rng.standard_normal(n)
    return w


def _covariates_s1(rng, n, rho=0.5):
    d2 = BETA_S1.size
    w = _ar1_latent(rng, n, d2 + 2, rho)
    return 0.5 + 0.3 * w[:, :d2], norm.cdf(w[:, d2:])


def _covariates_s2(rng, n, rho):
    w = _ar1_latent(rng, n, 4, rho)
    z = np.column_stack([0.3 * w[:, 0], 0.3 * w[:, 1], rng.binomial(1, 0.5, n).astype(float)])
    return z, norm.cdf(w[:, 2:])


def _finish(rng, scenario, x, z, beta):
    eta = eta1(x[:, 0]) + eta2(x[:, 1])
    m = eta + z @ beta
    y = rng.binomial(1, expit(m)).astype(float)
    data = Dataset(
        y=y,
        x=x,
        z=z,
        x_ranges=np.tile([0.0, 1.0], (2, 1)),
        y_name="Y",
        x_names=["X1", "X2"],
        z_names=[f"Z{j + 1}" for j in range(z.shape[1])],
    )
    return data, Truth(scenario=scenario, beta=beta.copy(), eta=eta, m=m)


def generate_s1(n: int, seed=None, rho: float = 0.5):
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    z, x = _covariates_s1(rng, n, rho)
    return _finish(rng, "s1", x, z, BETA_S1)


def generate_s2(n: int, rho: float = 0.5, seed=None):
    if n < 1:
        raise ValueError("n must be >= 1")
    if not -1 < rho < 1:
        raise ValueError("rho must be in (-1, 1)")
    rng = _rng(seed)
    z, x = _covariates_s2(rng, n, rho)
    return _finish(rng, "s2", x, z, BETA_S2)


def generate(scenario: str, n: int, seed=None, rho: float = 0.5):
    if scenario == "s1":
        return generate_s1(n, seed, rho)
    if scenario == "s2":
        return generate_s2(n, rho, seed)
    raise ValueError(f"unknown scenario {scenario!r}")


@lru_cache(maxsize=16)
def second_moment(scenario: str, rho: float = 0.5, draws: int = 10**6, seed: int = 20110601) -> np.ndarray:
    """Monte Carlo estimate of E(ZZ') for a scenario (cached per arguments)."""
    rng = np.random.default_rng(seed)
    if scenario == "s1":
        z, _ = _covariates_s1(rng, draws, rho)
    elif scenario == "s2":
        z, _ = _covariates_s2(rng, draws, rho)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    out = z.T @ z / draws
    out.flags.writeable = False
    return out


def prediction_error(fit_, truth: Truth, dataset: Dataset | None = None) -> float:
    """Mean squared difference between fitted and true probabilities over the sample."""
    return float(np.mean((expit(fit_.linear_predictor) - expit(truth.m)) ** 2))


def model_error(beta_hat, beta_true, second_moment_) -> float:
    d = np.asarray(beta_hat, dtype=float) - np.asarray(beta_true, dtype=float)
    S = np.asarray(second_moment_, dtype=float)
    if S.shape != (d.size, d.size):
        raise ValueError(f"dimension mismatch: beta has {d.size} entries, second moment is {S.shape}")
    return float(d @ S @ d)


def eta_error(fit_, data: Dataset, truth: Truth) -> float:
    """Empirical norm ||eta_hat - eta_0||_n, eta_hat including the fitted intercept."""
    eta_hat = fit_.linear_predictor - data.z @ fit_.beta
    return float(np.sqrt(np.mean((eta_hat - truth.eta) ** 2)))


# -- knot selection -----------------------------------------------------------------


@dataclass(frozen=True)
class KnotChoice:
    J: tuple[int, ...]
    score: float
    criterion: str
    scores: dict = field(default_factory=dict)
    skipped: tuple = ()


def _basis_for(data, J, order, placement):
    kv = [make_knots(int(j), order, placement, data.x[:, k]) for k, j in enumerate(J)]
    return build_centered_basis(data, kv)


def _cv_deviance(data, J, k, folds, family, order, placement, opts):
    total = 0.0
    for f in range(k):
        test = folds == f
        train = data.subset(~test)
        basis = _basis_for(train, J, order, placement)
        res = fit(train, basis, family, opts)
        m = basis.transform(data.x[test]) @ res.gamma + data.z[test] @ res.beta + res.intercept
        total += _deviance(family, data.y[test], family.mean(m))
    return total


def select_knots(data: Dataset, candidates, criterion: str = "pe", truth: Truth | None = None, k: int = 5,
                 seed=None, family="binomial-logit", order: int = 4, placement: str = "quantile",
                 opts: FitOptions | None = None) -> KnotChoice:
    """Exhaustive search over interior-knot counts, one candidate range per covariate.

    ``criterion='pe'`` needs the simulation truth; ``'cv'`` uses k-fold held-out
    deviance. Ties go to fewer total knots.
    """
    family = get_family(family)
    opts = opts or FitOptions()
    candidates = [list(c) for c in candidates]
    if len(candidates) != data.d1:
        raise ValueError(f"need one candidate range per nonparametric covariate ({data.d1})")
    if criterion == "pe":
        if truth is None:
            raise ValueError("the PE criterion needs the true linear predictor")
        glm = _glm_start(data.z, data.y, family, opts)
    elif criterion == "cv":
        if k < 2:
            raise ValueError("cross-validation needs k >= 2")
        folds = np.arange(data.n) % k
        _rng(seed).shuffle(folds)
    else:
        raise ValueError(f"unknown criterion {criterion!r}")

    scores = {}
    skipped = []
    for J in itertools.product(*candidates):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                if criterion == "pe":
                    basis = _basis_for(data, J, order, placement)
                    start = np.concatenate([np.zeros(basis.n_columns), glm["theta"]])
                    res = fit(data, basis, family, opts, start=start)
                    score = prediction_error(res, truth)
                else:
                    score = _cv_deviance(data, J, k, folds, family, order, placement, opts)
        except (ValueError, np.linalg.LinAlgError) as exc:
            skipped.append((J, str(exc)))
            continue
        if np.isfinite(score):
            scores[tuple(int(j) for j in J)] = float(score)
    if skipped:
        warnings.warn(f"{len(skipped)} knot combinations skipped after fit failures", stacklevel=2)
    if not scores:
        raise RuntimeError("every knot combination failed")
    best = min(scores, key=lambda J: (scores[J], sum(J), J))
    return KnotChoice(J=best, score=scores[best], criterion=criterion, scores=scores, skipped=tuple(skipped))


# -- Monte Carlo --------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    scenario: str = "s1"
    n: int = 400
    replicates: int = 100
    rho: float = 0.5
    knots: tuple[int, ...] | str = (5, 3)  # fixed counts, "pe", or "cv"
    knot_range: tuple[int, int] = (0, 7)
    cv_folds: int = 5
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    order: int = 4
    placement: str = "quantile"
    lambda_grid: tuple[float, ...] | None = None
    a: float = 3.7
    mrme_reference: str = "gaplm"  # or "glm"
    plot_grid: int = 101
    n_jobs: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not -1 < self.rho < 1:
            raise ValueError("rho must be in (-1, 1)")
        if self.scenario not in ("s1", "s2"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if self.mrme_reference not in ("gaplm", "glm"):
            raise ValueError("mrme_reference must be 'gaplm' or 'glm'")
        if isinstance(self.knots, str) and self.knots not in ("pe", "cv"):
            raise ValueError("knots must be a tuple of counts, 'pe' or 'cv'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["knots"] = self.knots if isinstance(self.knots, str) else list(self.knots)
        return d


@dataclass
class SimSummary:
    config: SimConfig
    methods: dict  # method -> {"C", "I", "MRME", "C_se", "I_se", "n"}
    replicates: list  # one dict per replicate, in replicate order
    n_nonconverged: int
    components: dict | None = None  # plot data per covariate

    @property
    def n_used(self) -> int:
        return sum(1 for r in self.replicates if r["converged"])

    def table_rows(self):
        return [(m, s["C"], s["I"], s["MRME"]) for m, s in self.methods.items()]

    def to_tsv(self) -> str:
        lines = ["method\tC\tI\tMRME\tC_se\tI_se\tn"]
        for m, s in self.methods.items():
            lines.append(f"{m.upper()}\t{s['C']:.4f}\t{s['I']:.4f}\t{s['MRME']:.4f}\t{s['C_se']:.4f}\t{s['I_se']:.4f}\t{s['n']}")
        return "\n".join(lines) + "\n"


def _knots_for_replicate(cfg, data, truth, seed):
    if isinstance(cfg.knots, str):
        lo, hi = cfg.knot_range
        cand = [range(lo, hi + 1)] * data.d1
        if cfg.knots == "pe":
            return select_knots(data, cand, "pe", truth, order=cfg.order, placement=cfg.placement).J
        return select_knots(data, cand, "cv", k=cfg.cv_folds, seed=seed, order=cfg.order,
                            placement=cfg.placement).J
    return tuple(cfg.knots)


def _run_replicate(cfg: SimConfig, r: int, ss: np.random.SeedSequence, S: np.ndarray, grid: np.ndarray) -> dict:
    rng = np.random.default_rng(ss)
    data, truth = generate(cfg.scenario, cfg.n, rng, cfg.rho)
    rec = {"replicate": r, "converged": False}
    opts = FitOptions()
    try:
        J = _knots_for_replicate(cfg, data, truth, rng)
        basis = _basis_for(data, J, cfg.order, cfg.placement)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            unpen = fit(data, basis, "binomial-logit", opts)
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        rec["error"] = str(exc)
        return rec
    rec["knots"] = list(J)
    rec["converged"] = bool(unpen.converged)
    rec["iterations"] = unpen.iterations
    if not unpen.converged:
        return rec
    me_ref = model_error(unpen.beta, truth.beta, S)
    if cfg.mrme_reference == "glm":
        me_ref = model_error(fit_glm(data, "binomial-logit", opts).beta, truth.beta, S)
    rec["ME_unpenalized"] = model_error(unpen.beta, truth.beta, S)
    rec["PE_unpenalized"] = prediction_error(unpen, truth)
    rec["eta_error"] = eta_error(unpen, data, truth)
    rec["components"] = [component(unpen, k, grid).tolist() for k in range(data.d1)]
    grid_lambda = default_lambda_grid() if cfg.lambda_grid is None else np.asarray(cfg.lambda_grid)
    zero_true = truth.zero_idx
    nonzero_true = truth.nonzero_idx
    for method in cfg.methods:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if method == "oracle":
                sub = data.select_z(nonzero_true)
                res = fit(sub, basis, "binomial-logit", opts)
                beta = np.zeros(data.d2)
                beta[nonzero_true] = res.beta
                conv = res.converged
                pe = prediction_error(res, truth)
            elif method in ("scad", "lasso"):
                _, res = tune_lambda(data, basis, "binomial-logit", method, grid_lambda, init=unpen, a=cfg.a,
                                     opts=opts)
                beta, conv = res.beta, res.converged
                pe = prediction_error(res, truth)
            else:
                res = best_subset_bic(data, basis, "binomial-logit", opts=opts, full_fit=unpen)
                beta, conv = res.beta, res.converged
                pe = prediction_error(res, truth)
        me = model_error(beta, truth.beta, S)
        rec[method] = {
            "beta": beta.tolist(),
            "C": int(np.sum(beta[zero_true] == 0)),
            "I": int(np.sum(beta[nonzero_true] == 0)),
            "ME": me,
            "RME": me / me_ref if me_ref > 0 else np.nan,
            "PE": pe,
            "converged": bool(conv),
        }
    return rec


def _summarize_components(records, grid, d1):
    out = {}
    truths = [eta1(grid), eta2(grid)]
    for k in range(d1):
        curves = np.array([r["components"][k] for r in records if r.get("converged")])
        if curves.size == 0:
            continue
        mean = curves.mean(axis=0)
        out[f"X{k + 1}"] = {
            "grid": grid.tolist(),
            "truth": truths[k].tolist(),
            "mean": mean.tolist(),
            "abs_bias": np.abs(mean - truths[k]).tolist(),
            "variance": curves.var(axis=0).tolist(),
            "lower": np.percentile(curves, 2.5, axis=0).tolist(),
            "upper": np.percentile(curves, 97.5, axis=0).tolist(),
        }
    return out


def run_monte_carlo(cfg: SimConfig) -> SimSummary:
    """Generate, fit and select on ``cfg.replicates`` independent data sets and aggregate C, I, MRME."""
    S = second_moment(cfg.scenario, cfg.rho)
    grid = np.linspace(0.0, 1.0, cfg.plot_grid)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replicates)
    if cfg.n_jobs == 1:
        records = [_run_replicate(cfg, r, ss, S, grid) for r, ss in enumerate(children)]
    else:
        from joblib import Parallel, delayed

        records = Parallel(n_jobs=cfg.n_jobs)(delayed(_run_replicate)(cfg, r, ss, S, grid)
                                              for r, ss in enumerate(children))
    records.sort(key=lambda rec: rec["replicate"])
    used = [rec for rec in records if rec["converged"]]
    n_bad = len(records) - len(used)
    if n_bad:
        log.info("%d of %d replicates did not converge and are excluded", n_bad, len(records))
    methods = {}
    for method in cfg.methods:
        rows = [rec[method] for rec in used]
        if not rows:
            methods[method] = {"C": np.nan, "I": np.nan, "MRME": np.nan, "C_se": np.nan, "I_se": np.nan, "n": 0}
            continue
        C = np.array([row["C"] for row in rows], dtype=float)
        I = np.array([row["I"] for row in rows], dtype=float)
        rme = np.array([row["RME"] for row in rows], dtype=float)
        k = len(rows)
        methods[method] = {
            "C": float(C.mean()),
            "I": float(I.mean()),
            "MRME": float(np.nanmedian(rme)),
            "C_se": float(C.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0,
            "I_se": float(I.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0,
            "n": k,
        }
    comps = _summarize_components(records, grid, 2)
    return SimSummary(config=cfg, methods=methods, replicates=records, n_nonconverged=n_bad, components=comps)
