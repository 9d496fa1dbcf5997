"""Command-line front end: ``gaplm {fit,select,simulate,knots}``.

Exit codes: 0 on success (a nonconverged fit is still a success and is
flagged in the report), 1 for usage errors, 2 for data errors. Errors are
also written to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from collections import Counter
from pathlib import Path

import numpy as np

from .fit import fit
from .io import DataError, ModelSpec, UsageError, ingest_csv, load_config, pima_path, PIMA_COMPLETE_N
from .select import best_subset_bic, default_lambda_grid, tune_lambda
from .sim import SimConfig, generate, run_monte_carlo, select_knots
from .spline import SplineDomainError, build_centered_basis, make_knots

# fallbacks used when neither a flag nor the config file sets a value
DEFAULTS = {
    "family": "binomial-logit",
    "order": 4,
    "placement": "quantile",
    "penalty": "scad",
    "a": 3.7,
    "reps": 100,
    "scenario": "s1",
    "n": 400,
    "rho": 0.5,
    "methods": "oracle,scad,lasso,bic",
    "folds": 5,
    "knot_range": "0,7",
    "n_jobs": 1,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(value):
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(str(v).strip() for v in value)
    return tuple(v.strip() for v in str(value).split(",") if v.strip())


def _int_list(value, what):
    try:
        return tuple(int(v) for v in _csv_list(value))
    except ValueError:
        raise UsageError(f"{what} must be comma-separated integers, got {value!r}") from None


def _float_list(value, what):
    try:
        return tuple(float(v) for v in _csv_list(value))
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaplm", description="Spline-based GAPLM fitting, variable selection and simulation.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="TOML config, or a JSON report whose config is reused")
        p.add_argument("--out", help="output directory (JSON report printed to stdout when absent)")
        p.add_argument("--seed", type=int)
        p.add_argument("--family")
        p.add_argument("--knots", help="interior knot counts, one per spline covariate (or one for all)")
        p.add_argument("--order", type=int, help="spline order (4 = cubic)")
        p.add_argument("--placement", choices=["quantile", "uniform"])

    def data_flags(p):
        p.add_argument("--data", help="CSV file, or 'pima' for the bundled table")
        p.add_argument("--response")
        p.add_argument("--linear", help="comma-separated linear covariates")
        p.add_argument("--nonparametric", help="comma-separated spline covariates")

    p = sub.add_parser("fit", help="unpenalized GAPLM fit")
    common(p)
    data_flags(p)

    p = sub.add_parser("select", help="penalized variable selection on the linear part")
    common(p)
    data_flags(p)
    p.add_argument("--penalty", choices=["scad", "lasso", "bic"])
    p.add_argument("--lambda-grid", help="comma-separated lambda values (default: 50 log-spaced in [1e-3, 1e2])")
    p.add_argument("--a", type=float, help="SCAD shape parameter")
    p.add_argument("--unpenalized", help="linear covariates exempt from the penalty")

    p = sub.add_parser("simulate", help="Monte Carlo study on a built-in scenario")
    common(p)
    p.add_argument("--scenario", choices=["s1", "s2"])
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--methods", help="comma-separated subset of oracle,scad,lasso,bic")
    p.add_argument("--lambda-grid")
    p.add_argument("--a", type=float)
    p.add_argument("--mrme-reference", choices=["gaplm", "glm"])
    p.add_argument("--n-jobs", type=int)

    p = sub.add_parser("knots", help="choose interior knot counts")
    common(p)
    data_flags(p)
    p.add_argument("--criterion", choices=["cv", "pe"], help="cv on --data, pe on a simulated --scenario")
    p.add_argument("--folds", type=int)
    p.add_argument("--knot-range", help="lo,hi interior knots per covariate")
    p.add_argument("--scenario", choices=["s1", "s2"])
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--rho", type=float)
    return parser


def resolve(args) -> dict:
    """Merge defaults < config file < flags into one flat dict."""
    cfg = dict(DEFAULTS)
    if args.config:
        loaded = load_config(args.config)
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        cfg[key] = value
    return cfg


def _seed(cfg) -> int:
    if cfg.get("seed") is None:
        cfg["seed"] = int(np.random.SeedSequence().entropy % 2**32)
        print(f"seed: {cfg['seed']}", file=sys.stderr)
    return int(cfg["seed"])


def _data_path(cfg):
    data = cfg.get("data")
    if not data:
        raise UsageError("--data is required")
    return pima_path() if str(data).lower() == "pima" else Path(data)


def _spec(cfg) -> ModelSpec:
    response = cfg.get("response") or ("Outcome" if str(cfg.get("data", "")).lower() == "pima" else None)
    if not response:
        raise UsageError("--response is required")
    return ModelSpec(
        response=response,
        linear=_csv_list(cfg.get("linear")),
        nonparametric=_csv_list(cfg.get("nonparametric")),
        family=cfg["family"],
        knots=_int_list(cfg.get("knots"), "--knots"),
        order=int(cfg["order"]),
        placement=cfg["placement"],
        penalty=cfg.get("penalty", "scad"),
        a=float(cfg.get("a", 3.7)),
        unpenalized=_csv_list(cfg.get("unpenalized")),
        seed=cfg.get("seed"),
    )


def _load(cfg):
    spec = _spec(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data, report = ingest_csv(_data_path(cfg), spec, return_report=True)
    if not spec.linear and not spec.nonparametric:
        spec = ModelSpec(**{**spec.to_dict(), "linear": data.z_names, "nonparametric": data.x_names})
    info = {"n": data.n, "n_dropped": report.n_dropped, "response_map": report.response_map,
            "warnings": [str(w.message) for w in caught]}
    if str(cfg.get("data", "")).lower() == "pima" and data.n != PIMA_COMPLETE_N:
        info["warnings"].append(f"complete-case count {data.n} differs from the expected {PIMA_COMPLETE_N}")
    return spec, data, info


def _basis(spec, data):
    kv = [make_knots(J, spec.order, spec.placement, data.x[:, k]) for k, J in enumerate(spec.knot_counts())]
    return build_centered_basis(data, kv)


def _emit(cfg, report, name, table=None):
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"
    out = cfg.get("out")
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text)
        if table:
            print(table)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _clean(obj):
    """Replace non-finite floats so the JSON output is strict."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _coef_table(names, beta, se):
    lines = [f"{'':<12}{'estimate':>12}{'se':>10}"]
    for n, b, s in zip(names, beta, se):
        s_txt = "-" if s is None else f"{s:10.4f}"
        lines.append(f"{n:<12}{b:12.4f}{s_txt:>10}")
    return "\n".join(lines)


def run_fit(cfg) -> int:
    seed = _seed(cfg)
    spec, data, info = _load(cfg)
    res = fit(data, _basis(spec, data), spec.family)
    report = {"command": "fit", "seed": seed, "config": _config_record(cfg, spec), "data": info, **res.to_dict()}
    _emit(cfg, _clean(report), "fit", _coef_table(data.z_names, res.beta, res.se))
    return 0


def run_select(cfg) -> int:
    seed = _seed(cfg)
    spec, data, info = _load(cfg)
    basis = _basis(spec, data)
    init = fit(data, basis, spec.family)
    unpen = [data.z_names.index(c) for c in spec.unpenalized]
    kind = spec.penalty
    if kind == "bic":
        res = best_subset_bic(data, basis, spec.family, unpenalized=unpen, full_fit=init)
    else:
        grid = _float_list(cfg.get("lambda_grid"), "--lambda-grid") or tuple(default_lambda_grid())
        _, res = tune_lambda(data, basis, spec.family, kind, grid, init=init, a=spec.a, unpenalized=unpen)
    body = res.to_dict()
    body["criterion"] = {k: v for k, v in body["criterion"].items() if k not in ("subsets",)}
    report = {"command": "select", "seed": seed, "config": _config_record(cfg, spec), "data": info,
              "unpenalized_fit": {"converged": init.converged, "coefficients": init.to_dict()["coefficients"]},
              **body}
    se = [None if j in res.zero_set else s for j, s in enumerate(res.se)]
    _emit(cfg, _clean(report), "select", _coef_table(data.z_names, res.beta, se))
    return 0


def _sim_config(cfg) -> SimConfig:
    knots = cfg.get("knots")
    if knots is None:
        knots = (2, 2) if int(cfg["n"]) <= 100 else (5, 3)
    elif str(knots) not in ("pe", "cv"):
        knots = _int_list(knots, "--knots")
    lam = cfg.get("lambda_grid")
    try:
        return SimConfig(
            scenario=cfg["scenario"],
            n=int(cfg["n"]),
            replicates=int(cfg["reps"]),
            rho=float(cfg["rho"]),
            knots=knots if isinstance(knots, str) else tuple(knots),
            knot_range=_int_list(cfg["knot_range"], "--knot-range"),
            methods=_csv_list(cfg["methods"]),
            seed=_seed(cfg),
            order=int(cfg["order"]),
            placement=cfg["placement"],
            lambda_grid=_float_list(lam, "--lambda-grid") if lam else None,
            a=float(cfg["a"]),
            mrme_reference=cfg.get("mrme_reference", "gaplm"),
            n_jobs=int(cfg["n_jobs"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_replicates(path, summary):
    methods = summary.config.methods
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "converged", "ME_unpenalized", "PE_unpenalized"]
                   + [f"{m}_{k}" for m in methods for k in ("C", "I", "ME", "RME", "PE")])
        for rec in summary.replicates:
            row = [rec["replicate"], int(rec["converged"]),
                   _fmt(rec.get("ME_unpenalized")), _fmt(rec.get("PE_unpenalized"))]
            for m in methods:
                r = rec.get(m, {})
                row += [r.get("C", ""), r.get("I", ""), _fmt(r.get("ME")), _fmt(r.get("RME")), _fmt(r.get("PE"))]
            w.writerow(row)


def _fmt(v):
    return "" if v is None else f"{v:.10g}"


def _write_components(out, summary):
    for name, c in (summary.components or {}).items():
        with open(out / f"component_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            keys = ["grid", "truth", "mean", "abs_bias", "variance", "lower", "upper"]
            w.writerow([k if k not in ("lower", "upper") else {"lower": "q2.5", "upper": "q97.5"}[k] for k in keys])
            for row in zip(*(c[k] for k in keys)):
                w.writerow([f"{v:.10g}" for v in row])


def run_simulate(cfg) -> int:
    sc = _sim_config(cfg)
    summary = run_monte_carlo(sc)
    report = {"command": "simulate", "seed": sc.seed, "config": sc.to_dict(), "methods": summary.methods,
              "n_nonconverged": summary.n_nonconverged, "n_used": summary.n_used}
    out = cfg.get("out")
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.tsv").write_text(summary.to_tsv())
        _write_replicates(out / "replicates.csv", summary)
        _write_components(out, summary)
    _emit(cfg, _clean(report), "simulate", summary.to_tsv().rstrip())
    return 0


def run_knots(cfg) -> int:
    seed = _seed(cfg)
    lo, hi = _int_list(cfg["knot_range"], "--knot-range")
    if cfg.get("data"):
        if cfg.get("criterion", "cv") != "cv":
            raise UsageError("the pe criterion needs a simulated --scenario, not --data")
        spec, data, info = _load(cfg)
        cand = [range(lo, hi + 1)] * data.d1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            choice = select_knots(data, cand, "cv", k=int(cfg["folds"]), seed=seed, family=spec.family,
                                  order=spec.order, placement=spec.placement)
        report = {"command": "knots", "seed": seed, "config": _config_record(cfg, spec), "data": info,
                  "criterion": "cv", "knots": dict(zip(data.x_names, choice.J)), "score": choice.score,
                  "scores": {",".join(map(str, J)): s for J, s in sorted(choice.scores.items())}}
        _emit(cfg, _clean(report), "knots", f"chosen knots: {choice.J}")
        return 0
    # simulation experiment: frequency of the PE-optimal combination
    crit = cfg.get("criterion", "pe")
    counts = Counter()
    for ss in np.random.SeedSequence(seed).spawn(int(cfg["reps"])):
        rng = np.random.default_rng(ss)
        data, truth = generate(cfg["scenario"], int(cfg["n"]), rng, float(cfg["rho"]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            choice = select_knots(data, [range(lo, hi + 1)] * data.d1, crit, truth=truth, k=int(cfg["folds"]),
                                  seed=rng, order=int(cfg["order"]), placement=cfg["placement"])
        counts[choice.J] += 1
    freq = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    report = {"command": "knots", "seed": seed, "criterion": crit, "scenario": cfg["scenario"], "n": int(cfg["n"]),
              "reps": int(cfg["reps"]), "modal": list(freq[0][0]),
              "frequencies": [{"knots": list(J), "count": c} for J, c in freq]}
    table = "\n".join(f"{J}\t{c}" for J, c in freq)
    _emit(cfg, _clean(report), "knots", table)
    return 0


DATA_KEYS = ("data", "seed", "family", "order", "placement", "penalty", "a", "lambda_grid", "unpenalized",
             "criterion", "folds", "knot_range")


def _config_record(cfg, spec):
    rec = {k: cfg[k] for k in DATA_KEYS if cfg.get(k) is not None}
    rec.update({"response": spec.response, "linear": list(spec.linear), "nonparametric": list(spec.nonparametric),
                "knots": list(spec.knot_counts())})
    return _clean(rec)


COMMANDS = {"fit": run_fit, "select": run_select, "simulate": run_simulate, "knots": run_knots}


def _fail(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        return _fail("usage", str(exc), 1)
    except (DataError, SplineDomainError) as exc:
        return _fail("data", str(exc), 2)
    except (ValueError, RuntimeError) as exc:
        return _fail("data", str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
