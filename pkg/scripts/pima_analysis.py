#!/usr/bin/env python3
"""Pima diabetes analysis: GLM baseline, CV knot choice and SCAD/LASSO/BIC selection."""
import warnings

from gaplm.fit import fit, fit_glm
from gaplm.io import PIMA_LINEAR, load_pima
from gaplm.select import best_subset_bic, tune_lambda
from gaplm.sim import select_knots
from gaplm.spline import build_centered_basis, make_knots


def show(title, names, beta, se):
    print(title)
    for name, b, s in zip(names, beta, se):
        print(f"  {name:8s} {b:8.3f} ({s:.3f})" if b != 0 else f"  {name:8s}        0")


def main():
    warnings.simplefilter("ignore")
    glm_data = load_pima(linear=PIMA_LINEAR + ("BMI", "AGE"), nonparametric=())
    g = fit_glm(glm_data)
    show(f"logistic regression (n={glm_data.n})", glm_data.z_names, g.beta, g.se)

    data = load_pima()
    choice = select_knots(data, [range(4)] * data.d1, "cv", k=5, seed=20110601)
    print(f"\n5-fold CV knot choice for (BMI, AGE): {choice.J}")
    basis = build_centered_basis(data, [make_knots(j, 4, "quantile", data.x[:, k]) for k, j in enumerate(choice.J)])
    unpen = fit(data, basis)
    for kind in ("scad", "lasso"):
        lam, res = tune_lambda(data, basis, "binomial-logit", kind, init=unpen)
        show(f"\n{kind.upper()} (lambda={lam:.4g}, GCV={res.gcv:.4f})", data.z_names, res.beta, res.se)
    res = best_subset_bic(data, basis, "binomial-logit", full_fit=unpen)
    show("\nbest-subset BIC", data.z_names, res.beta, res.se)


if __name__ == "__main__":
    main()
