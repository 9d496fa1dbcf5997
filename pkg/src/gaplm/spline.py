"""Knot sequences, B-spline bases and the centered additive design."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KnotVector",
    "AdditiveSplineBasis",
    "Dataset",
    "SplineDomainError",
    "RankDeficiencyError",
    "make_knots",
    "eval_raw_basis",
    "build_centered_basis",
    "design_row",
    "design_matrix",
]


class SplineDomainError(ValueError):
    pass


class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True)
class KnotVector:
    """Clamped knot vector on [0, 1]: ``order`` repeated boundary knots at each end."""

    order: int
    interior: tuple[float, ...] = ()

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("spline order must be >= 1")
        xi = np.asarray(self.interior, dtype=float)
        if xi.size and (np.any(np.diff(xi) <= 0) or xi[0] <= 0 or xi[-1] >= 1):
            raise ValueError("interior knots must be strictly increasing inside (0, 1)")

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    @property
    def dim(self) -> int:
        return self.n_interior + self.order

    @property
    def knots(self) -> np.ndarray:
        r = self.order
        return np.concatenate([np.zeros(r), np.asarray(self.interior, dtype=float), np.ones(r)])

    def to_dict(self) -> dict:
        return {"order": self.order, "interior": [float(v) for v in self.interior]}

    @classmethod
    def from_dict(cls, d: dict) -> "KnotVector":
        return cls(order=int(d["order"]), interior=tuple(float(v) for v in d["interior"]))


def make_knots(J: int, r: int = 4, placement: str = "uniform", x=None) -> KnotVector:
    """Interior knots at j/(J+1) (uniform) or at the j/(J+1) sample quantiles of ``x``.

    Quantile knots that coincide, or land on the boundary, are dropped with a
    warning, so the returned vector can have fewer than ``J`` interior knots.
    """
    if J < 0:
        raise ValueError("number of interior knots must be >= 0")
    if r < 1:
        raise ValueError("spline order must be >= 1")
    probs = np.arange(1, J + 1) / (J + 1)
    if placement == "uniform":
        return KnotVector(r, tuple(float(p) for p in probs))
    if placement != "quantile":
        raise ValueError(f"unknown knot placement {placement!r}")
    if J == 0:
        return KnotVector(r, ())
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("quantile knots need a nonempty sample")
    xi = np.unique(np.quantile(x, probs))
    xi = xi[(xi > 0) & (xi < 1)]
    if xi.size < J:
        warnings.warn(f"quantile knots collapsed from {J} to {xi.size} after de-duplication", stacklevel=2)
    return KnotVector(r, tuple(float(v) for v in xi))


def eval_raw_basis(kv: KnotVector, x) -> np.ndarray:
    """B-spline basis values, shape ``(len(x), J + r)`` (or ``(J + r,)`` for scalar x).

    Spans are right-continuous; x = 1 is assigned to the last span so the
    last basis function equals 1 there.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        bad = x[~((x >= 0) & (x <= 1))][0]
        raise SplineDomainError(f"x={bad!r} outside [0, 1]")
    U = kv.knots
    p = kv.order - 1
    J = kv.n_interior
    span = np.clip(np.searchsorted(U, x, side="right") - 1, p, p + J)

    n = x.size
    N = np.zeros((n, p + 1))
    N[:, 0] = 1.0
    left = np.zeros((n, p + 1))
    right = np.zeros((n, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - U[span + 1 - j]
        right[:, j] = U[span + j] - x
        saved = np.zeros(n)
        for k in range(j):
            temp = N[:, k] / (right[:, k + 1] + left[:, j - k])
            N[:, k] = saved + right[:, k + 1] * temp
            saved = left[:, j - k] * temp
        N[:, j] = saved

    out = np.zeros((n, kv.dim))
    cols = span[:, None] - p + np.arange(p + 1)[None, :]
    np.put_along_axis(out, cols, N, axis=1)
    return out[0] if scalar else out


@dataclass(frozen=True)
class AdditiveSplineBasis:
    """Per-covariate bases with the first B-spline dropped and the rest centered.

    ``means[k]`` holds the training-sample means of raw columns 2..J+r of
    covariate k; they are subtracted again when evaluating at new points.
    """

    knots: tuple[KnotVector, ...]
    means: tuple[np.ndarray, ...]

    @property
    def d1(self) -> int:
        return len(self.knots)

    @property
    def n_basis(self) -> list[int]:
        return [kv.dim - 1 for kv in self.knots]

    @property
    def n_columns(self) -> int:
        return int(sum(self.n_basis))

    def block(self, k: int) -> slice:
        start = sum(self.n_basis[:k])
        return slice(start, start + self.n_basis[k])

    def evaluate_component(self, k: int, x) -> np.ndarray:
        raw = eval_raw_basis(self.knots[k], np.asarray(x, dtype=float))
        return raw[..., 1:] - self.means[k]

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.d1 == 1 else x[None, :]
        if x.shape[1] != self.d1:
            raise ValueError(f"expected {self.d1} nonparametric covariates, got {x.shape[1]}")
        if self.d1 == 0:
            return np.zeros((x.shape[0], 0))
        return np.hstack([self.evaluate_component(k, x[:, k]) for k in range(self.d1)])

    def to_dict(self) -> dict:
        return {
            "knots": [kv.to_dict() for kv in self.knots],
            "means": [m.tolist() for m in self.means],
        }


@dataclass
class Dataset:
    """Response, nonparametric covariates rescaled to [0, 1], and linear covariates.

    ``x_ranges[k] = (a_k, b_k)`` is the original range of covariate k, so
    ``raw = a + (b - a) * unit``.
    """

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    x_ranges: np.ndarray = None
    y_name: str = "y"
    x_names: list[str] = field(default_factory=list)
    z_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        n = self.y.size
        self.x = np.asarray(self.x, dtype=float).reshape(n, -1)
        self.z = np.asarray(self.z, dtype=float).reshape(n, -1)
        if self.x_ranges is None:
            self.x_ranges = np.tile([0.0, 1.0], (self.d1, 1))
        self.x_ranges = np.asarray(self.x_ranges, dtype=float).reshape(self.d1, 2)
        if not self.x_names:
            self.x_names = [f"X{k + 1}" for k in range(self.d1)]
        if not self.z_names:
            self.z_names = [f"Z{k + 1}" for k in range(self.d2)]
        for arr, what in ((self.y, "y"), (self.x, "x"), (self.z, "z")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"missing or non-finite values in {what}")
        if self.x.size and (self.x.min() < 0 or self.x.max() > 1):
            raise SplineDomainError("nonparametric covariates must lie in [0, 1]; use Dataset.from_raw")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d1(self) -> int:
        return self.x.shape[1]

    @property
    def d2(self) -> int:
        return self.z.shape[1]

    @classmethod
    def from_raw(cls, y, x_raw, z, **names) -> "Dataset":
        """Rescale each column of ``x_raw`` to [0, 1] by its sample range."""
        x_raw = np.asarray(x_raw, dtype=float)
        if x_raw.ndim == 1:
            x_raw = x_raw[:, None]
        lo, hi = x_raw.min(axis=0), x_raw.max(axis=0)
        if np.any(hi <= lo):
            raise ValueError("a nonparametric covariate is constant")
        unit = np.clip((x_raw - lo) / (hi - lo), 0.0, 1.0)
        return cls(y=y, x=unit, z=z, x_ranges=np.column_stack([lo, hi]), **names)

    def to_unit(self, x_raw) -> np.ndarray:
        x_raw = np.asarray(x_raw, dtype=float)
        lo, hi = self.x_ranges[:, 0], self.x_ranges[:, 1]
        return (x_raw - lo) / (hi - lo)

    def subset(self, rows) -> "Dataset":
        return Dataset(
            y=self.y[rows],
            x=self.x[rows],
            z=self.z[rows],
            x_ranges=self.x_ranges,
            y_name=self.y_name,
            x_names=list(self.x_names),
            z_names=list(self.z_names),
        )

    def select_z(self, cols) -> "Dataset":
        cols = list(cols)
        return Dataset(
            y=self.y,
            x=self.x,
            z=self.z[:, cols],
            x_ranges=self.x_ranges,
            y_name=self.y_name,
            x_names=list(self.x_names),
            z_names=[self.z_names[c] for c in cols],
        )


def build_centered_basis(data, knots) -> AdditiveSplineBasis:
    """Drop the first B-spline of each covariate and center the rest on the sample.

    ``data`` is a Dataset or an ``(n, d1)`` array on the unit scale.
    """
    x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    knots = tuple(knots)
    if len(knots) != x.shape[1]:
        raise ValueError(f"{len(knots)} knot vectors for {x.shape[1]} covariates")
    means = []
    for k, kv in enumerate(knots):
        raw = eval_raw_basis(kv, x[:, k])
        empty = np.flatnonzero(~np.any(raw > 0, axis=0))
        if empty.size:
            j = int(empty[0])
            U = kv.knots
            raise RankDeficiencyError(
                f"covariate {k} basis function {j} (support [{U[j]:.4g}, {U[j + kv.order]:.4g}]) "
                "is zero on every sample point"
            )
        means.append(raw[:, 1:].mean(axis=0))
    return AdditiveSplineBasis(knots=knots, means=tuple(means))


def design_row(basis: AdditiveSplineBasis, x, z) -> np.ndarray:
    """(B(x), z) for a single observation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return np.concatenate([basis.transform(x[None, :]).ravel(), z])


def design_matrix(basis: AdditiveSplineBasis, x, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    b = basis.transform(x)
    return np.hstack([b, z.reshape(b.shape[0], -1)])
