"""Dataset ingestion, model specifications and config files."""
from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli

from .family import get_family
from .spline import Dataset

__all__ = [
    "DataError",
    "UsageError",
    "ModelSpec",
    "IngestReport",
    "ingest_csv",
    "pima_path",
    "load_pima",
    "verify_checksum",
    "load_config",
    "PIMA_SHA256",
    "PIMA_COMPLETE_N",
    "PIMA_LINEAR",
    "PIMA_NONPARAMETRIC",
]

PIMA_SHA256 = "2aeeecfd083b439960f68214ff9da871b01f4d63d51e223f3e11b95c45dce9ce"
PIMA_COMPLETE_N = 724
PIMA_LINEAR = ("NumPreg", "DBP", "DPF", "PGC")
PIMA_NONPARAMETRIC = ("BMI", "AGE")

MISSING = {"", "na", "nan", "?", "null", "none"}


class DataError(ValueError):
    """Problem with the input data (exit code 2 on the command line)."""


class UsageError(ValueError):
    """Invalid flags or config (exit code 1 on the command line)."""


@dataclass
class ModelSpec:
    """Column roles and model options.

    When neither ``linear`` nor ``nonparametric`` is given, covariates are
    split by :meth:`infer_roles`: columns with more than ``discrete_max``
    distinct values go into the spline part, the rest enter linearly.
    """

    response: str
    linear: tuple[str, ...] = ()
    nonparametric: tuple[str, ...] = ()
    family: str = "binomial-logit"
    knots: tuple[int, ...] = ()
    order: int = 4
    placement: str = "quantile"
    penalty: str = "scad"
    a: float = 3.7
    unpenalized: tuple[str, ...] = ()
    seed: int | None = None

    def __post_init__(self):
        self.linear = tuple(self.linear)
        self.nonparametric = tuple(self.nonparametric)
        self.knots = tuple(int(k) for k in self.knots)
        self.unpenalized = tuple(self.unpenalized)
        overlap = set(self.linear) & set(self.nonparametric)
        if overlap:
            raise UsageError(f"columns listed as both linear and nonparametric: {sorted(overlap)}")
        if self.response in self.linear or self.response in self.nonparametric:
            raise UsageError(f"response {self.response!r} is also listed as a covariate")
        if len(set(self.linear)) != len(self.linear) or len(set(self.nonparametric)) != len(self.nonparametric):
            raise UsageError("duplicate covariate names")
        missing = set(self.unpenalized) - set(self.linear)
        if missing:
            raise UsageError(f"unpenalized columns must be linear covariates: {sorted(missing)}")
        if self.knots and self.nonparametric and len(self.knots) not in (1, len(self.nonparametric)):
            raise UsageError(f"give one knot count or one per nonparametric covariate ({len(self.nonparametric)})")
        if self.order < 1:
            raise UsageError("spline order must be >= 1")
        try:
            get_family(self.family)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    @property
    def columns(self) -> tuple[str, ...]:
        return (self.response, *self.nonparametric, *self.linear)

    def knot_counts(self) -> tuple[int, ...]:
        d1 = len(self.nonparametric)
        if not self.knots:
            return (0,) * d1
        return self.knots * d1 if len(self.knots) == 1 else self.knots

    def infer_roles(self, table: dict, discrete_max: int = 10) -> "ModelSpec":
        """Fill in empty covariate roles from the data: continuous -> spline, discrete -> linear."""
        if self.linear or self.nonparametric:
            return self
        linear, nonpar = [], []
        for name, values in table.items():
            if name == self.response:
                continue
            v = values[np.isfinite(values)]
            (nonpar if np.unique(v).size > discrete_max else linear).append(name)
        return ModelSpec(**{**asdict(self), "linear": tuple(linear), "nonparametric": tuple(nonpar)})

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("linear", "nonparametric", "knots", "unpenalized"):
            d[key] = list(d[key])
        return d


@dataclass(frozen=True)
class IngestReport:
    n_rows: int
    n_dropped: int
    response_map: dict | None = None
    warnings: tuple[str, ...] = field(default=())


def _parse_cell(text, row, col):
    s = text.strip()
    if s.lower() in MISSING:
        return np.nan
    try:
        return float(s)
    except ValueError:
        raise DataError(f"non-numeric value {text!r} at row {row}, column {col!r}") from None


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    return header, rows


def read_columns(path, columns=None) -> dict:
    """Numeric columns of a CSV file as float arrays (missing cells become NaN)."""
    header, rows = _read_table(path)
    columns = list(header if columns is None else columns)
    unknown = [c for c in columns if c not in header]
    if unknown:
        raise DataError(f"unknown column(s) {unknown}; available: {header}")
    idx = {c: header.index(c) for c in columns}
    out = {c: np.empty(len(rows)) for c in columns}
    for i, r in enumerate(rows, start=1):
        if len(r) != len(header):
            raise DataError(f"row {i} has {len(r)} fields, header has {len(header)}")
        for c in columns:
            out[c][i - 1] = _parse_cell(r[idx[c]], i, c)
    return out


def ingest_csv(path, spec: ModelSpec, return_report: bool = False):
    """Load the columns named in ``spec`` into a Dataset.

    Rows with a missing value in any used column are dropped (the count is
    warned about and reported). Spline covariates are rescaled to [0, 1] by
    their sample range. A two-valued response that is not already 0/1 is
    recoded min -> 0, max -> 1 for the Bernoulli family.
    """
    if not spec.linear and not spec.nonparametric:
        spec = spec.infer_roles(read_columns(path))
    table = read_columns(path, spec.columns)
    n_total = len(table[spec.response])
    keep = np.all(np.column_stack([np.isfinite(table[c]) for c in spec.columns]), axis=1)
    notes = []
    dropped = int(n_total - keep.sum())
    if dropped:
        notes.append(f"dropped {dropped} of {n_total} rows with missing values")
        warnings.warn(notes[-1], stacklevel=2)
    if not keep.any():
        raise DataError("no complete rows left after dropping missing values")
    y = table[spec.response][keep]
    family = get_family(spec.family)
    response_map = None
    if family.name == "bernoulli-logit":
        levels = np.unique(y)
        if levels.size > 2:
            raise DataError(f"response {spec.response!r} has {levels.size} distinct values; expected two")
        if not np.all(np.isin(levels, (0.0, 1.0))):
            lo, hi = levels.min(), levels.max()
            response_map = {float(lo): 0.0, float(hi): 1.0}
            y = (y == hi).astype(float)
            notes.append(f"response recoded {lo:g} -> 0, {hi:g} -> 1")
            warnings.warn(notes[-1], stacklevel=2)
    if not family.valid_response(y):
        raise DataError(f"response {spec.response!r} is outside the range of {family.name}")
    x_raw = np.column_stack([table[c][keep] for c in spec.nonparametric]) if spec.nonparametric else np.zeros((keep.sum(), 0))
    z = np.column_stack([table[c][keep] for c in spec.linear]) if spec.linear else np.zeros((keep.sum(), 0))
    names = {"y_name": spec.response, "x_names": list(spec.nonparametric), "z_names": list(spec.linear)}
    try:
        if spec.nonparametric:
            data = Dataset.from_raw(y, x_raw, z, **names)
        else:
            data = Dataset(y=y, x=x_raw, z=z, **names)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if return_report:
        return data, IngestReport(n_rows=data.n, n_dropped=dropped, response_map=response_map, warnings=tuple(notes))
    return data


def pima_path() -> Path:
    return Path(str(resources.files("gaplm") / "data" / "pima.csv"))


def verify_checksum(path, expected: str = PIMA_SHA256) -> bool:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest() == expected


def load_pima(linear=PIMA_LINEAR, nonparametric=PIMA_NONPARAMETRIC) -> Dataset:
    """The bundled Pima Indians diabetes table, complete cases on the used columns."""
    spec = ModelSpec(response="Outcome", linear=tuple(linear), nonparametric=tuple(nonparametric))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ingest_csv(pima_path(), spec)


def load_config(path) -> dict:
    """Read a TOML config, or the ``config`` table embedded in a JSON report."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        if path.suffix == ".json":
            doc = json.loads(path.read_text())
            return dict(doc.get("config", doc))
        with path.open("rb") as fh:
            return tomli.load(fh)
    except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
