"""File formats: schema JSON, dataset CSV, and result CSV writers.

A dataset is a CSV with one header row plus a JSON schema assigning each
column a role: exactly one stratum column, one weight column (first-order
inclusion probabilities), at least one covariate, and at least one response
column tagged with its family.  Consecutive response columns sharing a family
form the column blocks of the layout.

Floats are written with 17 significant digits so that save followed by load
reproduces every value bit for bit; missing responses are written as the
schema's NA marker.  Writers never embed timestamps, which keeps reruns with
identical seeds byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .dataset import MixedDataset, Standardization
from .errors import InvalidInput, SchemaViolation
from .families import FAMILY_NAMES, Block, CategoryLayout, Family

__all__ = ["ColumnSpec", "SchemaFile", "load_schema", "load_dataset",
           "save_dataset", "save_matrix_csv", "load_matrix_csv",
           "write_trace_csv", "write_benchmark_csvs", "write_meta_json",
           "parse_tau_grid", "fmt"]

_ROLES = ("stratum", "weight", "covariate", "response")


def fmt(x: float) -> str:
    """17-significant-digit decimal form; round-trips float64 exactly."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: str
    family: str | None = None
    sigma: float = 1.0


@dataclass(frozen=True)
class SchemaFile:
    columns: tuple[ColumnSpec, ...]
    delimiter: str = ","
    na_marker: str = "NA"
    population_size: float | None = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaViolation("duplicate column names in schema")
        roles = [c.role for c in self.columns]
        for c in self.columns:
            if c.role not in _ROLES:
                raise SchemaViolation(f"unknown role {c.role!r} for column {c.name!r}")
            if c.role == "response":
                if c.family not in FAMILY_NAMES:
                    raise SchemaViolation(f"column {c.name!r} has unknown family {c.family!r}")
            elif c.family is not None:
                raise SchemaViolation(f"column {c.name!r} with role {c.role!r} must not set a family")
        if roles.count("stratum") != 1 or roles.count("weight") != 1:
            raise SchemaViolation("schema needs exactly one stratum and one weight column")
        if roles.count("covariate") < 1 or roles.count("response") < 1:
            raise SchemaViolation("schema needs at least one covariate and one response column")
        if self.population_size is not None and not self.population_size > 0:
            raise SchemaViolation("population_size must be positive when present")
        if len(self.delimiter) != 1:
            raise SchemaViolation("delimiter must be a single character")

    def layout(self) -> CategoryLayout:
        """Blocks from consecutive response columns sharing (family, sigma)."""
        blocks: list[Block] = []
        for c in self.columns:
            if c.role != "response":
                continue
            fam = Family(c.family, c.sigma if c.family == "gaussian" else 1.0)
            if blocks and blocks[-1].family == fam:
                blocks[-1] = Block(fam, blocks[-1].count + 1)
            else:
                blocks.append(Block(fam, 1))
        return CategoryLayout(tuple(blocks))

    def names(self, role: str) -> list[str]:
        return [c.name for c in self.columns if c.role == role]


def load_schema(path) -> SchemaFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaViolation(f"cannot read schema {path}: {exc}") from exc
    try:
        cols = tuple(ColumnSpec(name=c["name"], role=c["role"],
                                family=c.get("family"), sigma=float(c.get("sigma", 1.0)))
                     for c in raw["columns"])
        pop = raw.get("population_size")
        return SchemaFile(columns=cols, delimiter=raw.get("delimiter", ","),
                          na_marker=raw.get("na_marker", "NA"),
                          population_size=float(pop) if pop is not None else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"malformed schema {path}: {exc}") from exc


def _parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise SchemaViolation(f"non-numeric value {token!r} in {where}") from exc


def load_dataset(data_path, schema_path, standardize: bool = False) -> MixedDataset:
    """Read a CSV against its schema; header order must match the schema.

    Strata labels are relabeled to 1..H by sorted original value.  With
    standardize=True, covariates and gaussian responses are centered and
    scaled to unit variance (responses on observed entries only) and the
    transforms are retained on the dataset for inverse mapping.
    """
    schema = load_schema(schema_path)
    expected = [c.name for c in schema.columns]
    try:
        with open(data_path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh, delimiter=schema.delimiter)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise SchemaViolation(f"cannot read data {data_path}: {exc}") from exc
    if header != expected:
        raise SchemaViolation(f"header {header} does not match schema columns {expected}")
    if not rows:
        raise SchemaViolation("data file has no rows")

    role_of = {i: c for i, c in enumerate(schema.columns)}
    n = len(rows)
    strata_raw = np.empty(n)
    pi = np.empty(n)
    cov_cols = [i for i, c in role_of.items() if c.role == "covariate"]
    resp_cols = [i for i, c in role_of.items() if c.role == "response"]
    X = np.empty((n, len(cov_cols)))
    Y = np.empty((n, len(resp_cols)))
    for r, row in enumerate(rows):
        if len(row) != len(expected):
            raise SchemaViolation(f"row {r + 2} has {len(row)} fields, expected {len(expected)}")
        for i, c in role_of.items():
            token = row[i]
            where = f"column {c.name!r}, row {r + 2}"
            if c.role == "response" and token == schema.na_marker:
                Y[r, resp_cols.index(i)] = np.nan
                continue
            if token == schema.na_marker:
                raise SchemaViolation(f"{where}: NA is only allowed in response columns")
            v = _parse_float(token, where)
            if c.role == "stratum":
                strata_raw[r] = v
            elif c.role == "weight":
                pi[r] = v
            elif c.role == "covariate":
                X[r, cov_cols.index(i)] = v
            else:
                Y[r, resp_cols.index(i)] = v

    if np.any(strata_raw != np.round(strata_raw)):
        raise SchemaViolation("stratum labels must be integers")
    uniq = np.unique(strata_raw)
    strata = np.searchsorted(uniq, strata_raw) + 1

    standardization = None
    if standardize:
        cov_t: dict[int, tuple[float, float]] = {}
        resp_t: dict[int, tuple[float, float]] = {}
        layout = schema.layout()
        for d in range(X.shape[1]):
            mean, scale = float(X[:, d].mean()), float(X[:, d].std())
            scale = scale if scale > 0 else 1.0
            X[:, d] = (X[:, d] - mean) / scale
            cov_t[d] = (mean, scale)
        for j in range(Y.shape[1]):
            if layout.family_of_col(j).kind != "gaussian":
                continue
            obs = ~np.isnan(Y[:, j])
            if not obs.any():
                continue
            mean, scale = float(Y[obs, j].mean()), float(Y[obs, j].std())
            scale = scale if scale > 0 else 1.0
            Y[:, j] = (Y[:, j] - mean) / scale
            resp_t[j] = (mean, scale)
        standardization = Standardization(covariate=cov_t, response=resp_t)

    return MixedDataset(Y=Y, R=~np.isnan(Y), X=X, strata=strata, pi=pi,
                        layout=schema.layout(),
                        population_size=schema.population_size,
                        standardization=standardization)


def default_schema(dataset: MixedDataset) -> SchemaFile:
    """Generated column names: stratum, pi, x1..xD, y1..yL."""
    cols = [ColumnSpec("stratum", "stratum"), ColumnSpec("pi", "weight")]
    cols += [ColumnSpec(f"x{d + 1}", "covariate") for d in range(dataset.n_covariates)]
    j = 0
    for fam, sl in dataset.layout.slices():
        for _ in range(sl.stop - sl.start):
            j += 1
            cols.append(ColumnSpec(f"y{j}", "response", family=fam.kind,
                                   sigma=fam.sigma if fam.kind == "gaussian" else 1.0))
    return SchemaFile(columns=tuple(cols), population_size=dataset.population_size)


def save_dataset(dataset: MixedDataset, data_path, schema_path,
                 schema: SchemaFile | None = None) -> None:
    schema = schema or default_schema(dataset)
    doc = {
        "delimiter": schema.delimiter,
        "na_marker": schema.na_marker,
        "columns": [
            {k: v for k, v in (("name", c.name), ("role", c.role),
                               ("family", c.family),
                               ("sigma", c.sigma if c.family == "gaussian" else None))
             if v is not None}
            for c in schema.columns
        ],
    }
    if schema.population_size is not None:
        doc["population_size"] = schema.population_size
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(data_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter)
        writer.writerow([c.name for c in schema.columns])
        for i in range(dataset.n):
            row = [str(int(dataset.strata[i])), fmt(dataset.pi[i])]
            row += [fmt(v) for v in dataset.X[i]]
            row += [schema.na_marker if math.isnan(v) else fmt(v) for v in dataset.Y[i]]
            writer.writerow(row)


def save_matrix_csv(M, path, prefix: str = "c", na_marker: str = "NA") -> None:
    M = np.asarray(M, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{prefix}{j + 1}" for j in range(M.shape[1])])
        for row in M:
            writer.writerow([na_marker if math.isnan(v) else fmt(v) for v in row])


def load_matrix_csv(path, na_marker: str = "NA") -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        rows = [[np.nan if tok == na_marker else float(tok) for tok in row]
                for row in reader]
    return np.asarray(rows, dtype=np.float64)


def write_trace_csv(result, path) -> None:
    """Objective trace: iteration, objective, accepted flag (1 for k = 0)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "objective", "accepted"])
        for k, obj in enumerate(result.objective_trace):
            acc = 1 if k == 0 else int(result.accepted[k - 1])
            writer.writerow([str(k), fmt(obj), str(acc)])


_BLOCK_ORDER_FIRST = "overall"


def _block_order(labels) -> list[str]:
    rest = sorted(lab for lab in labels if lab not in ("overall", "overall_mean_scale"))
    out = [_BLOCK_ORDER_FIRST] + rest
    if "overall_mean_scale" in labels:
        out.append("overall_mean_scale")
    return out


def write_benchmark_csvs(summary, scenario: str, summary_path, replicates_path) -> None:
    """Aggregate table and per-replicate long table (no wall times)."""
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "scenario", "block", "mean_re", "se_re",
                         "n_replicates", "n_failures"])
        for method in summary.methods:
            agg = summary.aggregate.get(method, {})
            for lab in _block_order(agg.keys()):
                mean, se, count = agg[lab]
                writer.writerow([method, scenario, lab, fmt(mean), fmt(se),
                                 str(count), str(summary.n_failures[method])])

    with open(replicates_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "seed", "response_rate", "method",
                         "scenario", "block", "re"])
        for rep in summary.reports:
            for method in summary.methods:
                if method not in rep.re:
                    continue
                scores = rep.re[method]
                for lab in _block_order(scores.keys()):
                    writer.writerow([str(rep.replicate), str(rep.seed),
                                     fmt(rep.response_rate), method, scenario,
                                     lab, fmt(scores[lab])])


def write_meta_json(doc: dict, path) -> None:
    """Canonical config echo: sorted keys, no timestamps."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def parse_tau_grid(text: str) -> tuple[float, ...]:
    """Parse grids like "2^-15..2^-1,1,2" into floats.

    Tokens are comma-separated: "2^a..2^b" expands the inclusive power range,
    "2^a" is a single power of two, anything else parses as a float.
    """
    out: list[float] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            raise InvalidInput("empty token in tau grid")
        if ".." in token:
            lo, hi = token.split("..", 1)
            if not (lo.startswith("2^") and hi.startswith("2^")):
                raise InvalidInput(f"range token {token!r} must use 2^a..2^b form")
            try:
                a, b = int(lo[2:]), int(hi[2:])
            except ValueError as exc:
                raise InvalidInput(f"bad exponents in {token!r}") from exc
            if a > b:
                raise InvalidInput(f"empty range {token!r}")
            out.extend(2.0**k for k in range(a, b + 1))
        elif token.startswith("2^"):
            try:
                out.append(2.0 ** int(token[2:]))
            except ValueError as exc:
                raise InvalidInput(f"bad exponent in {token!r}") from exc
        else:
            try:
                out.append(float(token))
            except ValueError as exc:
                raise InvalidInput(f"cannot parse grid token {token!r}") from exc
    if not out:
        raise InvalidInput("tau grid is empty")
    return tuple(out)
