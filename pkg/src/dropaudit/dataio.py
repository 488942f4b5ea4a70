"""
Tabular ingestion, fixed-effect expansion, response diagnostics and report
serialisation.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .audit import AuditTrace
from .bounds import BoundReport
from .errors import DataError, EmptyAfterDrops, MissingColumn, NonFiniteValue
from .regression import Dataset
from .simulate import SimulationResult

TRANSFORMS = ("identity", "log", "log1p")
PLOT_COLUMNS = ("alpha", "method", "mean", "sd", "n_ok")


@dataclass(frozen=True)
class TableSchema:
    """How to turn a delimited table into a Dataset.

    ``intercept=True`` prepends an explicit all-ones column named
    ``"intercept"``. ``drop_rows`` refers to values of ``id_column`` (or to
    0-based line numbers when there is no id column).
    """

    response_column: str
    covariate_columns: tuple
    fixed_effect_columns: tuple = ()
    transform: dict = field(default_factory=dict)
    drop_rows: tuple = ()
    id_column: Optional[str] = None
    intercept: bool = False

    def __post_init__(self):
        object.__setattr__(self, "covariate_columns", tuple(self.covariate_columns))
        object.__setattr__(self, "fixed_effect_columns", tuple(self.fixed_effect_columns))
        object.__setattr__(self, "drop_rows", tuple(str(r) for r in self.drop_rows))
        if self.response_column in self.covariate_columns:
            raise DataError("response column is also listed as a covariate")
        if set(self.fixed_effect_columns) & set(self.covariate_columns):
            raise DataError("fixed-effect keys overlap covariates")
        for col, tr in self.transform.items():
            if tr not in TRANSFORMS:
                raise DataError(f"unknown transform {tr!r} for column {col!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "TableSchema":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise DataError(f"unknown schema keys: {sorted(extra)}")
        if "response_column" not in d or "covariate_columns" not in d:
            raise DataError("schema needs response_column and covariate_columns")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "TableSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def load_dataset(path, schema: TableSchema, delimiter: str = ",") -> Dataset:
    """Read a delimited UTF-8 table with a header row."""
    keys = list(schema.fixed_effect_columns)
    idc = [schema.id_column] if schema.id_column else []
    str_cols = {c: str for c in keys + idc}
    df = pd.read_csv(path, sep=delimiter, encoding="utf-8", dtype=str_cols,
                     keep_default_na=True)
    needed = [schema.response_column, *schema.covariate_columns, *keys, *idc]
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise MissingColumn(f"columns not found in {path}: {missing}")

    ids = df[schema.id_column].astype(str).tolist() if schema.id_column else [str(i) for i in range(len(df))]
    if schema.drop_rows:
        drop = set(schema.drop_rows)
        keep = np.array([i not in drop for i in ids])
        df = df.loc[keep].reset_index(drop=True)
        ids = [i for i, k in zip(ids, keep) if k]
    if len(df) == 0:
        raise EmptyAfterDrops("no rows left after drops")

    numeric = [schema.response_column, *schema.covariate_columns]
    values = {}
    for col in numeric:
        raw = pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=float)
        tr = schema.transform.get(col, "identity")
        with np.errstate(divide="ignore", invalid="ignore"):
            if tr == "log":
                raw = np.log(raw)
            elif tr == "log1p":
                raw = np.log1p(raw)
        bad = np.flatnonzero(~np.isfinite(raw))
        if bad.size:
            i = int(bad[0])
            cell = df[col].iloc[i]
            raise NonFiniteValue(ids[i], col, None if pd.isna(cell) else cell)
        values[col] = raw
    for col in keys:
        if df[col].isna().any():
            i = int(np.flatnonzero(df[col].isna().to_numpy())[0])
            raise NonFiniteValue(ids[i], col, None)

    cols = list(schema.covariate_columns)
    X = np.column_stack([values[c] for c in cols]) if cols else np.empty((len(df), 0))
    if schema.intercept:
        X = np.column_stack([np.ones(len(df)), X])
        cols = ["intercept"] + cols
    groups = {k: df[k].to_numpy(dtype=object) for k in keys}
    return Dataset(X, values[schema.response_column], column_names=cols,
                   row_ids=ids, groups=groups)


def expand_fixed_effects(data: Dataset, keys) -> Dataset:
    """Append one indicator column per level of each key, dropping the
    first level in sorted order as the reference."""
    keys = list(keys)
    if not keys:
        return data
    names = list(data.column_names or [f"x{j}" for j in range(data.p)])
    blocks = [data.design]
    for key in keys:
        if key not in data.groups:
            raise MissingColumn(f"no group column {key!r}")
        vals = np.asarray(data.groups[key]).astype(str)
        levels = sorted(set(vals))
        if len(levels) < 2:
            raise DataError(f"fixed-effect key {key!r} has fewer than two levels")
        lv = np.array(levels[1:])
        blocks.append((vals[:, None] == lv[None, :]).astype(float))
        names += [f"{key}={lev}" for lev in levels[1:]]
    return Dataset(np.hstack(blocks), data.response, column_names=names,
                   row_ids=data.row_ids, groups=data.groups)


@dataclass(frozen=True)
class SummaryStats:
    """Response diagnostics.

    ``sigma_y`` uses divisor n. Outlier counts use |y - mu| >= c sigma.
    """

    n: int
    mu_y: float
    sigma_y: float
    count_gt5sigma: int
    count_gt10sigma: int
    removed_mean_y: Optional[float] = None
    removed_max_y: Optional[float] = None
    removed_max_y_in_sigmas: Optional[float] = None
    degenerate_sigma: bool = False
    sigma_convention: str = "population"
    threshold_rule: str = ">="


def summarize(data: Dataset, removal=None) -> SummaryStats:
    y = data.response
    mu = float(np.mean(y))
    sigma = float(np.std(y))
    degenerate = sigma == 0.0
    if degenerate:
        c5 = c10 = 0
    else:
        dev = np.abs(y - mu)
        c5 = int(np.sum(dev >= 5 * sigma))
        c10 = int(np.sum(dev >= 10 * sigma))
    rm = rmax = rsig = None
    if removal is not None and len(removal):
        sub = y[np.asarray(removal, dtype=int)]
        rm, rmax = float(np.mean(sub)), float(np.max(sub))
        rsig = None if degenerate else (rmax - mu) / sigma
    return SummaryStats(data.n, mu, sigma, c5, c10, rm, rmax, rsig, degenerate)


# --------------------------------------------------------------------------
# reports

_TYPES = {
    "AuditTrace": AuditTrace,
    "BoundReport": BoundReport,
    "SummaryStats": SummaryStats,
    "SimulationResult": SimulationResult,
}


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def to_document(obj, config=None, extras=None) -> dict:
    name = type(obj).__name__
    if name not in _TYPES and not isinstance(obj, dict):
        raise TypeError(f"cannot serialise {name}")
    if isinstance(obj, dict):
        name, payload = obj.get("type", "Table"), obj.get("data", obj)
    else:
        payload = asdict(obj)
        if isinstance(obj, SimulationResult):
            payload.pop("wall_time")
    doc = {"type": name, "data": _plain(payload)}
    if config is not None:
        doc["config"] = _plain(config)
    if extras is not None:
        doc["extras"] = _plain(extras)
    return doc


def dumps(doc) -> str:
    # repr-based float formatting round-trips every double exactly
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def emit_report(obj, path, config=None, extras=None) -> list:
    """Write ``obj`` as canonical JSON (sorted keys, round-trip floats).

    A SimulationResult additionally gets ``<stem>.plot.csv`` with columns
    alpha, method, mean, sd, n_ok and a ``<stem>.timing.json`` sidecar
    holding the wall time, which is kept out of the main report so reruns
    are byte-identical. Returns the written paths.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = [path]
    path.write_text(dumps(to_document(obj, config, extras)), encoding="utf-8")
    if isinstance(obj, SimulationResult):
        table = path.with_suffix(".plot.csv")
        write_plot_table(obj, table)
        timing = path.with_suffix(".timing.json")
        timing.write_text(dumps({"wall_time_seconds": obj.wall_time}), encoding="utf-8")
        written += [table, timing]
    return written


def write_plot_table(result: SimulationResult, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for row in result.plot_table():
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_plot_table(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [{"alpha": float(r["alpha"]), "method": r["method"], "mean": float(r["mean"]),
             "sd": float(r["sd"]), "n_ok": int(r["n_ok"])} for r in rows]


def from_document(doc: dict):
    cls = _TYPES.get(doc["type"])
    if cls is None:
        return doc["data"]
    data = dict(doc["data"])
    if cls is SimulationResult:
        data["wall_time"] = 0.0
    return cls(**data)


def load_report(path):
    """Parse a report written by emit_report back into its object."""
    with open(path, encoding="utf-8") as fh:
        return from_document(json.load(fh))
