"""CSV ingestion and JSON reports."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .metrics import MetricSpec, SampleSet, euclidean

SCHEMA_VERSION = 1

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class IngestError(ValueError):
    pass


@dataclass
class DatasetSpec:
    """Which columns of a CSV file form the x and y samples, and how to measure them.

    With a ``precomputed`` metric the corresponding columns may be empty: the
    sample is then the row indices ``0..n-1`` into the supplied matrix.
    """

    path: Optional[str]
    x_columns: Sequence[str] = ()
    y_columns: Sequence[str] = ()
    x_type: str = NUMERIC
    y_type: str = NUMERIC
    metric_x: MetricSpec = field(default_factory=euclidean)
    metric_y: MetricSpec = field(default_factory=euclidean)

    def validate(self):
        for side, cols, kind, metric in (
            ("x", self.x_columns, self.x_type, self.metric_x),
            ("y", self.y_columns, self.y_type, self.metric_y),
        ):
            if kind not in (NUMERIC, CATEGORICAL):
                raise IngestError(f"{side}: column type must be numeric or categorical, got {kind!r}")
            if metric.kind == "precomputed":
                continue
            if not cols:
                raise IngestError(f"no {side} columns selected")
            if kind == CATEGORICAL and metric.kind != "discrete":
                raise IngestError(f"{side}: categorical columns need the discrete metric")
            if kind == CATEGORICAL and len(cols) != 1:
                raise IngestError(f"{side}: a categorical sample uses exactly one column")
        overlap = set(self.x_columns) & set(self.y_columns)
        if overlap:
            raise IngestError(f"x and y share columns: {sorted(overlap)}")


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise IngestError(f"{path}: row {k} has {len(r)} fields, header has {len(header)}")
    return header, body


def _column(header: list[str], name: str, path) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise IngestError(f"{path}: missing column {name!r} (have {header})") from None


def _side(path, header, body, cols, kind, metric: MetricSpec, n: int) -> SampleSet:
    if metric.kind == "precomputed":
        size = metric.matrix.shape[0]
        if n and n != size:
            raise IngestError(f"precomputed matrix has {size} rows but the data file has {n}")
        return SampleSet.indices(np.arange(size))
    idx = [_column(header, c, path) for c in cols]
    if kind == CATEGORICAL:
        return SampleSet.labels([r[idx[0]].strip() for r in body])
    out = np.empty((len(body), len(idx)))
    for k, r in enumerate(body):
        for m, j in enumerate(idx):
            token = r[j].strip()
            try:
                v = float(token)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise IngestError(
                    f"{path}: row {k + 2}, column {header[j]!r}: not a finite number: {token!r}"
                )
            out[k, m] = v
    return SampleSet.vectors(out)


def ingest(d: DatasetSpec) -> tuple[SampleSet, SampleSet]:
    """Read the aligned x and y samples described by ``d``.

    Row ``k`` of the file is the pair ``(x_k, y_k)``.  Numeric tokens must be
    finite decimals with ``.`` as separator; errors name the offending cell
    (rows counted from 1, header included).
    """
    d.validate()
    header, body = [], []
    if d.path is not None:
        header, body = read_csv(d.path)
    elif not (d.metric_x.kind == "precomputed" and d.metric_y.kind == "precomputed"):
        raise IngestError("a data file is required unless both metrics are precomputed")
    n = len(body)
    x = _side(d.path, header, body, d.x_columns, d.x_type, d.metric_x, n)
    y = _side(d.path, header, body, d.y_columns, d.y_type, d.metric_y, n)
    if len(x) != len(y):
        raise IngestError(f"x and y have different sizes: {len(x)} vs {len(y)}")
    return x, y


def read_counts_csv(path: str) -> tuple[list[str], list[str], np.ndarray]:
    """Contingency table CSV: header ``,y1,y2,...``; rows ``x_label,count,...``."""
    header, body = read_csv(path)
    ycat = header[1:]
    xcat, counts = [], []
    for k, r in enumerate(body, start=2):
        xcat.append(r[0].strip())
        row = []
        for j, tok in enumerate(r[1:], start=1):
            try:
                v = int(tok.strip())
            except ValueError:
                raise IngestError(f"{path}: row {k}, column {header[j]!r}: not an integer count: {tok!r}")
            row.append(v)
        counts.append(row)
    return xcat, ycat, np.array(counts, dtype=np.int64).reshape(len(xcat), len(ycat))


# --------------------------------------------------------------------------
# reports


def _clean(value):
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def versions() -> dict:
    from . import __version__

    return {
        "metricdcov": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def make_report(command: str, config: dict, results: dict, seed=None, runtime=None) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "config": config,
        "results": results,
        "versions": versions(),
    }
    if runtime is not None:
        report["runtime_seconds"] = runtime
    return _clean(report)


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads(text: str) -> dict:
    return json.loads(text)
