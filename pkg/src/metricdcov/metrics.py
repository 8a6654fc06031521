"""Metrics on finite samples: specification, evaluation and distance matrices.

A :class:`MetricSpec` is a small immutable description of a metric.  It can
be evaluated on a pair of points with :func:`eval_metric` or materialized on
a whole :class:`SampleSet` with :func:`distance_matrix`.  Snowflake powers
``d ** r`` (``0 < r <= 1``) and sums of two metrics on a product space are
expressed declaratively so that the same spec can be evaluated anywhere.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Hashable, Optional, Sequence

import numpy as np

VECTOR_KINDS = ("euclidean", "minkowski", "chebyshev")
KINDS = VECTOR_KINDS + ("discrete", "precomputed", "sum")

AXIOM_TOL = 1e-12


class MetricError(ValueError):
    """Raised when a metric cannot be evaluated on the given points."""


def _check_power(r: float) -> float:
    r = float(r)
    if not (0.0 < r <= 1.0) or math.isnan(r):
        raise MetricError(
            f"power must lie in (0, 1]; got {r} (r > 1 breaks the triangle inequality)"
        )
    return r


@dataclass(frozen=True)
class MetricSpec:
    """Declarative metric.

    Parameters
    ----------
    kind : str
        One of ``euclidean``, ``minkowski``, ``chebyshev``, ``discrete``,
        ``precomputed`` or ``sum``.
    p : float, optional
        Exponent of the Minkowski metric, ``p >= 1``.
    power : float
        Snowflake exponent ``r`` in ``(0, 1]``; evaluated distances are
        ``d ** r``.
    matrix : ndarray, optional
        Square distance matrix for ``precomputed`` metrics.  Points are then
        integer indices into it.
    name : str, optional
        Identifier of the precomputed matrix (for example a file path).
    components : tuple of MetricSpec, optional
        The two factor metrics of a ``sum`` metric; points are pairs.
    """

    kind: str
    p: Optional[float] = None
    power: float = 1.0
    matrix: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    name: Optional[str] = None
    components: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MetricError(f"unknown metric kind {self.kind!r}")
        object.__setattr__(self, "power", _check_power(self.power))
        if self.kind == "minkowski":
            if self.p is None or not float(self.p) >= 1.0:
                raise MetricError(f"minkowski metric needs p >= 1; got {self.p}")
            object.__setattr__(self, "p", float(self.p))
        if self.kind == "precomputed":
            if self.matrix is None:
                raise MetricError("precomputed metric needs a matrix")
            m = np.array(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise MetricError(f"precomputed matrix must be square; got shape {m.shape}")
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        if self.kind == "sum":
            if self.components is None or len(self.components) != 2:
                raise MetricError("sum metric needs exactly two component metrics")

    def describe(self) -> str:
        """Compact string form, the inverse of :func:`parse_metric`."""
        if self.kind == "minkowski":
            base = f"minkowski:{self.p:g}"
        elif self.kind == "precomputed":
            base = f"precomputed:{self.name or '<matrix>'}"
        elif self.kind == "sum":
            base = "sum(" + ",".join(c.describe() for c in self.components) + ")"
        else:
            base = self.kind
        if self.power != 1.0:
            base += f"^{self.power:g}"
        return base


def euclidean() -> MetricSpec:
    return MetricSpec("euclidean")


def minkowski(p: float) -> MetricSpec:
    return MetricSpec("minkowski", p=p)


def chebyshev() -> MetricSpec:
    return MetricSpec("chebyshev")


def discrete() -> MetricSpec:
    return MetricSpec("discrete")


def precomputed(matrix, name: Optional[str] = None) -> MetricSpec:
    return MetricSpec("precomputed", matrix=matrix, name=name)


def power_transform(spec: MetricSpec, r: float) -> MetricSpec:
    """Return the spec evaluating to ``d(a, b) ** r``.

    Powers compose multiplicatively, so the result is always again a valid
    snowflake of the base metric.  ``r = 1`` returns ``spec`` itself.
    """
    r = _check_power(r)
    if r == 1.0:
        return spec
    return MetricSpec(
        spec.kind,
        p=spec.p,
        power=_check_power(spec.power * r),
        matrix=spec.matrix,
        name=spec.name,
        components=spec.components,
    )


def product_sum_metric(sx: MetricSpec, sy: MetricSpec, r: float = 1.0) -> MetricSpec:
    """Metric ``(d_X(x, x') + d_Y(y, y')) ** r`` on pairs ``(x, y)``."""
    return MetricSpec("sum", power=_check_power(r), components=(sx, sy))


def parse_metric(text: str, power: float = 1.0) -> MetricSpec:
    """Parse ``euclidean | minkowski:p | chebyshev | discrete | precomputed:path``."""
    head, _, arg = text.strip().partition(":")
    head = head.lower()
    if head == "minkowski":
        if not arg:
            raise MetricError("minkowski needs an exponent, e.g. minkowski:1.5")
        try:
            spec = minkowski(float(arg))
        except ValueError as exc:
            raise MetricError(f"bad minkowski exponent {arg!r}") from exc
    elif head == "precomputed":
        if not arg:
            raise MetricError("precomputed needs a path, e.g. precomputed:dist.csv")
        spec = precomputed(load_matrix_csv(arg), name=arg)
    elif head in ("euclidean", "chebyshev", "discrete") and not arg:
        spec = MetricSpec(head)
    else:
        raise MetricError(f"unknown metric {text!r}")
    return power_transform(spec, power)


def load_matrix_csv(path) -> np.ndarray:
    """Read a square distance matrix stored as header-less, row-major CSV."""
    try:
        m = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except ValueError as exc:
        raise MetricError(f"{path}: cannot parse distance matrix: {exc}") from exc
    if m.shape[0] != m.shape[1]:
        raise MetricError(f"{path}: distance matrix must be square; got {m.shape}")
    return m


# --------------------------------------------------------------------------
# samples


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Ordered finite sample of points sharing one representation.

    ``kind`` is ``vector`` (``points`` is an ``(n, dim)`` float array),
    ``label`` (tuple of hashable labels), ``index`` (integer array into a
    precomputed matrix) or ``pair`` (``points`` is a tuple of two aligned
    samples).  Points are read-only after construction.
    """

    kind: str
    points: Any
    dim: Optional[int] = None

    def __post_init__(self):
        if self.kind == "vector":
            pts = np.array(self.points, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.ndim != 2:
                raise MetricError("vector samples must be 1- or 2-dimensional arrays")
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)
            object.__setattr__(self, "dim", pts.shape[1])
        elif self.kind == "label":
            object.__setattr__(self, "points", tuple(self.points))
        elif self.kind == "index":
            idx = np.array(self.points, dtype=np.int64).ravel()
            idx.setflags(write=False)
            object.__setattr__(self, "points", idx)
        elif self.kind == "pair":
            first, second = self.points
            if len(first) != len(second):
                raise MetricError("pair sample components have different lengths")
            object.__setattr__(self, "points", (first, second))
        else:
            raise MetricError(f"unknown sample kind {self.kind!r}")
        if len(self) < 1:
            raise MetricError("a sample needs at least one point")

    @classmethod
    def vectors(cls, points) -> "SampleSet":
        return cls("vector", points)

    @classmethod
    def labels(cls, labels: Sequence[Hashable]) -> "SampleSet":
        return cls("label", labels)

    @classmethod
    def indices(cls, idx) -> "SampleSet":
        return cls("index", idx)

    @classmethod
    def pairs(cls, first: "SampleSet", second: "SampleSet") -> "SampleSet":
        return cls("pair", (first, second))

    def __len__(self) -> int:
        if self.kind == "pair":
            return len(self.points[0])
        return len(self.points)

    def __getitem__(self, i):
        if self.kind == "pair":
            return (self.points[0][i], self.points[1][i])
        return self.points[i]

    def take(self, idx) -> "SampleSet":
        """Sub-sample (with repetition allowed) in the order of ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.kind == "label":
            return SampleSet("label", [self.points[i] for i in idx])
        if self.kind == "pair":
            return SampleSet("pair", (self.points[0].take(idx), self.points[1].take(idx)))
        return SampleSet(self.kind, self.points[idx])

    def concat(self, other: "SampleSet") -> "SampleSet":
        if other.kind != self.kind:
            raise MetricError(f"cannot concatenate {self.kind} and {other.kind} samples")
        if self.kind == "vector":
            if other.dim != self.dim:
                raise MetricError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return SampleSet("vector", np.vstack([self.points, other.points]))
        if self.kind == "label":
            return SampleSet("label", self.points + other.points)
        if self.kind == "index":
            return SampleSet("index", np.concatenate([self.points, other.points]))
        return SampleSet(
            "pair",
            (self.points[0].concat(other.points[0]), self.points[1].concat(other.points[1])),
        )

    def fingerprint(self) -> str:
        """Content hash; equal samples have equal fingerprints."""
        h = hashlib.sha256(self.kind.encode())
        if self.kind == "pair":
            for part in self.points:
                h.update(part.fingerprint().encode())
        elif self.kind == "label":
            h.update(repr(self.points).encode())
        else:
            h.update(str(self.points.shape).encode())
            h.update(np.ascontiguousarray(self.points).tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric, zero-diagonal, non-negative ``n x n`` matrix of distances."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise MetricError(f"distance matrix must be square; got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise MetricError("distance matrix has non-finite entries")
        if not np.array_equal(e, e.T):
            raise MetricError("distance matrix is not symmetric")
        if np.any(np.diag(e) != 0):
            raise MetricError("distance matrix has a non-zero diagonal")
        if np.any(e < 0):
            raise MetricError("distance matrix has negative entries")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __len__(self) -> int:
        return self.n

    def scaled(self, c: float) -> "DistanceMatrix":
        return DistanceMatrix(self.entries * c)


# --------------------------------------------------------------------------
# evaluation


def _base_row(spec: MetricSpec, a, sample: SampleSet, rows) -> np.ndarray:
    """Un-powered distances from point ``a`` to ``sample[rows]``."""
    kind = spec.kind
    if kind in VECTOR_KINDS:
        if sample.kind != "vector":
            raise MetricError(f"{kind} metric needs vector points, got {sample.kind}")
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape[0] != sample.dim:
            raise MetricError(f"dimension mismatch: {a.shape[0]} vs {sample.dim}")
        diff = np.abs(sample.points[rows] - a)
        if kind == "euclidean":
            return np.sqrt(np.sum(diff * diff, axis=1))
        if kind == "chebyshev":
            return np.max(diff, axis=1)
        return np.sum(diff ** spec.p, axis=1) ** (1.0 / spec.p)
    if kind == "discrete":
        if sample.kind == "pair":
            raise MetricError("discrete metric cannot be applied to pairs")
        pts = sample.points
        if isinstance(rows, slice):
            rows = range(len(sample))[rows]
        if sample.kind == "vector":
            a = np.asarray(a, dtype=float).reshape(-1)
            return np.array([0.0 if np.array_equal(pts[j], a) else 1.0 for j in rows])
        return np.array([0.0 if pts[j] == a else 1.0 for j in rows])
    if kind == "precomputed":
        if sample.kind != "index":
            raise MetricError("precomputed metric needs index points, not raw values")
        m = spec.matrix
        i = int(a)
        idx = sample.points[rows]
        if not (0 <= i < m.shape[0]) or np.any(idx < 0) or np.any(idx >= m.shape[0]):
            raise MetricError(f"index out of range for a {m.shape[0]}-point matrix")
        return np.array(m[i, idx], dtype=float)
    # sum metric
    if sample.kind != "pair":
        raise MetricError("sum metric needs pair points")
    sx, sy = spec.components
    ax, ay = a
    return _row(sx, ax, sample.points[0], rows) + _row(sy, ay, sample.points[1], rows)


def _row(spec: MetricSpec, a, sample: SampleSet, rows=slice(None)) -> np.ndarray:
    base = _base_row(spec, a, sample, rows)
    if spec.power != 1.0:
        base = base ** spec.power
    return base


def _as_sample(spec: MetricSpec, b) -> SampleSet:
    if spec.kind in VECTOR_KINDS:
        return SampleSet("vector", np.asarray(b, dtype=float).reshape(1, -1))
    if spec.kind == "precomputed":
        if isinstance(b, (np.ndarray, list, tuple)) and np.ndim(b) > 0:
            raise MetricError("precomputed metric needs index points, not raw values")
        return SampleSet("index", [b])
    if spec.kind == "sum":
        sx, sy = spec.components
        return SampleSet("pair", (_as_sample(sx, b[0]), _as_sample(sy, b[1])))
    if isinstance(b, np.ndarray):
        return SampleSet("vector", b.reshape(1, -1))
    return SampleSet("label", [b])


def eval_metric(spec: MetricSpec, a, b) -> float:
    """Distance between two points, after the spec's power transform."""
    if spec.kind == "precomputed":
        for p in (a, b):
            if isinstance(p, (np.ndarray, list, tuple)) and np.ndim(p) > 0:
                raise MetricError("precomputed metric needs index points, not raw values")
    return float(_row(spec, a, _as_sample(spec, b))[0])


def distances_to(spec: MetricSpec, a, sample: SampleSet) -> np.ndarray:
    """Vector of ``d(a, s_j)`` over the sample."""
    return _row(spec, a, sample)


def _label_codes(labels) -> np.ndarray:
    table: dict = {}
    return np.array([table.setdefault(x, len(table)) for x in labels], dtype=np.int64)


def distance_matrix(spec: MetricSpec, sample: SampleSet, workers: int = 1) -> DistanceMatrix:
    """Materialize ``D[i, j] = eval_metric(spec, s_i, s_j)``.

    Rows are computed independently, so splitting them into blocks over
    ``workers`` threads gives bit-identical output.
    """
    n = len(sample)
    out = np.empty((n, n), dtype=float)

    if spec.kind == "discrete" and sample.kind == "label":
        codes = _label_codes(sample.points)

        def row(i):
            r = (codes != codes[i]).astype(float)
            return r ** spec.power if spec.power != 1.0 else r
    else:

        def row(i):
            return _row(spec, sample[i], sample)

    def fill(block):
        for i in block:
            out[i] = row(i)

    if workers <= 1 or n < 2:
        fill(range(n))
    else:
        blocks = np.array_split(np.arange(n), min(workers, n))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    return DistanceMatrix(out)


# --------------------------------------------------------------------------
# axiom checks


@dataclass
class MetricAxiomReport:
    """Outcome of :func:`check_metric_axioms`.

    Violations are reported as the largest excess over zero; ``worst_triple``
    is ``(i, j, k)`` with ``D[i, k] - D[i, j] - D[j, k]`` maximal (0-based).
    """

    ok: bool
    symmetry_violation: float
    identity_violation: float
    negativity_violation: float
    triangle_violation: float
    worst_triple: Optional[tuple]
    tol: float


def _axioms_from_matrix(m: np.ndarray, tol: float) -> MetricAxiomReport:
    n = m.shape[0]
    sym = float(np.max(np.abs(m - m.T))) if n else 0.0
    ident = float(np.max(np.abs(np.diag(m)))) if n else 0.0
    neg = float(max(0.0, -np.min(m))) if n else 0.0
    tri, triple = 0.0, None
    for j in range(n):
        # excess[i, k] = m[i, k] - m[i, j] - m[j, k]
        excess = m - m[:, j][:, None] - m[j, :][None, :]
        flat = int(np.argmax(excess))
        i, k = divmod(flat, n)
        if excess[i, k] > tri:
            tri, triple = float(excess[i, k]), (i, j, k)
    ok = max(sym, ident, neg, tri) <= tol
    return MetricAxiomReport(ok, sym, ident, neg, tri, triple if tri > tol else None, tol)


def check_metric_axioms(spec: MetricSpec, sample: SampleSet, tol: float = AXIOM_TOL) -> MetricAxiomReport:
    """Check symmetry, identity and the triangle inequality on every triple.

    Evaluates the metric pointwise (not through :func:`distance_matrix`, whose
    constructor already insists on symmetry) so precomputed inputs that are
    not metrics can be diagnosed instead of rejected.
    """
    n = len(sample)
    m = np.empty((n, n))
    for i in range(n):
        m[i] = _row(spec, sample[i], sample)
    return _axioms_from_matrix(m, tol)


def check_matrix_axioms(matrix, tol: float = AXIOM_TOL) -> MetricAxiomReport:
    """Same as :func:`check_metric_axioms` for a raw square array."""
    m = np.asarray(matrix, dtype=float)
    return _axioms_from_matrix(m, tol)
