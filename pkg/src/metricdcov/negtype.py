"""Finite-sample diagnostics for negative type.

A metric has negative type on a sample ``x_1..x_n`` iff the doubly centered
distance matrix ``Kbar = P K P`` is negative semidefinite.  A positive
eigenvalue is a proof that the space is *not* of negative type and its
eigenvector is a sum-zero witness ``alpha`` with ``alpha' K alpha > 0``.  A
pass only certifies the sampled points; it is evidence, never a proof, for
the whole space.  Strong negative type cannot be certified from finitely
many points at all.

When the check passes, ``sqrt(-Kbar) / sqrt(2)`` gives points ``phi_i`` in a
Euclidean space with ``||phi_i - phi_j||^2 = d(x_i, x_j)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .centering import SignedDiscreteMeasure, double_center
from .metrics import DistanceMatrix, MetricSpec, SampleSet, distance_matrix

DEFAULT_TOL = 1e-9

NEGATIVE_TYPE = "negative_type_on_sample"
VIOLATION = "violation"


class EigenSolverError(RuntimeError):
    pass


@dataclass
class NegTypeReport:
    """Spectral verdict on one sample.

    ``witness`` is present iff ``verdict == "violation"``; it sums to zero
    and has ``sum_ij alpha_i alpha_j d(x_i, x_j) = quadratic_form > 0``.
    """

    max_eigenvalue: float
    min_eigenvalue: float
    verdict: str
    witness: Optional[np.ndarray] = None
    quadratic_form: Optional[float] = None
    spectral_radius: float = 0.0
    tol: float = DEFAULT_TOL
    eigenvalues: np.ndarray = field(default=None, repr=False)

    @property
    def is_negative_type(self) -> bool:
        return self.verdict == NEGATIVE_TYPE

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_eigenvalue": self.max_eigenvalue,
            "min_eigenvalue": self.min_eigenvalue,
            "spectral_radius": self.spectral_radius,
            "tol": self.tol,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "quadratic_form": self.quadratic_form,
        }


class NotNegativeTypeError(ValueError):
    """The sample has no Hilbert embedding of ``d ** (1/2)``."""

    def __init__(self, report: NegTypeReport):
        super().__init__(
            f"distance matrix is not of negative type on this sample "
            f"(max eigenvalue {report.max_eigenvalue:.3e} > "
            f"{report.tol:g} x spectral radius {report.spectral_radius:.3e})"
        )
        self.report = report


def _raw(D) -> np.ndarray:
    return D.entries if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)


def _spectrum(D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = _raw(D)
    kbar = double_center(m).entries
    try:
        vals, vecs = np.linalg.eigh(kbar)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    return m, vals, vecs


def negtype_check(D, tol: float = DEFAULT_TOL) -> NegTypeReport:
    """Decide whether ``Kbar`` is negative semidefinite up to ``tol``.

    The verdict is a violation iff the largest eigenvalue of ``Kbar``
    exceeds ``tol`` times its spectral radius.
    """
    m, vals, vecs = _spectrum(D)
    n = m.shape[0]
    if n < 2:
        raise ValueError("negative type is only meaningful for n >= 2 points")
    radius = float(np.max(np.abs(vals)))
    lam_max, lam_min = float(vals[-1]), float(vals[0])
    report = NegTypeReport(
        max_eigenvalue=lam_max,
        min_eigenvalue=lam_min,
        verdict=NEGATIVE_TYPE,
        spectral_radius=radius,
        tol=tol,
        eigenvalues=vals,
    )
    if radius > 0 and lam_max > tol * radius:
        alpha = vecs[:, -1]
        alpha = alpha - alpha.mean()
        alpha = alpha / np.linalg.norm(alpha)
        report.verdict = VIOLATION
        report.witness = alpha
        report.quadratic_form = float(alpha @ m @ alpha)
    return report


@dataclass
class Embedding:
    """Rows are points ``phi(x_i)`` with ``||phi_i - phi_j||^2 = d(x_i, x_j)``."""

    coordinates: np.ndarray

    @property
    def n(self) -> int:
        return self.coordinates.shape[0]

    @property
    def dim(self) -> int:
        return self.coordinates.shape[1]

    def squared_distances(self) -> np.ndarray:
        c = self.coordinates
        g = c @ c.T
        sq = np.diag(g)
        return sq[:, None] + sq[None, :] - 2 * g


def embed_sample(D, tol: float = DEFAULT_TOL) -> Embedding:
    """Embed ``(sample, d ** 1/2)`` isometrically in ``R^rank``.

    Eigenvalues of ``-Kbar`` below ``tol`` times the spectral radius are
    clamped to zero and their directions dropped.

    Raises
    ------
    NotNegativeTypeError
        If :func:`negtype_check` reports a violation at ``tol``.
    """
    report = negtype_check(D, tol)
    if not report.is_negative_type:
        raise NotNegativeTypeError(report)
    _, vals, vecs = _spectrum(D)
    neg = -vals
    keep = neg > tol * report.spectral_radius
    coords = vecs[:, keep] * np.sqrt(neg[keep] / 2.0)
    return Embedding(coords)


def barycenter(E: Embedding, m) -> np.ndarray:
    """``sum_i w_i phi_i`` for a signed measure over the embedded points.

    ``m`` may be a weight vector aligned with the embedding rows, or a
    :class:`SignedDiscreteMeasure` whose support is either the embedded
    sample itself or an ``index`` sample pointing at embedding rows.
    """
    if isinstance(m, SignedDiscreteMeasure):
        w = m.weights
        if m.support.kind == "index":
            idx = m.support.points
            if np.any(idx < 0) or np.any(idx >= E.n):
                raise IndexError(f"measure references a point outside the {E.n}-point embedding")
            rows = E.coordinates[idx]
        else:
            if len(m.support) != E.n:
                raise IndexError("measure support does not match the embedded sample")
            rows = E.coordinates
    else:
        w = np.asarray(m, dtype=float)
        if w.shape[0] != E.n:
            raise IndexError(f"expected {E.n} weights, got {w.shape[0]}")
        rows = E.coordinates
    return w @ rows


@dataclass
class VarXReport:
    """Maximum absolute deviation of each embedding identity.

    ``a_function``: ``a(x_i) = ||phi_i - beta||^2 + D/2``;
    ``energy_variance``: ``D = 2 Var(phi(X))``;
    ``centered_inner``: ``d_mu(x_i, x_j) = -2 <phi_i - beta, phi_j - beta>``.
    """

    a_function: float
    energy_variance: float
    centered_inner: float

    def ok(self, tol: float = 1e-9) -> bool:
        return max(self.a_function, self.energy_variance, self.centered_inner) <= tol


def varx_identities_check(E: Embedding, D) -> VarXReport:
    """Check the three mean/variance identities for the empirical measure."""
    m = _raw(D)
    n = m.shape[0]
    if E.n != n:
        raise ValueError(f"embedding has {E.n} points, matrix has {n}")
    a = m.mean(axis=1)
    big_d = a.mean()
    beta = E.coordinates.mean(axis=0)
    centered = E.coordinates - beta
    sq = np.sum(centered * centered, axis=1)
    var = sq.mean()
    dmu = m - a[:, None] - a[None, :] + big_d
    inner = centered @ centered.T
    return VarXReport(
        a_function=float(np.max(np.abs(a - (sq + big_d / 2)))),
        energy_variance=float(abs(big_d - 2 * var)),
        centered_inner=float(np.max(np.abs(dmu + 2 * inner))),
    )


# --------------------------------------------------------------------------
# violation search


Sampler = Callable[[np.random.Generator, int], SampleSet]


def uniform_cube_sampler(dim: int, low: float = -1.0, high: float = 1.0) -> Sampler:
    def sample(rng: np.random.Generator, n: int) -> SampleSet:
        return SampleSet.vectors(rng.uniform(low, high, size=(n, dim)))

    return sample


@dataclass
class ViolationFound:
    iteration: int
    sample: SampleSet
    report: NegTypeReport


def _try(spec, sampler, n_points, seed, i, tol) -> Optional[ViolationFound]:
    rng = np.random.default_rng([seed, i])
    sample = sampler(rng, n_points)
    report = negtype_check(distance_matrix(spec, sample), tol)
    if report.is_negative_type:
        return None
    return ViolationFound(i, sample, report)


def search_negtype_violation(
    spec: MetricSpec,
    sampler: Sampler,
    n_points: int,
    iterations: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> Optional[ViolationFound]:
    """Random search for a configuration on which ``spec`` fails negative type.

    Iteration ``i`` draws from ``default_rng([seed, i])``, so the result is
    the lowest violating iteration regardless of ``workers``.
    """
    if workers <= 1:
        for i in range(iterations):
            hit = _try(spec, sampler, n_points, seed, i, tol)
            if hit is not None:
                return hit
        return None
    batch = 64 * workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, iterations, batch):
            idx = range(start, min(start + batch, iterations))
            hits = pool.map(lambda i: _try(spec, sampler, n_points, seed, i, tol), idx)
            for hit in hits:
                if hit is not None:
                    return hit
    return None


def quadratic_form(D, alpha) -> float:
    """``sum_ij alpha_i alpha_j D[i, j]`` with compensated summation."""
    m = _raw(D)
    a = np.asarray(alpha, dtype=float)
    return math.fsum((a[:, None] * m * a[None, :]).ravel())
