"""Double centering of distance matrices and energies of signed measures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import DistanceMatrix, MetricSpec, SampleSet, distance_matrix, distances_to


@dataclass(frozen=True, eq=False)
class CenteredMatrix:
    """Doubly centered distances ``d_mu(x_i, x_j)`` with cached means.

    Attributes
    ----------
    entries : ndarray
        ``D[i, j] - a[i] - a[j] + D_mu``.
    row_means : ndarray
        ``a[i] = sum_j w_j D[i, j]``, the mean distance from ``x_i``.
    grand_mean : float
        ``D_mu = sum_i w_i a[i]``.
    weights : ndarray
        Probability weights of the sample points (uniform by default).
    uniform : bool
        Whether the weights are the uniform ``1/n``.
    """

    entries: np.ndarray
    row_means: np.ndarray
    grand_mean: float
    weights: np.ndarray
    uniform: bool = True

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def degenerate(self) -> bool:
        """True when all (positively weighted) points coincide."""
        return not self.grand_mean > 0.0

    def permuted(self, perm) -> "CenteredMatrix":
        """Relabel points by ``perm``; centering commutes with permutations."""
        perm = np.asarray(perm)
        return CenteredMatrix(
            self.entries[np.ix_(perm, perm)],
            self.row_means[perm],
            self.grand_mean,
            self.weights[perm],
            self.uniform,
        )


def _weights(n: int, weights) -> tuple[np.ndarray, bool]:
    if weights is None:
        return np.full(n, 1.0 / n), True
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != n:
        raise ValueError(f"expected {n} weights, got {w.shape[0]}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights of an empirical measure must be finite and non-negative")
    if abs(math.fsum(w) - 1.0) > 1e-12:
        raise ValueError(f"weights must sum to 1; got {math.fsum(w)!r}")
    return w, False


def double_center(D: DistanceMatrix, weights=None) -> CenteredMatrix:
    """Doubly center a distance matrix against the (weighted) empirical measure.

    Row means and the grand mean use compensated summation.  The pair term
    ``a[i] + a[j]`` is formed first so that the output is exactly symmetric.
    """
    m = D.entries if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    n = m.shape[0]
    if n < 1:
        raise ValueError("cannot center an empty matrix")
    w, uniform = _weights(n, weights)
    if uniform:
        a = np.array([math.fsum(row) / n for row in m])
        grand = math.fsum(a) / n
    else:
        a = np.array([math.fsum(row * w) for row in m])
        grand = math.fsum(a * w)
    entries = m - (a[:, None] + a[None, :]) + grand
    entries.setflags(write=False)
    a.setflags(write=False)
    return CenteredMatrix(entries, a, grand, w, uniform)


# --------------------------------------------------------------------------
# signed measures


@dataclass(frozen=True, eq=False)
class SignedDiscreteMeasure:
    """Finitely supported signed measure ``sum_i w_i delta(x_i)``."""

    support: SampleSet
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.shape[0] != len(self.support):
            raise ValueError(f"{len(self.support)} support points but {w.shape[0]} weights")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def is_probability(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.weights >= 0)) and abs(self.total_mass - 1.0) <= tol

    def __sub__(self, other: "SignedDiscreteMeasure") -> "SignedDiscreteMeasure":
        return SignedDiscreteMeasure(
            self.support.concat(other.support),
            np.concatenate([self.weights, -other.weights]),
        )

    def __add__(self, other: "SignedDiscreteMeasure") -> "SignedDiscreteMeasure":
        return SignedDiscreteMeasure(
            self.support.concat(other.support),
            np.concatenate([self.weights, other.weights]),
        )

    def scale(self, c: float) -> "SignedDiscreteMeasure":
        return SignedDiscreteMeasure(self.support, self.weights * c)

    @classmethod
    def uniform(cls, support: SampleSet) -> "SignedDiscreteMeasure":
        n = len(support)
        return cls(support, np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, support: SampleSet) -> "SignedDiscreteMeasure":
        if len(support) != 1:
            raise ValueError("a point mass needs a one-point support")
        return cls(support, np.ones(1))


def energy(m: SignedDiscreteMeasure, spec: MetricSpec) -> float:
    """``D(m) = sum_ij w_i w_j d(x_i, x_j)``."""
    D = distance_matrix(spec, m.support).entries
    w = m.weights
    return math.fsum((w[:, None] * D * w[None, :]).ravel())


def energy_from_matrix(D: DistanceMatrix, weights) -> float:
    m = D.entries if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    w = np.asarray(weights, dtype=float)
    return math.fsum((w[:, None] * m * w[None, :]).ravel())


def a_function(m: SignedDiscreteMeasure, spec: MetricSpec, x) -> float:
    """``a_m(x) = sum_j w_j d(x, x_j)``."""
    d = distances_to(spec, x, m.support)
    return math.fsum(d * m.weights)


def zero_energy_mixture(
    mu1: SignedDiscreteMeasure,
    mu2: SignedDiscreteMeasure,
    x1: SampleSet,
    x2: SampleSet,
    spec: MetricSpec,
) -> tuple[float, SignedDiscreteMeasure, SignedDiscreteMeasure]:
    """Blend ``mu_i`` with point masses at ``x_i`` until ``D(tau1 - tau2) = 0``.

    Requires ``D(mu1 - mu2) >= 0`` and ``x1 != x2``.  Returns ``gamma`` in
    ``(0, 1]`` and ``tau_i = gamma mu_i + (1 - gamma) delta(x_i)``.  The
    energy is a quadratic in ``gamma`` that is negative at 0, so the root in
    ``(0, 1]`` is unique.
    """
    p1, p2 = SignedDiscreteMeasure.point_mass(x1), SignedDiscreteMeasure.point_mass(x2)
    mu, delta = mu1 - mu2, p1 - p2
    e_mu = energy(mu, spec)
    e_delta = energy(delta, spec)
    if e_delta >= 0:
        raise ValueError("x1 and x2 must be distinct points")
    if e_mu < 0:
        raise ValueError("need D(mu1 - mu2) >= 0")
    # cross term: sum over supports of mu x delta
    both = mu + delta
    e_cross = (energy(both, spec) - e_mu - e_delta) / 2.0
    # E(g) = g^2 e_mu + 2 g (1 - g) e_cross + (1 - g)^2 e_delta
    qa = e_mu - 2 * e_cross + e_delta
    qb = 2 * e_cross - 2 * e_delta
    qc = e_delta
    if abs(qa) < 1e-15 * max(1.0, abs(qb), abs(qc)):
        gamma = -qc / qb
    else:
        disc = math.sqrt(max(qb * qb - 4 * qa * qc, 0.0))
        roots = [(-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa)]
        roots = [g for g in roots if 0 < g <= 1 + 1e-12]
        gamma = min(roots)
    gamma = min(gamma, 1.0)
    tau1 = mu1.scale(gamma) + p1.scale(1 - gamma)
    tau2 = mu2.scale(gamma) + p2.scale(1 - gamma)
    return gamma, tau1, tau2


def centered_l2_bound_holds(Kc: CenteredMatrix, slack: float = 1e-12) -> bool:
    """Check ``sum_ij w_i w_j d_mu(x_i, x_j)^2 <= 4 D(mu)^2``."""
    w = Kc.weights
    lhs = math.fsum((w[:, None] * Kc.entries ** 2 * w[None, :]).ravel())
    return lhs <= 4 * Kc.grand_mean ** 2 + slack


__all__ = [
    "CenteredMatrix",
    "SignedDiscreteMeasure",
    "double_center",
    "energy",
    "energy_from_matrix",
    "a_function",
    "zero_energy_mixture",
    "centered_l2_bound_holds",
]
