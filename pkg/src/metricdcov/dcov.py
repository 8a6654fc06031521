"""Distance covariance, variance and correlation as V-statistics.

The main estimator :func:`dcov_v` works on doubly centered matrices.  Three
independent routes compute the same number and are used to cross-check it:

* :func:`dcov_definition_oracle` re-derives the centered terms from raw
  distances and forms the double sum literally;
* :func:`dcov_kernel6_oracle` averages the degree-6 kernel over every index
  tuple (tiny samples only);
* :func:`dcov_tensor_oracle` evaluates ``4 ||beta(theta - mu x nu)||^2`` from
  Hilbert-space embeddings of the two marginals.

``dcov`` is reported without a square root because it is negative for some
samples in spaces that are not of negative type.  ``dcor`` is
``dcov / sqrt(dvar_x * dvar_y)``, which lies in ``[-1, 1]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .centering import CenteredMatrix, SignedDiscreteMeasure, double_center, energy
from .metrics import (
    DistanceMatrix,
    MetricSpec,
    SampleSet,
    distance_matrix,
    euclidean,
    eval_metric,
)


class DegenerateMarginalError(ValueError):
    """A marginal sample is concentrated on a single point."""


@dataclass
class DcovResult:
    dcov: float
    dvar_x: float
    dvar_y: float
    dcor: Optional[float]
    n: int


def _check_aligned(Kc: CenteredMatrix, Lc: CenteredMatrix):
    if Kc.n != Lc.n:
        raise ValueError(f"sample sizes differ: {Kc.n} vs {Lc.n}")
    if not np.array_equal(Kc.weights, Lc.weights):
        raise ValueError("the two centered matrices use different sample weights")


def _weighted_products(Kc: CenteredMatrix, Lc: CenteredMatrix) -> np.ndarray:
    prod = Kc.entries * Lc.entries
    if Kc.uniform:
        return prod
    w = Kc.weights
    return w[:, None] * prod * w[None, :]


def dcov_v(Kc: CenteredMatrix, Lc: CenteredMatrix) -> float:
    """``sum_ij w_i w_j Kc[i, j] Lc[i, j]`` (``1/n^2`` weights by default).

    The reduction is correctly rounded (``math.fsum``), so it does not depend
    on summation order.
    """
    _check_aligned(Kc, Lc)
    total = math.fsum(_weighted_products(Kc, Lc).ravel())
    if Kc.uniform:
        return total / (Kc.n * Kc.n)
    return total


def dcov_trace(Kc: CenteredMatrix, Lc: CenteredMatrix) -> float:
    """``tr(Kc Lc) / n^2`` from the diagonal terms ``sum_j Kc[i, j] Lc[j, i]``.

    Uses the same correctly rounded reduction as :func:`dcov_v`, so the two
    agree bit for bit whenever ``Lc`` is exactly symmetric.
    """
    _check_aligned(Kc, Lc)
    if not Kc.uniform:
        raise ValueError("the trace form applies to unweighted samples")
    terms = Kc.entries * Lc.entries.T
    return math.fsum(terms.ravel()) / (Kc.n * Kc.n)


def dvar(Kc: CenteredMatrix) -> float:
    """Distance variance ``dcov(X, X)``; zero iff the sample is degenerate."""
    return dcov_v(Kc, Kc)


def dcor(Kc: CenteredMatrix, Lc: CenteredMatrix) -> Optional[float]:
    """``dcov / sqrt(dvar_x dvar_y)``, or ``None`` for a degenerate marginal."""
    if Kc.degenerate or Lc.degenerate:
        return None
    vx, vy = dvar(Kc), dvar(Lc)
    if vx <= 0 or vy <= 0:
        return None
    return dcov_v(Kc, Lc) / math.sqrt(vx * vy)


def dcov_stats(Kc: CenteredMatrix, Lc: CenteredMatrix) -> DcovResult:
    vx, vy = dvar(Kc), dvar(Lc)
    c = dcov_v(Kc, Lc)
    r = None
    if not (Kc.degenerate or Lc.degenerate) and vx > 0 and vy > 0:
        r = c / math.sqrt(vx * vy)
    return DcovResult(dcov=c, dvar_x=vx, dvar_y=vy, dcor=r, n=Kc.n)


def dcov_samples(
    spec_x: MetricSpec,
    x: SampleSet,
    spec_y: MetricSpec,
    y: SampleSet,
    weights=None,
    workers: int = 1,
) -> DcovResult:
    """Convenience wrapper: distance matrices, centering and :func:`dcov_stats`."""
    if len(x) != len(y):
        raise ValueError(f"x and y have different lengths: {len(x)} vs {len(y)}")
    Kc = double_center(distance_matrix(spec_x, x, workers), weights)
    Lc = double_center(distance_matrix(spec_y, y, workers), weights)
    return dcov_stats(Kc, Lc)


# --------------------------------------------------------------------------
# oracles


def _raw(D) -> np.ndarray:
    return D.entries if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)


def dcov_definition_oracle(Dx, Dy, weights=None) -> float:
    """Literal double sum of ``d_mu(x, x') d_nu(y, y')`` from raw distances."""
    kx, ky = _raw(Dx), _raw(Dy)
    n = kx.shape[0]
    if ky.shape[0] != n:
        raise ValueError(f"sample sizes differ: {n} vs {ky.shape[0]}")
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    ax = kx @ w
    ay = ky @ w
    big_dx = float(w @ ax)
    big_dy = float(w @ ay)
    total = 0.0
    for i in range(n):
        for j in range(n):
            dmu = kx[i, j] - ax[i] - ax[j] + big_dx
            dnu = ky[i, j] - ay[i] - ay[j] + big_dy
            total += w[i] * w[j] * dmu * dnu
    return total


KERNEL6_MAX_N = 10


def _f_table(D: np.ndarray) -> np.ndarray:
    # f[z1, z2, z3, z4] = d(z1, z2) - d(z1, z3) - d(z2, z4) + d(z3, z4)
    return (
        D[:, :, None, None]
        - D[:, None, :, None]
        - D[None, :, None, :]
        + D[None, None, :, :]
    )


def dcov_kernel6_oracle(
    x: SampleSet,
    y: SampleSet,
    spec_x: MetricSpec,
    spec_y: MetricSpec,
    weights=None,
) -> float:
    """Average of ``h = f(x1, x2, x3, x4) f(y1, y2, y5, y6)`` over all 6-tuples.

    Distances are evaluated pairwise with :func:`eval_metric`; cost is
    ``O(n^6)`` so ``n <= 10`` is enforced.
    """
    n = len(x)
    if len(y) != n:
        raise ValueError(f"sample sizes differ: {n} vs {len(y)}")
    if n > KERNEL6_MAX_N:
        raise ValueError(f"kernel oracle is O(n^6); n={n} exceeds {KERNEL6_MAX_N}")
    dx = np.array([[eval_metric(spec_x, x[i], x[j]) for j in range(n)] for i in range(n)])
    dy = np.array([[eval_metric(spec_y, y[i], y[j]) for j in range(n)] for i in range(n)])
    fx = _f_table(dx)  # indices (i1, i2, i3, i4)
    fy = _f_table(dy)  # indices (i1, i2, i5, i6)
    h = fx[:, :, :, :, None, None] * fy[:, :, None, None, :, :]
    if weights is None:
        return float(h.mean())
    w = np.asarray(weights, dtype=float)
    wt = w
    for _ in range(5):
        wt = np.multiply.outer(wt, w)
    return float(np.sum(h * wt))


def dcov_tensor_oracle(Ex, Ey, weights=None) -> float:
    """``4 ||sum_i w_i phi_i (x) psi_i - phibar (x) psibar||^2`` from embeddings.

    ``Ex`` and ``Ey`` are :class:`~metricdcov.negtype.Embedding` objects (or
    coordinate arrays) of the two marginal samples with rows aligned.
    """
    phi = np.asarray(getattr(Ex, "coordinates", Ex), dtype=float)
    psi = np.asarray(getattr(Ey, "coordinates", Ey), dtype=float)
    n = phi.shape[0]
    if psi.shape[0] != n:
        raise ValueError(f"sample sizes differ: {n} vs {psi.shape[0]}")
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if phi.shape[1] == 0 or psi.shape[1] == 0:
        return 0.0
    joint = (phi * w[:, None]).T @ psi  # barycenter of theta in H (x) H
    prod = np.outer(w @ phi, w @ psi)  # barycenter of mu x nu
    beta = joint - prod
    return 4.0 * float(np.sum(beta * beta))


# --------------------------------------------------------------------------
# mixtures that defeat dcov outside negative type


@dataclass
class NecNegTypeMixture:
    """Weighted paired sample ``theta = (mu1 x delta(y1) + mu2 x delta(y2)) / 2``.

    ``y`` lives on the real line with points ``0`` and ``dy`` and the
    Euclidean metric, so ``d(y1, y2) = dy``.
    """

    x: SampleSet
    y: SampleSet
    weights: np.ndarray
    spec_x: MetricSpec
    spec_y: MetricSpec
    predicted_dcov: float
    energy_difference: float

    def distance_matrices(self) -> tuple[DistanceMatrix, DistanceMatrix]:
        return distance_matrix(self.spec_x, self.x), distance_matrix(self.spec_y, self.y)

    def dcov(self) -> float:
        Dx, Dy = self.distance_matrices()
        return dcov_v(double_center(Dx, self.weights), double_center(Dy, self.weights))


def build_necnegtype_mixture(
    mu1: SignedDiscreteMeasure,
    mu2: SignedDiscreteMeasure,
    dy: float,
    spec: MetricSpec,
) -> NecNegTypeMixture:
    """Pair ``mu1`` with ``y1`` and ``mu2`` with ``y2`` and predict the dcov.

    The prediction is ``-dy * D(mu1 - mu2) / 8``: positive whenever the two
    measures are separated by energy, zero when their energy difference
    vanishes (even though the mixture is then not a product), negative when
    the space fails negative type on their supports.
    """
    for m in (mu1, mu2):
        if not m.is_probability():
            raise ValueError("mu1 and mu2 must be probability measures")
    if not dy > 0:
        raise ValueError(f"dy must be positive; got {dy}")
    x = mu1.support.concat(mu2.support)
    n1, n2 = len(mu1.support), len(mu2.support)
    y = SampleSet.vectors(np.concatenate([np.zeros(n1), np.full(n2, float(dy))]))
    w = np.concatenate([mu1.weights, mu2.weights]) / 2.0
    e = energy(mu1 - mu2, spec)
    return NecNegTypeMixture(
        x=x,
        y=y,
        weights=w,
        spec_x=spec,
        spec_y=euclidean(),
        predicted_dcov=-dy * e / 8.0,
        energy_difference=e,
    )


def product_grid(xs: SampleSet, ys: SampleSet) -> tuple[SampleSet, SampleSet]:
    """All pairs ``(x_a, y_b)`` once each, so the empirical measure is a product."""
    ia, ib = zip(*itertools.product(range(len(xs)), range(len(ys))))
    return xs.take(list(ia)), ys.take(list(ib))
