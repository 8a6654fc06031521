"""Independence tests built on the distance covariance V-statistic.

Two calibrations of the same statistic are provided:

* :func:`permutation_test` re-pairs the samples at random (exact under
  exchangeability; the default);
* :func:`asymptotic_test` compares ``T = n dcov / (D(mu_n) D(nu_n))`` with a
  Monte-Carlo sample of the limiting weighted chi-square mixture, whose
  weights are products of the eigenvalues of the two centered matrices.

Categorical data get closed forms (:func:`categorical_dcov`) together with
Pearson's statistic for comparison.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .centering import CenteredMatrix, double_center
from .dcov import DegenerateMarginalError, dcov_v
from .metrics import SampleSet, distance_matrix, euclidean

EIGEN_FLOOR = 1e-12
TIE_RTOL = 1e-12


@dataclass
class TestResult:
    """Outcome of an independence test.

    ``statistic`` is the normalized ``n dcov / (D(mu_n) D(nu_n))``, whose null
    limit has expectation 1.  ``p_value`` is right-tailed with the ``+1``
    correction; ``p_value_two_sided`` is reported for metrics where ``dcov``
    may be negative.
    """

    __test__ = False  # not a pytest class

    statistic: float
    raw_dcov: float
    p_value: float
    method: str
    n: int
    seed: int
    permutations: Optional[int] = None
    mc_draws: Optional[int] = None
    p_value_two_sided: Optional[float] = None
    eigenvalues: Optional[list] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return asdict(self)


def _require_nondegenerate(Kc: CenteredMatrix, Lc: CenteredMatrix):
    if Kc.n != Lc.n:
        raise ValueError(f"sample sizes differ: {Kc.n} vs {Lc.n}")
    if Kc.degenerate or Lc.degenerate:
        raise DegenerateMarginalError(
            "a marginal sample is concentrated on one point; the independence test is undefined"
        )
    if not (Kc.uniform and Lc.uniform):
        raise ValueError("independence tests need unweighted samples")


def normalized_statistic(Kc: CenteredMatrix, Lc: CenteredMatrix) -> tuple[float, float]:
    """Return ``(T, dcov)`` with ``T = n dcov / (D(mu_n) D(nu_n))``."""
    _require_nondegenerate(Kc, Lc)
    c = dcov_v(Kc, Lc)
    return Kc.n * c / (Kc.grand_mean * Lc.grand_mean), c


def _replica_seed(seed: int, b: int) -> np.random.Generator:
    return np.random.default_rng([seed, b])


def _perm_dcov(K: np.ndarray, L: np.ndarray, perm: np.ndarray) -> float:
    lp = L[np.ix_(perm, perm)]
    return float(np.einsum("ij,ij->", K, lp))


def permutation_test(
    Kc: CenteredMatrix,
    Lc: CenteredMatrix,
    permutations: int = 999,
    seed: int = 0,
    workers: int = 1,
) -> TestResult:
    """Permutation test of independence.

    Replica ``b`` re-indexes the rows and columns of ``Lc`` by a permutation
    drawn from ``default_rng([seed, b])``; centering is permutation
    equivariant, so nothing is recomputed.  The p-value is
    ``(1 + #{replica >= observed}) / (B + 1)``.
    """
    if permutations < 1:
        raise ValueError(f"need at least one permutation; got {permutations}")
    T, c = normalized_statistic(Kc, Lc)
    n = Kc.n
    K, L = Kc.entries, Lc.entries
    observed = float(np.einsum("ij,ij->", K, L))

    def replica(b: int) -> float:
        perm = _replica_seed(seed, b).permutation(n)
        return _perm_dcov(K, L, perm)

    if workers <= 1:
        stats = np.array([replica(b) for b in range(permutations)])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = np.array(list(pool.map(replica, range(permutations))))
    slack = TIE_RTOL * max(abs(observed), float(np.max(np.abs(stats))), 1e-300)
    upper = int(np.sum(stats >= observed - slack))
    lower = int(np.sum(stats <= observed + slack))
    p = (1 + upper) / (permutations + 1)
    p_low = (1 + lower) / (permutations + 1)
    return TestResult(
        statistic=T,
        raw_dcov=c,
        p_value=p,
        method="permutation",
        n=n,
        seed=seed,
        permutations=permutations,
        p_value_two_sided=min(1.0, 2 * min(p, p_low)),
    )


def null_eigenvalues(Kc: CenteredMatrix, Lc: CenteredMatrix) -> np.ndarray:
    """All products ``kappa_i * ell_j`` of the spectra of ``Kc / n`` and ``Lc / n``.

    These estimate the weights of the chi-square mixture under independence;
    their sum is ``D(mu_n) D(nu_n)``.
    """
    if Kc.n != Lc.n:
        raise ValueError(f"sample sizes differ: {Kc.n} vs {Lc.n}")
    n = Kc.n
    kappa = np.linalg.eigvalsh(Kc.entries) / n
    ell = np.linalg.eigvalsh(Lc.entries) / n
    return np.outer(kappa, ell).ravel()


def chisq_mixture_sample(
    lam: Sequence[float],
    draws: int,
    seed: int = 0,
    chunk: int = 256,
) -> np.ndarray:
    """Monte-Carlo draws of ``sum_i lam_i Z_i^2`` with IID standard normal ``Z_i``.

    Weights with ``|lam_i| < 1e-12 max |lam|`` are dropped first.
    """
    if draws < 1:
        raise ValueError(f"need at least one draw; got {draws}")
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size == 0 or not np.any(lam):
        return np.zeros(draws)
    lam = lam[np.abs(lam) >= EIGEN_FLOOR * np.max(np.abs(lam))]
    rng = np.random.default_rng(seed)
    out = np.empty(draws)
    for start in range(0, draws, chunk):
        stop = min(start + chunk, draws)
        z = rng.standard_normal((stop - start, lam.size))
        out[start:stop] = (z * z) @ lam
    return out


def asymptotic_test(
    Kc: CenteredMatrix,
    Lc: CenteredMatrix,
    mc_draws: int = 1000,
    seed: int = 0,
    keep_eigenvalues: bool = False,
) -> TestResult:
    """Test against the simulated limit law of the normalized statistic."""
    T, c = normalized_statistic(Kc, Lc)
    lam = null_eigenvalues(Kc, Lc) / (Kc.grand_mean * Lc.grand_mean)
    null = chisq_mixture_sample(lam, mc_draws, seed)
    upper = int(np.sum(null >= T))
    lower = int(np.sum(null <= T))
    p = (1 + upper) / (mc_draws + 1)
    p_low = (1 + lower) / (mc_draws + 1)
    return TestResult(
        statistic=T,
        raw_dcov=c,
        p_value=p,
        method="asymptotic",
        n=Kc.n,
        seed=seed,
        mc_draws=mc_draws,
        p_value_two_sided=min(1.0, 2 * min(p, p_low)),
        eigenvalues=[float(v) for v in lam] if keep_eigenvalues else None,
    )


# --------------------------------------------------------------------------
# categorical data


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    x_categories: tuple
    y_categories: tuple
    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts)
        if c.ndim != 2:
            raise ValueError("counts must be a 2-d table")
        if c.size == 0:
            raise ValueError("empty contingency table")
        if np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise ValueError("counts must be non-negative integers")
        c = c.astype(np.int64)
        if c.sum() < 1:
            raise ValueError("contingency table has no observations")
        if c.shape != (len(self.x_categories), len(self.y_categories)):
            raise ValueError("category lists do not match the table shape")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "x_categories", tuple(self.x_categories))
        object.__setattr__(self, "y_categories", tuple(self.y_categories))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_counts(cls, counts) -> "ContingencyTable":
        c = np.asarray(counts)
        return cls(tuple(range(c.shape[0])), tuple(range(c.shape[1])), c)

    @classmethod
    def from_labels(cls, xs: Sequence, ys: Sequence) -> "ContingencyTable":
        if len(xs) != len(ys):
            raise ValueError("label sequences differ in length")
        xcat = tuple(dict.fromkeys(xs))
        ycat = tuple(dict.fromkeys(ys))
        xi = {v: i for i, v in enumerate(xcat)}
        yi = {v: i for i, v in enumerate(ycat)}
        counts = np.zeros((len(xcat), len(ycat)), dtype=np.int64)
        for a, b in zip(xs, ys):
            counts[xi[a], yi[b]] += 1
        return cls(xcat, ycat, counts)

    def to_labels(self) -> tuple[list, list]:
        """Expand into aligned per-observation label lists (row-major order)."""
        xs, ys = [], []
        for i, a in enumerate(self.x_categories):
            for j, b in enumerate(self.y_categories):
                k = int(self.counts[i, j])
                xs.extend([a] * k)
                ys.extend([b] * k)
        return xs, ys

    def frequencies(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        theta = self.counts / self.n
        return theta, theta.sum(axis=1), theta.sum(axis=0)


class CategoricalDcov(NamedTuple):
    dcov: float
    statistic: Optional[float]


def categorical_dcov(t: ContingencyTable) -> CategoricalDcov:
    """Closed-form dcov under the discrete metric and its normalized statistic.

    ``dcov = sum_xy (theta(x, y) - mu(x) nu(y))^2`` and the statistic divides
    ``n dcov`` by ``sum_x mu(x)(1 - mu(x)) sum_y nu(y)(1 - nu(y))``; it is
    ``None`` when a marginal has a single observed category.
    """
    theta, mu, nu = t.frequencies()
    resid = theta - np.outer(mu, nu)
    c = math.fsum((resid * resid).ravel())
    denom = math.fsum(mu * (1 - mu)) * math.fsum(nu * (1 - nu))
    stat = t.n * c / denom if denom > 0 else None
    return CategoricalDcov(c, stat)


def pearson_chisq(t: ContingencyTable) -> float:
    """Pearson's ``n sum (theta - mu nu)^2 / (mu nu)``."""
    theta, mu, nu = t.frequencies()
    if np.any(mu == 0) or np.any(nu == 0):
        raise ValueError("Pearson chi-square needs every category observed at least once")
    expected = np.outer(mu, nu)
    return t.n * math.fsum(((theta - expected) ** 2 / expected).ravel())


# --------------------------------------------------------------------------
# uncorrelated distances, dependent variables


SQRT2_M1 = math.sqrt(2.0) - 1.0
COVDIST_BREAKS = np.array([-1.0, 0.0, SQRT2_M1, 1.0])
COVDIST_Q = np.array([-SQRT2_M1 / 2.0, 0.5, 0.0])


def covdist_cell_probabilities() -> np.ndarray:
    """Cell masses of the density ``1/4 - q(x) q(y)`` on the 3 x 3 grid."""
    widths = np.diff(COVDIST_BREAKS)
    dens = 0.25 - np.outer(COVDIST_Q, COVDIST_Q)
    return dens * np.outer(widths, widths)


def sample_covdist(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Exact draws: pick a cell by its mass, then a uniform point inside it."""
    probs = covdist_cell_probabilities().ravel()
    cells = rng.choice(probs.size, size=n, p=probs / probs.sum())
    ix, iy = np.divmod(cells, 3)
    lo, widths = COVDIST_BREAKS[:-1], np.diff(COVDIST_BREAKS)
    x = lo[ix] + widths[ix] * rng.random(n)
    y = lo[iy] + widths[iy] * rng.random(n)
    return x, y


@dataclass
class CovDistReport:
    n: int
    seed: int
    distance_covariance: float
    standard_error: float
    z_score: float
    dcov: float
    p_value: float
    permutations: int

    def to_dict(self) -> dict:
        return asdict(self)


def uncorrelated_distances_demo(n: int = 2000, seed: int = 0, permutations: int = 199) -> CovDistReport:
    """Sample the dependent-but-uncorrelated-distances example and test it.

    The covariance of ``|X - X'|`` and ``|Y - Y'|`` is estimated from the
    ``n // 2`` disjoint consecutive pairs, which are IID, so the usual
    standard error of a sample covariance applies.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    x, y = sample_covdist(n, rng)
    m = n // 2
    u = np.abs(x[0 : 2 * m : 2] - x[1 : 2 * m : 2])
    v = np.abs(y[0 : 2 * m : 2] - y[1 : 2 * m : 2])
    prod = (u - u.mean()) * (v - v.mean())
    cov = float(prod.sum() / max(m - 1, 1))
    se = float(prod.std(ddof=1) / math.sqrt(m)) if m > 1 else float("inf")
    Kc = double_center(distance_matrix(euclidean(), SampleSet.vectors(x)))
    Lc = double_center(distance_matrix(euclidean(), SampleSet.vectors(y)))
    res = permutation_test(Kc, Lc, permutations, seed)
    return CovDistReport(
        n=n,
        seed=seed,
        distance_covariance=cov,
        standard_error=se,
        z_score=cov / se if se > 0 else float("nan"),
        dcov=res.raw_dcov,
        p_value=res.p_value,
        permutations=permutations,
    )


# --------------------------------------------------------------------------
# calibration harness


Generator = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]


def _independent(rng, n):
    return rng.uniform(size=n), rng.uniform(size=n)


def _linear(rng, n):
    x = rng.standard_normal(n)
    return x, x + 0.5 * rng.standard_normal(n)


def _quadratic(rng, n):
    x = rng.uniform(-1, 1, size=n)
    return x, x * x + 0.1 * rng.standard_normal(n)


GENERATORS: dict[str, Generator] = {
    "independent": _independent,
    "linear": _linear,
    "quadratic": _quadratic,
}


@dataclass
class CalibrationReport:
    generator: str
    method: str
    n: int
    trials: int
    alpha: float
    seed: int
    rejections: int
    rejection_rate: float
    mean_statistic: float

    def to_dict(self) -> dict:
        return asdict(self)


def calibrate(
    generator: str = "independent",
    n: int = 100,
    trials: int = 1000,
    alpha: float = 0.05,
    method: str = "permutation",
    seed: int = 0,
    permutations: int = 199,
    mc_draws: int = 1000,
    workers: int = 1,
) -> CalibrationReport:
    """Rejection rate of a test over repeated synthetic data sets.

    Trial ``k`` draws its data from ``default_rng([seed, k])`` and runs its
    test with seed ``seed + k + 1``, so the outcome ignores ``workers``.
    ``mean_statistic`` averages the normalized statistic over trials; under
    independence it should sit near 1.
    """
    try:
        gen = GENERATORS[generator]
    except KeyError:
        raise ValueError(f"unknown generator {generator!r}; choose from {sorted(GENERATORS)}")
    if method not in ("permutation", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")

    def trial(k: int) -> tuple[bool, float]:
        rng = np.random.default_rng([seed, k])
        x, y = gen(rng, n)
        Kc = double_center(distance_matrix(euclidean(), SampleSet.vectors(x)))
        Lc = double_center(distance_matrix(euclidean(), SampleSet.vectors(y)))
        if method == "permutation":
            res = permutation_test(Kc, Lc, permutations, seed + k + 1)
        else:
            res = asymptotic_test(Kc, Lc, mc_draws, seed + k + 1)
        return res.p_value <= alpha, res.statistic

    if workers <= 1:
        hits = [trial(k) for k in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = list(pool.map(trial, range(trials)))
    r = int(sum(h for h, _ in hits))
    mean_stat = math.fsum(t for _, t in hits) / trials
    return CalibrationReport(generator, method, n, trials, alpha, seed, r, r / trials, mean_stat)
