"""End-to-end acceptance suite; each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also repeated in the terminal summary.
"""

import contextlib
import math
import time

import numpy as np
from conftest import ACCEPTANCE_LINES
from scipy.integrate import quad

from metricdcov.centering import SignedDiscreteMeasure, double_center, energy_from_matrix
from metricdcov.dcov import (
    build_necnegtype_mixture,
    dcov_definition_oracle,
    dcov_kernel6_oracle,
    dcov_tensor_oracle,
    dcov_trace,
    dcov_v,
    dvar,
)
from metricdcov.inference import (
    COVDIST_BREAKS,
    ContingencyTable,
    calibrate,
    categorical_dcov,
    chisq_mixture_sample,
    covdist_cell_probabilities,
    null_eigenvalues,
    uncorrelated_distances_demo,
)
from metricdcov.metrics import (
    SampleSet,
    chebyshev,
    discrete,
    distance_matrix,
    euclidean,
    minkowski,
    power_transform,
)
from metricdcov.negtype import (
    barycenter,
    embed_sample,
    negtype_check,
    quadratic_form,
    search_negtype_violation,
    uniform_cube_sampler,
    varx_identities_check,
)


@contextlib.contextmanager
def criterion(k: int, title: str):
    start = time.perf_counter()
    details: list[str] = []
    try:
        yield details
    except BaseException as exc:
        line = f"FAIL criterion {k}: {title} ({time.perf_counter() - start:.1f}s) -- {exc}".splitlines()[0]
        print(line)
        ACCEPTANCE_LINES.append(line)
        raise
    extra = f"; {'; '.join(details)}" if details else ""
    line = f"PASS criterion {k}: {title} ({time.perf_counter() - start:.1f}s{extra})"
    print(line)
    ACCEPTANCE_LINES.append(line)


VECTOR_METRICS = [
    euclidean(),
    minkowski(1.5),
    chebyshev(),
    power_transform(euclidean(), 0.5),
    power_transform(minkowski(1.5), 0.7),
    power_transform(chebyshev(), 0.5),
]
ALL_METRICS = VECTOR_METRICS + [discrete(), power_transform(discrete(), 0.5)]


def random_side(rng, spec, n, base=None):
    """A sample for ``spec``; numeric sides lean on ``base`` to create dependence."""
    if spec.kind == "discrete":
        if base is not None and rng.uniform() < 0.7:
            return SampleSet.labels([f"c{int(v > 0)}{int(v > 1)}" for v in base[:, 0]])
        return SampleSet.labels([f"c{k}" for k in rng.integers(0, int(rng.integers(2, 5)), size=n)])
    pts = rng.normal(size=(n, int(rng.integers(1, 4))))
    if base is not None:
        pts[:, 0] += rng.uniform(0, 2) * base[:, 0]
    return SampleSet.vectors(pts)


def test_criterion_1_oracle_agreement():
    with criterion(1, "dcov_v matches definition / kernel6 / tensor oracles on 200 samples") as info:
        rng = np.random.default_rng(20240101)
        n_k6 = n_tensor = 0
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(3, 51))
            sx, sy = ALL_METRICS[rng.integers(len(ALL_METRICS))], ALL_METRICS[rng.integers(len(ALL_METRICS))]
            base = rng.normal(size=(n, 1))
            x = random_side(rng, sx, n, base)
            y = random_side(rng, sy, n, base)
            Dx, Dy = distance_matrix(sx, x), distance_matrix(sy, y)
            v = dcov_v(double_center(Dx), double_center(Dy))
            ref = dcov_definition_oracle(Dx, Dy)
            err = abs(ref - v)
            if v != 0:
                worst = max(worst, err / abs(v))
            assert err <= 1e-10 * abs(v), (sx.describe(), sy.describe(), n, v, ref)
            if n <= 8:
                k6 = dcov_kernel6_oracle(x, y, sx, sy)
                assert abs(k6 - v) <= 1e-10 * abs(v), (n, v, k6)
                n_k6 += 1
            if negtype_check(Dx).is_negative_type and negtype_check(Dy).is_negative_type:
                t = dcov_tensor_oracle(embed_sample(Dx), embed_sample(Dy))
                assert abs(t - v) <= 1e-9 * abs(v), (n, v, t)
                n_tensor += 1
        info.append(f"kernel6 checked {n_k6}, tensor checked {n_tensor}, worst rel {worst:.1e}")
        assert n_k6 > 0 and n_tensor > 0


def test_criterion_2_trace_and_eigenvalue_sum():
    with criterion(2, "trace path equals entrywise path; eigenvalue sum equals D(mu)D(nu)") as info:
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(3, 60))
            sx, sy = VECTOR_METRICS[rng.integers(len(VECTOR_METRICS))], VECTOR_METRICS[rng.integers(len(VECTOR_METRICS))]
            base = rng.normal(size=(n, 1))
            Kc = double_center(distance_matrix(sx, random_side(rng, sx, n, base)))
            Lc = double_center(distance_matrix(sy, random_side(rng, sy, n, base)))
            assert dcov_trace(Kc, Lc) == dcov_v(Kc, Lc)
            err = abs(math.fsum(null_eigenvalues(Kc, Lc)) - Kc.grand_mean * Lc.grand_mean)
            worst = max(worst, err)
            assert err <= 1e-9
        info.append(f"worst eigenvalue-sum error {worst:.1e}")


def test_criterion_3_cauchy_schwarz_and_dvar_bound():
    with criterion(3, "dcov^2 <= dvar dvar; dvar <= D^2 with equality iff <= 2 support points") as info:
        rng = np.random.default_rng(3)
        equal_cases = strict_cases = 0
        for k in range(200):
            n = int(rng.integers(3, 51))
            sx, sy = ALL_METRICS[rng.integers(len(ALL_METRICS))], ALL_METRICS[rng.integers(len(ALL_METRICS))]
            base = rng.normal(size=(n, 1))
            x = random_side(rng, sx, n, base)
            if k % 4 == 0:
                # collapse x onto one or two distinct support points
                support = int(rng.integers(1, 3))
                x = x.take(list(rng.integers(0, support, size=n)))
            y = random_side(rng, sy, n, base)
            Kc = double_center(distance_matrix(sx, x))
            Lc = double_center(distance_matrix(sy, y))
            v, vx, vy = dcov_v(Kc, Lc), dvar(Kc), dvar(Lc)
            assert v * v <= vx * vy + 1e-12
            for c, var in ((Kc, vx), (Lc, vy)):
                assert var <= c.grand_mean ** 2 + 1e-12
            distinct = len({x[i] if sx.kind == "discrete" else tuple(x[i]) for i in range(n)})
            gap = Kc.grand_mean ** 2 - vx
            if distinct <= 2:
                assert abs(gap) <= 1e-10, (distinct, gap)
                equal_cases += 1
            else:
                assert gap > 1e-10, (distinct, gap)
                strict_cases += 1
        info.append(f"{equal_cases} samples with <= 2 support points, {strict_cases} with more")
        assert equal_cases > 0 and strict_cases > 0


def random_measure(rng, dim):
    k = int(rng.integers(1, 6))
    return SignedDiscreteMeasure(SampleSet.vectors(rng.normal(size=(k, dim))), rng.dirichlet(np.ones(k)))


def test_criterion_4_mixture_formula():
    with criterion(4, "mixture dcov equals -dy D(mu1 - mu2)/8; l1 square gives 0 for non-product") as info:
        rng = np.random.default_rng(4)
        specs = [euclidean(), minkowski(1), chebyshev(), power_transform(euclidean(), 0.5)]
        worst = 0.0
        for _ in range(20):
            spec = specs[rng.integers(len(specs))]
            dim = int(rng.integers(1, 4))
            mu1, mu2 = random_measure(rng, dim), random_measure(rng, dim)
            dy = float(rng.uniform(0.1, 5))
            mix = build_necnegtype_mixture(mu1, mu2, dy, spec)
            err = abs(mix.dcov() - mix.predicted_dcov)
            worst = max(worst, err)
            assert err <= 1e-10
        l1 = minkowski(1)
        mu1 = SignedDiscreteMeasure.uniform(SampleSet.vectors([[0, 0], [1, 1]]))
        mu2 = SignedDiscreteMeasure.uniform(SampleSet.vectors([[0, 1], [1, 0]]))
        mix = build_necnegtype_mixture(mu1, mu2, 1.0, l1)
        assert abs(mix.dcov()) <= 1e-10
        # non-product: the joint weight of (x=(0,0), y=0) is 1/4, the marginal product 1/4 * 1/2
        joint = sum(w for p, yv, w in zip(mix.x.points, mix.y.points[:, 0], mix.weights)
                    if tuple(p) == (0.0, 0.0) and yv == 0)
        assert joint == 0.25 != 0.25 * 0.5
        info.append(f"worst error {worst:.1e}; l1 square dcov {mix.dcov():.1e}")


def test_criterion_5_negative_type_search():
    with criterion(5, "chebyshev violation found, fixed by sqrt; l2 and l1 searches find none") as info:
        sampler = uniform_cube_sampler(3)
        hit = search_negtype_violation(chebyshev(), sampler, 8, 10_000, seed=7)
        assert hit is not None
        alpha = hit.report.witness
        D = distance_matrix(chebyshev(), hit.sample)
        assert abs(alpha.sum()) <= 1e-12
        assert quadratic_form(D, alpha) > 0
        # every violating configuration among the 10^4 seeded draws passes under r = 1/2
        root = power_transform(chebyshev(), 0.5)
        violations = 0
        for i in range(10_000):
            s = sampler(np.random.default_rng([7, i]), 8)
            if not negtype_check(distance_matrix(chebyshev(), s)).is_negative_type:
                violations += 1
                assert negtype_check(distance_matrix(root, s)).is_negative_type, i
        assert violations > 0
        for spec in (euclidean(), minkowski(1)):
            assert search_negtype_violation(spec, sampler, 8, 10_000, seed=7) is None
        info.append(f"first witness at iteration {hit.iteration}; {violations} violating draws all fixed")


def test_criterion_6_embedding_identities():
    with criterion(6, "embedding reproduces distances; mean/variance identities; energy = -2|beta|^2") as info:
        rng = np.random.default_rng(6)
        accepted = 0
        worst_embed = worst_bary = 0.0
        while accepted < 50:
            n = int(rng.integers(2, 40))
            spec = VECTOR_METRICS[rng.integers(len(VECTOR_METRICS))]
            D = distance_matrix(spec, random_side(rng, spec, n))
            if not negtype_check(D).is_negative_type:
                continue
            accepted += 1
            E = embed_sample(D)
            scale = float(D.entries.max())
            err = float(np.max(np.abs(E.squared_distances() - D.entries)))
            worst_embed = max(worst_embed, err / scale)
            assert err <= 1e-9 * scale
            assert varx_identities_check(E, D).ok(1e-9 * max(1.0, scale))
            alpha = rng.normal(size=n)
            alpha -= alpha.mean()
            beta = barycenter(E, alpha)
            e = energy_from_matrix(D, alpha)
            gap = abs(e + 2 * float(beta @ beta))
            worst_bary = max(worst_bary, gap / max(1.0, scale * float(alpha @ alpha)))
            assert gap <= 1e-9 * max(1.0, scale * float(alpha @ alpha))
        info.append(f"worst embedding rel error {worst_embed:.1e}, worst barycenter gap {worst_bary:.1e}")


def test_criterion_7_categorical_equivalence():
    with criterion(7, "categorical closed form equals dcov_v under the discrete metric") as info:
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(50):
            r, c = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            counts = rng.integers(0, 8, size=(r, c))
            counts[0, 0] += 1
            t = ContingencyTable.from_counts(counts)
            xs, ys = t.to_labels()
            v = dcov_v(
                double_center(distance_matrix(discrete(), SampleSet.labels(xs))),
                double_center(distance_matrix(discrete(), SampleSet.labels(ys))),
            )
            err = abs(categorical_dcov(t).dcov - v)
            worst = max(worst, err)
            assert err <= 1e-12
            prod = ContingencyTable.from_counts(np.outer(rng.integers(1, 6, size=r), rng.integers(1, 6, size=c)))
            assert abs(categorical_dcov(prod).dcov) <= 1e-12
        info.append(f"worst error {worst:.1e}")


def test_criterion_8_calibration():
    with criterion(8, "null rejection in [0.03, 0.07]; power >= 0.95; null mean near 1") as info:
        rates = {}
        for method in ("permutation", "asymptotic"):
            null = calibrate("independent", n=100, trials=1000, alpha=0.05, method=method, seed=2024,
                             permutations=199, mc_draws=1000)
            alt = calibrate("linear", n=50, trials=1000, alpha=0.05, method=method, seed=2025,
                            permutations=199, mc_draws=1000)
            rates[method] = (null.rejection_rate, alt.rejection_rate, null.mean_statistic)
        info.append(", ".join(f"{m}: size {a:.3f} power {b:.3f} null mean {s:.3f}" for m, (a, b, s) in rates.items()))
        for size, power, mean_stat in rates.values():
            assert 0.03 <= size <= 0.07
            assert power >= 0.95
            assert abs(mean_stat - 1) <= 0.05
        # the simulated limit law itself has mean 1 by construction
        draws = chisq_mixture_sample(np.full(100, 0.01), 20000, seed=1)
        assert abs(draws.mean() - 1) <= 0.05


def _mean_abs_diff(a, b):
    la, ha = COVDIST_BREAKS[a], COVDIST_BREAKS[a + 1]
    lb, hb = COVDIST_BREAKS[b], COVDIST_BREAKS[b + 1]

    def inner(u):
        pts = [u] if lb < u < hb else None
        return quad(lambda v: abs(u - v), lb, hb, points=pts, epsabs=1e-15)[0]

    return quad(inner, la, ha, epsabs=1e-15, limit=200)[0] / ((ha - la) * (hb - lb))


def test_criterion_9_uncorrelated_distances():
    with criterion(9, "distances uncorrelated by quadrature; demo cov within 3 SE and dcov p < 0.01") as info:
        p = covdist_cell_probabilities()
        assert p.min() >= 0
        m = np.array([[_mean_abs_diff(a, b) for b in range(3)] for a in range(3)])
        cov = np.einsum("ab,cd,ac,bd->", p, p, m, m) - np.einsum("ab,cd,ac->", p, p, m) * np.einsum(
            "ab,cd,bd->", p, p, m
        )
        assert abs(cov) <= 1e-12
        rep = uncorrelated_distances_demo(n=2000, seed=0, permutations=199)
        info.append(f"population cov {cov:.1e}; sample z {rep.z_score:.2f}, p {rep.p_value:.4f}")
        assert abs(rep.distance_covariance) < 3 * rep.standard_error
        assert rep.p_value < 0.01


def test_criterion_10_consistency_trend():
    with criterion(10, "median |dcov_n - dcov| decreases from n = 100 to n = 1600") as info:
        theta = np.array([[0.20, 0.05, 0.05], [0.05, 0.20, 0.05], [0.05, 0.05, 0.30]])
        # 20 * theta is an integer table whose frequencies are exactly theta
        truth = categorical_dcov(ContingencyTable.from_counts(np.rint(20 * theta).astype(int))).dcov
        rng = np.random.default_rng(10)
        medians = []
        for n in (100, 400, 1600):
            errs = []
            for _ in range(50):
                counts = rng.multinomial(n, theta.ravel()).reshape(3, 3)
                errs.append(abs(categorical_dcov(ContingencyTable.from_counts(counts)).dcov - truth))
            medians.append(float(np.median(errs)))
        info.append("medians " + ", ".join(f"{m:.2e}" for m in medians))
        assert medians[0] > medians[1] > medians[2]
