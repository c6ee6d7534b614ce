import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sp
from scipy import stats

from skrecover.datagen import gen_pyp
from skrecover.errors import NonIdentifiableError
from skrecover.fitting import (
    PrefixSample,
    _grid_sample,
    _make_latent_logpdf,
    _straddle,
    dp_loglik_sketch,
    fit_dp,
    fit_nggp_minwass,
    fit_nggp_prefix,
    nggp_loglik_prefix,
    nggp_urn_sample,
    sample_log_concave,
    wasserstein1_counts,
)
from skrecover.hashing import HashFunction
from skrecover.sketch import MultiSketch, Sketch


def sketch_of_stream(stream, width, seed=0):
    ms = MultiSketch.from_master_seed(seed, 1, width)
    ms.add_many(stream)
    return ms.rows[0]


class TestPrefixSample:
    def test_from_stream(self):
        p = PrefixSample.from_stream(["a", "b", "a", "c", "a"])
        assert p.m == 5
        assert p.num_distinct == 3
        assert sorted(p.counts) == [1, 1, 3]

    def test_validation(self):
        with pytest.raises(ValueError):
            PrefixSample(counts=(2, 1), m=4)
        with pytest.raises(ValueError):
            PrefixSample(counts=(0, 4), m=4)


class TestDpLoglik:
    def test_flat_in_theta_when_one_bucket(self):
        sk = Sketch(HashFunction(1, 0, 1), [50], 50)
        values = {dp_loglik_sketch(th, sk) for th in [0.1, 1.0, 10.0, 1000.0]}
        assert max(values) - min(values) < 1e-9

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        counts = np.bincount(rng.integers(0, 8, size=200), minlength=8)
        sk = Sketch(HashFunction(1, 0, 8), counts, 200)
        for theta in [0.7, 5.0, 40.0]:
            h = 1e-5 * theta
            fd = (dp_loglik_sketch(theta + h, sk) - dp_loglik_sketch(theta - h, sk)) / (2 * h)
            analytic = (
                sp.digamma(theta)
                - sp.digamma(theta + sk.n)
                + (1 / 8) * np.sum(sp.digamma(theta / 8 + counts) - sp.digamma(theta / 8))
            )
            assert fd == pytest.approx(analytic, rel=1e-5, abs=1e-8)

    def test_mle_recovers_theta_on_simulated_sketches(self):
        # sketches of data from the geometric-tail urn with theta* = 100
        hits = 0
        reps = 20
        for rep in range(reps):
            stream, _ = gen_pyp(np.random.default_rng(1000 + rep), 100.0, 0.0, 100_000)
            sk = sketch_of_stream(stream, 128, seed=rep)
            theta_grid = np.logspace(0, 4, 200)
            values = [dp_loglik_sketch(th, sk) for th in theta_grid]
            theta_hat = theta_grid[int(np.argmax(values))]
            hits += 50 <= theta_hat <= 200
        assert hits >= int(0.9 * reps)


class TestFitDp:
    def test_one_bucket_is_non_identifiable(self):
        sk = Sketch(HashFunction(1, 0, 1), [50], 50)
        with pytest.raises(NonIdentifiableError):
            fit_dp(sk)

    def test_deterministic(self):
        stream, _ = gen_pyp(np.random.default_rng(2), 10.0, 0.5, 5000)
        sk = sketch_of_stream(stream, 32)
        assert fit_dp(sk).params.theta == fit_dp(sk).params.theta

    def test_matches_dense_grid_argmax(self):
        stream, _ = gen_pyp(np.random.default_rng(3), 50.0, 0.0, 20_000)
        sk = sketch_of_stream(stream, 64)
        fitted = fit_dp(sk).params.theta
        grid = np.exp(np.linspace(math.log(fitted) - 0.5, math.log(fitted) + 0.5, 4001))
        values = [dp_loglik_sketch(th, sk) for th in grid]
        best = grid[int(np.argmax(values))]
        assert fitted == pytest.approx(best, rel=1e-3)


class TestNggpPrefixLoglik:
    def test_finite_over_parameter_sweep(self):
        rng = np.random.default_rng(5)
        prefix, _ = nggp_urn_sample(rng, 10.0, 0.4, 0.5, 500, return_stream=True)
        for theta in [0.1, 1.0, 31.6, 1000.0]:
            for alpha in [0.05, 0.35, 0.65, 0.95]:
                value = nggp_loglik_prefix(theta, alpha, prefix)
                assert math.isfinite(value)

    def test_single_observation_smoke(self):
        prefix = PrefixSample(counts=(1,), m=1)
        assert math.isfinite(nggp_loglik_prefix(3.0, 0.5, prefix))

    def test_domain(self):
        prefix = PrefixSample(counts=(1,), m=1)
        with pytest.raises(ValueError):
            nggp_loglik_prefix(-1.0, 0.5, prefix)
        with pytest.raises(ValueError):
            nggp_loglik_prefix(1.0, 1.0, prefix)

    def test_grid_argmax_recovers_alpha(self):
        # reduced-size version of the recovery envelope (the acceptance
        # suite runs the full 50-rep protocol)
        hits = 0
        reps = 8
        alphas = np.arange(0.1, 1.0, 0.1)
        thetas = np.logspace(0, 3, 7)
        for rep in range(reps):
            rng = np.random.default_rng(3000 + rep)
            prefix = nggp_urn_sample(rng, 100.0, 0.5, 0.5, 2000)
            best = max(
                ((nggp_loglik_prefix(th, a, prefix), a) for th in thetas for a in alphas),
                key=lambda t: t[0],
            )
            hits += abs(best[1] - 0.5) <= 0.1
        assert hits >= 6


class TestFitNggpPrefix:
    def test_requires_two_observations(self):
        with pytest.raises(ValueError):
            fit_nggp_prefix(PrefixSample(counts=(1,), m=1))

    def test_deterministic_and_near_grid_argmax(self):
        rng = np.random.default_rng(8)
        prefix = nggp_urn_sample(rng, 50.0, 0.6, 0.5, 1500)
        first = fit_nggp_prefix(prefix)
        second = fit_nggp_prefix(prefix)
        assert first.params == second.params
        assert first.converged
        # the optimum should beat a coarse grid everywhere
        grid_best = max(
            nggp_loglik_prefix(th, a, prefix)
            for th in np.logspace(-1, 3, 9)
            for a in np.arange(0.1, 1.0, 0.1)
        )
        assert first.objective >= grid_best - 1e-6

    def test_dp_like_data_pushes_alpha_down(self):
        hits = 0
        reps = 8
        for rep in range(reps):
            stream, _ = gen_pyp(np.random.default_rng(4000 + rep), 20.0, 0.0, 1500)
            prefix = PrefixSample.from_stream(stream.tolist())
            fit = fit_nggp_prefix(prefix)
            hits += fit.params.alpha < 0.2
        assert hits >= 6


class TestUrnSampler:
    def test_first_draw_is_new_symbol(self):
        prefix, stream = nggp_urn_sample(
            np.random.default_rng(0), 5.0, 0.5, 0.5, 1, return_stream=True
        )
        assert prefix.num_distinct == 1
        assert stream.tolist() == [0]

    def test_stream_and_counts_agree(self):
        prefix, stream = nggp_urn_sample(
            np.random.default_rng(1), 10.0, 0.3, 0.5, 400, return_stream=True
        )
        counts = np.bincount(stream)
        assert sorted(counts.tolist()) == sorted(prefix.counts)

    def test_power_law_growth_slope(self):
        checkpoints = np.array([100, 300, 1000, 3000, 10_000])
        totals = np.zeros(checkpoints.size)
        reps = 200
        for rep in range(reps):
            rng = np.random.default_rng(5000 + rep)
            _, stream = nggp_urn_sample(rng, 1.0, 0.7, 1.0, 10_000, return_stream=True)
            distinct_so_far = np.maximum.accumulate(stream) + 1
            totals += distinct_so_far[checkpoints - 1]
        mean_k = totals / reps
        slope = np.polyfit(np.log(checkpoints), np.log(mean_k), 1)[0]
        assert 0.55 <= slope <= 0.85

    def test_small_alpha_matches_dp_expectation(self):
        reps, m, theta = 200, 1000, 10.0
        total = 0
        for rep in range(reps):
            prefix = nggp_urn_sample(np.random.default_rng(6000 + rep), theta, 0.01, 1.0, m)
            total += prefix.num_distinct
        expected = theta * (sp.digamma(theta + m) - sp.digamma(theta))
        assert abs(total / reps - expected) / expected < 0.15

    def test_latent_log_density_is_concave(self):
        for i, k, theta, alpha, tau in [(10, 4, 5.0, 0.3, 0.5), (800, 100, 50.0, 0.7, 0.5)]:
            logpdf, _ = _make_latent_logpdf(i, k, theta, alpha, tau)
            grid = np.linspace(-15, 15, 301)
            values = np.array([logpdf(w) for w in grid])
            second = np.diff(values, 2)
            assert np.all(second <= 1e-8)


class TestAdaptiveRejection:
    def test_standard_normal_moments(self):
        rng = np.random.default_rng(7)
        logpdf = lambda x: -0.5 * x * x
        dlogpdf = lambda x: -x
        draws = np.array(
            [sample_log_concave(rng, logpdf, dlogpdf, -1.5, 2.0) for _ in range(20_000)]
        )
        assert abs(draws.mean()) < 0.025
        assert abs(draws.std() - 1.0) < 0.02
        # compare to scipy's normal through a KS test
        assert stats.kstest(draws, "norm").pvalue > 1e-4

    def test_skewed_gamma_like_density(self):
        # log-density of Gamma(3, 1) in log space: concave in x = log u
        rng = np.random.default_rng(8)
        logpdf = lambda x: 3.0 * x - math.exp(x)
        dlogpdf = lambda x: 3.0 - math.exp(x)
        lo, hi = _straddle(dlogpdf, 0.0)
        draws = np.array([sample_log_concave(rng, logpdf, dlogpdf, lo, hi) for _ in range(20_000)])
        u = np.exp(draws)
        assert stats.kstest(u, "gamma", args=(3.0,)).pvalue > 1e-4

    def test_grid_fallback_matches_ars(self):
        rng_a = np.random.default_rng(9)
        rng_b = np.random.default_rng(10)
        logpdf = lambda x: -0.5 * (x - 1.0) ** 2
        dlogpdf = lambda x: -(x - 1.0)
        ars = np.array([sample_log_concave(rng_a, logpdf, dlogpdf, -2.0, 4.0) for _ in range(8000)])
        grid = np.array([_grid_sample(rng_b, logpdf, -10.0, 12.0) for _ in range(8000)])
        assert stats.ks_2samp(ars, grid).pvalue > 1e-4


class TestWasserstein:
    def test_identical_vectors(self):
        assert wasserstein1_counts([3, 1, 2], [3, 1, 2]) == 0.0

    def test_sorted_difference_arithmetic(self):
        assert wasserstein1_counts([1, 3], [2, 2]) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            wasserstein1_counts([1, 2], [1, 2, 3])

    @given(
        st.lists(st.integers(0, 40), min_size=3, max_size=3),
        st.lists(st.integers(0, 40), min_size=3, max_size=3),
        st.lists(st.integers(0, 40), min_size=3, max_size=3),
    )
    @settings(max_examples=80, deadline=None)
    def test_metric_axioms(self, a, b, c):
        dab = wasserstein1_counts(a, b)
        dba = wasserstein1_counts(b, a)
        assert dab == pytest.approx(dba)
        assert dab >= 0
        assert wasserstein1_counts(a, c) <= dab + wasserstein1_counts(b, c) + 1e-9


class TestFitNggpMinWass:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(11)
        _, stream = nggp_urn_sample(rng, 50.0, 0.5, 0.5, 8000, return_stream=True)
        sk = sketch_of_stream(stream, 64)
        a = fit_nggp_minwass(sk, m=400, num_mc=3, seed=7, nm_maxiter=10)
        b = fit_nggp_minwass(sk, m=400, num_mc=3, seed=7, nm_maxiter=10)
        assert a.params == b.params
        assert a.seed == 7

    def test_validation(self):
        sk = sketch_of_stream(np.arange(100), 16)
        with pytest.raises(ValueError):
            fit_nggp_minwass(sk, m=101)
        with pytest.raises(ValueError):
            fit_nggp_minwass(sk, m=10, num_mc=0)

    def test_objective_prefers_generating_parameters(self):
        # median over repetitions: the generating (theta*, alpha*) scores
        # no worse than a strongly mis-specified alpha
        from skrecover.fitting import _to_unconstrained

        wins = 0
        reps = 9
        for rep in range(reps):
            rng = np.random.default_rng(7000 + rep)
            _, stream = nggp_urn_sample(rng, 50.0, 0.4, 0.5, 20_000, return_stream=True)
            sk = sketch_of_stream(stream, 64, seed=rep)
            # reuse the internal objective through public fits at fixed points
            from skrecover import fitting

            root = np.random.SeedSequence(rep)
            replica_seeds = root.spawn(5)
            hash_fns = []
            for child in replica_seeds:
                hash_rng = np.random.default_rng(child.spawn(1)[0])
                hash_fns.append(fitting.draw_hash(hash_rng, 64))

            def objective(theta, alpha):
                dist = 0.0
                for ridx in range(5):
                    urn_rng = np.random.default_rng(replica_seeds[ridx])
                    prefix, s = nggp_urn_sample(urn_rng, theta, alpha, 0.5, 2000, return_stream=True)
                    buckets = hash_fns[ridx].buckets_of(np.arange(prefix.num_distinct))
                    synth = np.bincount(buckets[s], minlength=64) * (sk.n / 2000)
                    dist += wasserstein1_counts(sk.counts.astype(float), synth)
                return dist / 5

            wins += objective(50.0, 0.4) <= objective(50.0, 0.8)
        assert wins >= (reps + 1) // 2
