import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skrecover.cardinality import (
    estimate_card_dp,
    estimate_card_nggp,
    eps_k_known_p,
    good_turing,
    occupancy_integrand,
)
from skrecover.hashing import HashFunction
from skrecover.oracle import DiscreteDist
from skrecover.sketch import Sketch
from skrecover.smoothing import MonteCarloConfig, SmoothingParams

from test_oracle import FixedHash


def sketch_from_counts(counts, seed=1):
    counts = np.asarray(counts)
    h = HashFunction(seed, 0, counts.size)
    return Sketch(h, counts, int(counts.sum()))


class TestDpCardinality:
    def test_single_item_closed_form(self):
        # psi(3) - psi(1) = 3/2, so the estimate is exactly 3/4
        sk = sketch_from_counts([1])
        assert estimate_card_dp(sk, 1.0).value == pytest.approx(0.75, abs=1e-12)

    def test_large_theta_limit(self):
        sk = sketch_from_counts([1])
        assert estimate_card_dp(sk, 1e6).value == pytest.approx(1.0, abs=1e-3)

    def test_range_with_single_hot_bucket(self):
        sk = sketch_from_counts([0, 0, 500, 0])
        est = estimate_card_dp(sk, 7.0)
        assert 0.0 < est.value <= 500

    def test_increasing_in_theta(self):
        sk = sketch_from_counts([40, 10, 0, 30, 20])
        values = [estimate_card_dp(sk, th).value for th in [0.5, 2, 8, 32, 128]]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_invariant_to_bucket_permutation(self):
        counts = np.array([5, 0, 17, 3])
        base = estimate_card_dp(sketch_from_counts(counts), 3.0).value
        for perm_seed in range(4):
            perm = np.random.default_rng(perm_seed).permutation(4)
            shuffled = estimate_card_dp(sketch_from_counts(counts[perm]), 3.0).value
            assert shuffled == pytest.approx(base, rel=1e-12)

    def test_empty_sketch_rejected(self):
        sk = sketch_from_counts([0, 0])
        with pytest.raises(ValueError):
            estimate_card_dp(sk, 1.0)


class TestNggpCardinality:
    def test_integrand_limit_at_zero(self):
        assert occupancy_integrand(np.array([1e-12]), 9)[0] == pytest.approx(10.0, abs=1e-6)

    def test_integrand_generic_values(self):
        v = np.array([0.25, 0.5, 0.99])
        expected = (1 - (1 - v) ** 10) / v
        np.testing.assert_allclose(occupancy_integrand(v, 9), expected, rtol=1e-12)

    def test_small_alpha_matches_dp(self):
        rng = np.random.default_rng(0)
        counts = np.bincount(rng.integers(0, 16, size=2000), minlength=16)
        sk = sketch_from_counts(counts)
        dp_value = estimate_card_dp(sk, 40.0).value
        ng = estimate_card_nggp(
            sk, SmoothingParams.nggp(40.0, 1e-4, 1.0), MonteCarloConfig(50_000, 5)
        )
        assert abs(ng.value - dp_value) < 3 * ng.mc_se + 1e-9

    def test_alpha_zero_aliases_to_dp(self):
        sk = sketch_from_counts([3, 1, 4])
        ng = estimate_card_nggp(sk, SmoothingParams.nggp(2.0, 0.0, 1.0))
        assert ng.method == "dp"
        assert ng.value == estimate_card_dp(sk, 2.0).value

    def test_invariant_to_bucket_permutation(self):
        counts = np.array([5, 0, 17, 3])
        params = SmoothingParams.nggp(3.0, 0.4, 0.5)
        mc = MonteCarloConfig(20_000, 9)
        base = estimate_card_nggp(sketch_from_counts(counts), params, mc).value
        perm = np.array([2, 0, 3, 1])
        other = estimate_card_nggp(sketch_from_counts(counts[perm]), params, mc).value
        assert other == pytest.approx(base, rel=1e-12)

    def test_seed_recorded(self):
        sk = sketch_from_counts([2, 2])
        est = estimate_card_nggp(sk, SmoothingParams.nggp(1.0, 0.5, 0.5), MonteCarloConfig(100, 42))
        assert est.mc_seed == 42


class TestKnownPReference:
    def test_uniform_two_symbols_single_bucket(self):
        dist = DiscreteDist.make(["a", "b"], [0.5, 0.5])
        h = FixedHash(1, {"a": 0, "b": 0})
        sk = Sketch(h, [1], 1)
        assert eps_k_known_p(dist, h, sk, "closed") == pytest.approx(0.75)

    def test_single_symbol(self):
        dist = DiscreteDist.make(["only"], [1.0])
        h = FixedHash(1, {"only": 0})
        sk = Sketch(h, [6], 6)
        assert eps_k_known_p(dist, h, sk, "closed") == pytest.approx(6 / 7)

    def test_closed_equals_series_on_random_instances(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            num_symbols = int(rng.integers(2, 7))
            width = int(rng.integers(1, 4))
            probs = rng.dirichlet(np.ones(num_symbols))
            table = {s: int(rng.integers(0, width)) for s in range(num_symbols)}
            dist = DiscreteDist.make(list(range(num_symbols)), probs)
            h = FixedHash(width, table)
            sample = rng.choice(num_symbols, size=12, p=probs)
            counts = np.bincount([table[int(s)] for s in sample], minlength=width)
            sk = Sketch(h, counts, 12)
            closed = eps_k_known_p(dist, h, sk, "closed")
            series = eps_k_known_p(dist, h, sk, "series")
            assert closed == pytest.approx(series, abs=1e-10)


class TestGoodTuring:
    def test_all_singletons(self):
        assert good_turing([5], 5, 0) == 1.0

    def test_r_equal_n_is_zero(self):
        assert good_turing([0, 0, 1], 3, 3) == 0.0

    def test_arithmetic_example(self):
        assert good_turing([2, 1, 0, 0], 4, 1) == pytest.approx(0.5)

    def test_inconsistent_vector_rejected(self):
        with pytest.raises(ValueError):
            good_turing([1, 1], 4, 0)  # accounts for 3 items, not 4

    @given(st.lists(st.integers(0, 6), min_size=1, max_size=6))
    @settings(max_examples=60, deadline=None)
    def test_probabilities_sum_to_coverage_identity(self, m):
        n = sum((i + 1) * v for i, v in enumerate(m))
        if n == 0:
            return
        total = sum(good_turing(m, n, r) for r in range(n + 1))
        # sum over r of (r+1) m_{r+1} / n telescopes to exactly 1
        assert total == pytest.approx(1.0, abs=1e-12)
