import io
import math

import numpy as np
import pytest

from skrecover.datagen import PrefixRetainer, gen_pyp
from skrecover.intervals import (
    CalibrationSet,
    conformal_calibrate,
    conformal_interval,
    smoothed_interval,
)
from skrecover.fitting import fit_dp
from skrecover.sketch import MultiSketch
from skrecover.smoothing import FreqDistribution, estimate_freq_dp, pi_dp


class TestSmoothedInterval:
    def test_point_mass(self):
        assert smoothed_interval(FreqDistribution.point_mass(5), 0.9) == (5, 5)

    def test_discrete_uniform(self):
        d = FreqDistribution([0.1] * 10)
        assert smoothed_interval(d, 0.9) == (0, 9)

    def test_lo_never_exceeds_hi_and_widens_with_level(self):
        d = pi_dp(40, 3.0, 8)
        widths = []
        for level in (0.5, 0.8, 0.9, 0.99):
            lo, hi = smoothed_interval(d, level)
            assert lo <= hi
            widths.append(hi - lo)
        assert all(a <= b for a, b in zip(widths, widths[1:]))

    def test_level_domain(self):
        with pytest.raises(ValueError):
            smoothed_interval(FreqDistribution.point_mass(1), 1.0)


class TestCalibration:
    def test_zero_residuals_collapse_interval(self):
        cal = CalibrationSet.from_pairs([(k, 5) for k in range(20)], level=0.9)
        adj = conformal_calibrate(cal, lambda key: 5.0)
        assert adj.q_lo == adj.q_hi == 0.0
        assert conformal_interval(adj, 5.0, cms_cap=100) == (5, 5)

    def test_documented_quantile_convention(self):
        # residuals {-1, 0, 1} at level 2/3: indices clip to the extremes
        cal = CalibrationSet.from_pairs([("a", 1), ("b", 0), ("c", -1)], level=2 / 3)
        adj = conformal_calibrate(cal, lambda key: 0.0)
        assert adj.q_lo == -1.0
        assert adj.q_hi == 1.0

    def test_too_few_points_rejected(self):
        cal = CalibrationSet.from_pairs([("a", 1)], level=0.99)
        with pytest.raises(ValueError):
            conformal_calibrate(cal, lambda key: 0.0)

    def test_interval_clipping(self):
        cal = CalibrationSet.from_pairs([(k, 0) for k in range(30)], level=0.8)
        adj = conformal_calibrate(cal, lambda key: 10.0)  # residuals all +10
        lo, hi = conformal_interval(adj, 3.0, cms_cap=5)
        assert 0 <= lo <= hi <= 5

    def test_csv_round_trip(self):
        cal = CalibrationSet.from_pairs([(123, 4), (456, 7)], level=0.9)
        buf = io.StringIO()
        cal.write_csv(buf)
        buf.seek(0)
        back = CalibrationSet.read_csv(buf, level=0.9)
        assert [f for _, f in back.pairs] == [4, 7]


class TestCoverage:
    def test_marginal_coverage_on_synthetic_stream(self):
        # split-conformal coverage on exchangeable data: calibrate on the
        # retained prefix, evaluate on fresh queries from the same process
        level = 0.9
        reps = 6
        n, m_cal, n_test = 20_000, 600, 200
        covered = 0
        total = 0
        for rep in range(reps):
            rng = np.random.default_rng(900 + rep)
            stream, _ = gen_pyp(rng, 100.0, 0.25, n + n_test)
            body, queries = stream[:n], stream[n:]
            ms = MultiSketch.from_master_seed(rep, 2, 64)
            ms.add_many(body)
            retainer = PrefixRetainer(m_cal)
            retainer.consume(body)
            theta = fit_dp(ms.rows[0]).params.theta

            def estimator(key):
                counts = ms.bucket_counts(key)
                per_view = [estimate_freq_dp(c, theta, 64) for c in counts]
                return min(per_view)

            cal = CalibrationSet.from_pairs(retainer.retained_pairs(), level)
            adj = conformal_calibrate(cal, estimator)
            truth = np.bincount(body)
            for q in queries:
                f = int(truth[q]) if q < truth.size else 0
                cap = min(ms.bucket_counts(int(q)))
                lo, hi = conformal_interval(adj, estimator(int(q)), cap)
                covered += lo <= f <= hi
                total += 1
        coverage = covered / total
        sigma = math.sqrt(level * (1 - level) / total)
        assert coverage >= level - 3 * sigma
