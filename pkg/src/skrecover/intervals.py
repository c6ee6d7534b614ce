"""Prediction intervals for frequency estimates.

``smoothed_interval`` reads equal-tail quantiles straight off a smoothed
or aggregated frequency distribution.  Those intervals are only as
calibrated as the smoothing assumption, so ``conformal_calibrate`` offers
a split-conformal alternative: signed residuals (estimate minus truth)
are collected on a retained calibration set, and their empirical
quantiles shift the point estimate into an interval with finite-sample
marginal coverage under exchangeability.

Quantile convention: with m residuals and miscoverage beta = 1 - level,
the upper correction is the ceil((m+1)(1 - beta/2))-th smallest residual
and the lower one the floor((m+1) beta/2)-th, both indices clipped to
[1, m].  The +1 is the usual finite-sample correction; clipping keeps
tiny calibration sets usable at the cost of the exact guarantee there.
Intervals are rounded outward to integers and clipped to [0, cms_cap],
since the true frequency is an integer no larger than the raw count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .smoothing import FreqDistribution


def smoothed_interval(dist: FreqDistribution, level: float) -> tuple[int, int]:
    """Central interval [q_(1-level)/2, q_1-(1-level)/2] of a frequency pmf."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    beta = 1.0 - level
    lo = dist.quantile(beta / 2.0)
    hi = dist.quantile(1.0 - beta / 2.0)
    return lo, hi


@dataclass(frozen=True)
class CalibrationSet:
    """Retained (key, exact frequency) pairs plus the target coverage level."""

    pairs: tuple
    level: float

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("calibration set is empty")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple], level: float) -> "CalibrationSet":
        return cls(tuple((k, int(f)) for k, f in pairs), level)

    def write_csv(self, fh) -> None:
        from .hashing import key_to_u64

        writer = csv.writer(fh)
        writer.writerow(["key_hash64", "true_count"])
        for key, count in self.pairs:
            writer.writerow([key_to_u64(key), count])

    @classmethod
    def read_csv(cls, fh, level: float) -> "CalibrationSet":
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["key_hash64", "true_count"]:
            raise ValueError("unexpected calibration CSV header")
        pairs = [(int(row[0]), int(row[1])) for row in reader]
        return cls.from_pairs(pairs, level)


@dataclass(frozen=True)
class ConformalAdjuster:
    q_lo: float
    q_hi: float
    level: float
    num_points: int


def conformal_calibrate(cal: CalibrationSet, estimator: Callable) -> ConformalAdjuster:
    """Empirical residual quantiles of a point estimator on the calibration set."""
    m = len(cal.pairs)
    beta = 1.0 - cal.level
    if m < 1.0 / beta - 1.0:
        raise ValueError(f"{m} calibration points are too few for level {cal.level}")
    residuals = np.sort([estimator(key) - f for key, f in cal.pairs])
    hi_idx = min(m, math.ceil((m + 1) * (1.0 - beta / 2.0)))
    lo_idx = max(1, math.floor((m + 1) * (beta / 2.0)))
    return ConformalAdjuster(
        q_lo=float(residuals[lo_idx - 1]),
        q_hi=float(residuals[hi_idx - 1]),
        level=cal.level,
        num_points=m,
    )


def conformal_interval(adj: ConformalAdjuster, point: float, cms_cap: int) -> tuple[int, int]:
    """Shift the point estimate by the calibrated residual quantiles.

    Returns [max(0, floor(point - q_hi)), min(cms_cap, ceil(point - q_lo))].
    """
    cap = int(cms_cap)
    lo = min(max(math.floor(point - adj.q_hi), 0), cap)
    hi = min(max(math.ceil(point - adj.q_lo), 0), cap)
    return lo, hi
