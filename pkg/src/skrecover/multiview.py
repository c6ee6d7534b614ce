"""Combining per-view frequency distributions from multiple hash functions.

Each hash function gives the query its own bucket count and therefore its
own smoothed frequency distribution ("expert").  Two aggregation rules
are provided:

* product of experts: multiply the per-view pmfs pointwise on the shared
  support and renormalize (done in log space).  Views that disagree
  sharply can leave zero joint mass, which is reported as an error rather
  than papered over.
* minimum of experts: the law of the minimum of M independent draws, via
  the survival product 1 - prod_l (1 - F_l).  With degenerate point-mass
  experts this reduces exactly to the familiar minimum-count rule.

Experts may have different supports (their bucket counts differ); both
rules operate on the intersection {0, ..., min_l c_l}, which is where the
query's frequency must live anyway.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateAggregateError
from .sketch import MultiSketch
from .smoothing import (
    FreqDistribution,
    MonteCarloConfig,
    SmoothingParams,
    log_pmf_dp,
    pi_dp,
    pi_nggp,
)


def aggregate_poe(experts: Sequence[FreqDistribution]) -> FreqDistribution:
    """Product-of-experts aggregation on the common support."""
    if not experts:
        raise ValueError("need at least one expert")
    common = min(e.support_max for e in experts)
    with np.errstate(divide="ignore"):
        logs = sum(np.log(e.pmf[: common + 1]) for e in experts)
    peak = np.max(logs)
    if not np.isfinite(peak):
        raise DegenerateAggregateError("the experts share no support")
    pmf = np.exp(logs - peak)
    pmf /= pmf.sum()
    return FreqDistribution(pmf)


def aggregate_min(experts: Sequence[FreqDistribution]) -> FreqDistribution:
    """Distribution of the minimum of one independent draw per expert."""
    if not experts:
        raise ValueError("need at least one expert")
    common = min(e.support_max for e in experts)
    survival = np.ones(common + 1)
    for e in experts:
        survival *= 1.0 - e.cdf()[: common + 1]
    cdf = 1.0 - survival
    pmf = np.diff(cdf, prepend=0.0)
    pmf = np.clip(pmf, 0.0, None)
    return FreqDistribution(pmf / pmf.sum())


def dp_multihash_pmf(counts: Sequence[int], theta: float, width: int) -> FreqDistribution:
    """Joint smoothed law from M bucket counts under one shared theta.

    Equal to ``aggregate_poe`` applied to the per-view DP experts, but
    assembled directly from the log pmfs.
    """
    if not len(counts):
        raise ValueError("need at least one bucket count")
    common = min(int(c) for c in counts)
    logs = np.zeros(common + 1)
    for c in counts:
        logs += log_pmf_dp(int(c), theta, width)[: common + 1]
    peak = np.max(logs)
    if not np.isfinite(peak):
        raise DegenerateAggregateError("zero joint mass")
    pmf = np.exp(logs - peak)
    return FreqDistribution(pmf / pmf.sum())


@dataclass(frozen=True)
class MultiViewEstimate:
    point: float
    dist: FreqDistribution | None


def _per_view_params(params, num_views: int) -> list[SmoothingParams]:
    if isinstance(params, SmoothingParams):
        return [params] * num_views
    params = list(params)
    if len(params) != num_views:
        raise ValueError("need one SmoothingParams per view")
    return params


def estimate_freq_multiview(
    ms: MultiSketch,
    key,
    params=None,
    rule: str = "min",
    mc: MonteCarloConfig = MonteCarloConfig(),
) -> MultiViewEstimate:
    """Query a multi-row sketch and aggregate the per-view experts.

    ``params`` is a single ``SmoothingParams`` or one per view (ignored
    for rule="cms").  For power-law smoothing each view uses its own
    Monte Carlo seed derived from ``mc.seed``.
    """
    counts = ms.bucket_counts(key)
    if rule == "cms":
        return MultiViewEstimate(point=float(min(counts)), dist=None)
    if rule not in ("poe", "min"):
        raise ValueError(f"unknown aggregation rule {rule!r}")
    if params is None:
        raise ValueError("smoothed rules need smoothing parameters")
    per_view = _per_view_params(params, ms.num_hashes)
    experts = []
    for l, (c, p) in enumerate(zip(counts, per_view)):
        if p.kind == "dp":
            experts.append(pi_dp(c, p.theta, ms.width))
        else:
            view_mc = MonteCarloConfig(num_draws=mc.num_draws, seed=mc.seed + l)
            experts.append(pi_nggp(c, p, ms.width, view_mc))
    dist = aggregate_poe(experts) if rule == "poe" else aggregate_min(experts)
    return MultiViewEstimate(point=dist.mean(), dist=dist)
