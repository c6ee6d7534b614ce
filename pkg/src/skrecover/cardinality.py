"""Distinct-symbol count recovery from a single-view sketch.

The estimators approximate the conditional expectation of the number of
distinct symbols given the bucket counts, with the unknown bucket masses
q_j replaced by their maximum-likelihood plug-in c_j / n.  Empty buckets
therefore contribute nothing.

Under geometric-tail smoothing the per-bucket term has a digamma closed
form; under power-law smoothing it is a one-dimensional integral over the
mixing variable, estimated by Monte Carlo with one shared set of draws
reused across all buckets (reusing draws lowers the variance of the sum).

``eps_k_known_p`` is the known-P reference quantity the smoothed
estimators average, exposed in both of its algebraically equal forms so
tests can cross-check them.  ``good_turing`` is the classical coverage
estimate (r+1) m_{r+1} / n the derivation rests on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hashing import HashFunction
from .oracle import DiscreteDist
from .sketch import Sketch
from .smoothing import MonteCarloConfig, SmoothingParams
from .specfun import digamma, sample_v_nggp


@dataclass(frozen=True)
class CardinalityEstimate:
    value: float
    method: str  # "dp" or "nggp"
    params: SmoothingParams
    mc_seed: int | None = None
    mc_se: float | None = None
    clamped: bool = False


def _clamp(value: float, n: int) -> tuple[float, bool]:
    if 0.0 <= value <= n:
        return value, False
    return min(max(value, 0.0), float(n)), True


def estimate_card_dp(sketch: Sketch, theta: float) -> CardinalityEstimate:
    """Distinct-count estimate under geometric-tail smoothing.

    n * (theta/J) * sum_j q_hat_j / (1 + c_j) * (psi(1 + c_j + theta/J) - psi(theta/J))
    with q_hat_j = c_j / n.
    """
    if sketch.n < 1:
        raise ValueError("the sketch must contain at least one item")
    if theta <= 0:
        raise ValueError("theta must be > 0")
    counts = sketch.counts.astype(float)
    n = sketch.n
    a = theta / sketch.width
    nonzero = counts > 0
    c = counts[nonzero]
    psi_gap = digamma(1.0 + c + a) - digamma(a)
    value = float(np.sum((c / n) / (1.0 + c) * a * psi_gap)) * n
    value, clamped = _clamp(value, n)
    return CardinalityEstimate(
        value=value, method="dp", params=SmoothingParams.dp(theta), clamped=clamped
    )


def occupancy_integrand(v: np.ndarray, c: int) -> np.ndarray:
    """(1 - (1-v)^(c+1)) / v with its limit c+1 at v = 0."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    small = v < 1e-12
    out[small] = c + 1.0
    vs = v[~small]
    out[~small] = -np.expm1((c + 1) * np.log1p(-vs)) / vs
    return out


def estimate_card_nggp(
    sketch: Sketch,
    params: SmoothingParams,
    mc: MonteCarloConfig = MonteCarloConfig(),
) -> CardinalityEstimate:
    """Distinct-count estimate under power-law smoothing (Monte Carlo).

    One set of draws of the mixing variable is shared by every bucket's
    integral.  The reported ``mc_se`` is the standard error of the Monte
    Carlo average of the full J-bucket sum.
    """
    if sketch.n < 1:
        raise ValueError("the sketch must contain at least one item")
    if params.kind == "nggp" and params.alpha == 0:
        params = SmoothingParams.dp(params.theta, params.provenance)
    if params.kind == "dp":
        return estimate_card_dp(sketch, params.theta)
    rng = np.random.default_rng(mc.seed)
    draws = sample_v_nggp(
        rng, params.theta, params.alpha, params.tau, sketch.width, size=mc.num_draws
    )
    counts = sketch.counts.astype(float)
    n = sketch.n
    nonzero = np.nonzero(counts)[0]
    per_draw = np.zeros(mc.num_draws)
    for j in nonzero:
        c = int(counts[j])
        weight = (counts[j] / n) / (1.0 + counts[j])
        per_draw += weight * occupancy_integrand(draws, c)
    per_draw *= n
    value = float(per_draw.mean())
    se = float(per_draw.std(ddof=1) / np.sqrt(mc.num_draws)) if mc.num_draws > 1 else 0.0
    value, clamped = _clamp(value, n)
    return CardinalityEstimate(
        value=value,
        method="nggp",
        params=params,
        mc_seed=mc.seed,
        mc_se=se,
        clamped=clamped,
    )


def eps_k_known_p(
    dist: DiscreteDist,
    hash_fn: HashFunction,
    sketch: Sketch,
    form: str = "closed",
) -> float:
    """Conditional expected distinct count when P is known exactly.

    ``form="closed"`` evaluates
        n * sum_j q_j/(c_j+1) * sum_{s in j} (1 - (1 - p_s/q_j)^(c_j+1))
    and ``form="series"`` the equal representation
        n * sum_j q_j * sum_r pi_j(r; P) / (r+1).
    """
    from .oracle import bucket_masses, pi_known_p

    if form not in ("closed", "series"):
        raise ValueError("form must be 'closed' or 'series'")
    n = sketch.n
    counts = sketch.counts
    q = bucket_masses(dist, hash_fn)
    if np.any((q == 0) & (counts > 0)):
        raise ValueError("a bucket with zero mass under P holds a positive count")
    total = 0.0
    for j in range(sketch.width):
        if q[j] == 0:
            continue
        c = int(counts[j])
        if form == "closed":
            inner = 0.0
            for s, p in zip(dist.symbols, dist.probs):
                if hash_fn.bucket_of(s) != j or p == 0:
                    continue
                inner += -np.expm1((c + 1) * np.log1p(-p / q[j])) if p < q[j] else 1.0
            total += q[j] / (c + 1) * inner
        else:
            pmf = pi_known_p(dist, hash_fn, c, j).pmf
            r = np.arange(c + 1)
            total += q[j] * float(np.sum(pmf / (r + 1)))
    return n * total


def good_turing(freq_of_freq, n: int, r: int) -> float:
    """Probability that the next draw is a symbol seen exactly r times.

    ``freq_of_freq[i]`` is the number of distinct symbols with frequency
    i+1; the estimate is (r+1) * m_{r+1} / n, with m_{n+1} = 0.
    """
    m = np.asarray(freq_of_freq, dtype=float)
    if n < 1:
        raise ValueError("n must be >= 1")
    if r < 0 or r > n:
        raise ValueError("r must lie in [0, n]")
    weighted = float(np.dot(np.arange(1, m.size + 1), m))
    if weighted != n:
        raise ValueError(f"frequency-of-frequencies vector accounts for {weighted} of {n} items")
    if r >= m.size:
        return 0.0
    return (r + 1) * float(m[r]) / n
