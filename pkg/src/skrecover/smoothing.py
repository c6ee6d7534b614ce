"""Single-view frequency recovery from one bucket count.

Given the count c of the bucket a query hashes to, the estimators here
return either a full distribution over the query's possible frequency
r in {0, ..., c} or its mean:

* ``pi_dp`` / ``estimate_freq_dp``: geometric-tail smoothing.  The
  distribution is Beta-Binomial(c, 1, theta/J) and the mean collapses to
  the linear shrink c * J / (theta + J).
* ``pi_nggp`` / ``estimate_freq_nggp``: power-law smoothing with
  parameters (theta, alpha, tau).  The distribution is a binomial mixed
  over the latent variable drawn by ``sample_v_nggp`` (Monte Carlo, seed
  recorded); the mean has a closed form through the exponential integral
  of index 1/alpha.
* ``estimate_freq_cms``: the raw count itself, the worst-case-optimal
  rule and the usual deterministic upper bound.

Passing alpha = 0 to a power-law entry point silently uses the matching
DP formula; the two families coincide there (with tau = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .specfun import DEFAULT_QUAD, QuadratureConfig, nggp_scale_b, sample_v_nggp, scaled_exp_integral

_PMF_TOL = 1e-9


@dataclass(frozen=True)
class SmoothingParams:
    """Smoothing family and its parameters, with fit provenance attached."""

    kind: str  # "dp" or "nggp"
    theta: float
    alpha: float | None = None
    tau: float | None = None
    provenance: str = "fixed"

    def __post_init__(self):
        if self.kind not in ("dp", "nggp"):
            raise ValueError(f"unknown smoothing kind {self.kind!r}")
        if self.theta <= 0:
            raise ValueError("theta must be > 0")
        if self.kind == "dp":
            if self.alpha is not None or self.tau is not None:
                raise ValueError("dp smoothing takes no alpha or tau")
        else:
            if self.alpha is None or not 0 <= self.alpha < 1:
                raise ValueError("nggp smoothing needs alpha in [0, 1)")
            if self.tau is None or self.tau <= 0:
                raise ValueError("nggp smoothing needs tau > 0")

    @classmethod
    def dp(cls, theta: float, provenance: str = "fixed") -> "SmoothingParams":
        return cls(kind="dp", theta=theta, provenance=provenance)

    @classmethod
    def nggp(cls, theta: float, alpha: float, tau: float, provenance: str = "fixed") -> "SmoothingParams":
        return cls(kind="nggp", theta=theta, alpha=alpha, tau=tau, provenance=provenance)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "theta": self.theta, "provenance": self.provenance}
        if self.kind == "nggp":
            out["alpha"] = self.alpha
            out["tau"] = self.tau
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SmoothingParams":
        kind = d["kind"]
        if kind == "dp":
            return cls.dp(float(d["theta"]), d.get("provenance", "fixed"))
        return cls.nggp(
            float(d["theta"]), float(d["alpha"]), float(d["tau"]), d.get("provenance", "fixed")
        )


@dataclass(frozen=True)
class MonteCarloConfig:
    num_draws: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.num_draws < 1:
            raise ValueError("num_draws must be >= 1")


class FreqDistribution:
    """A probability mass function over frequencies {0, ..., support_max}."""

    __slots__ = ("pmf", "mc_seed", "_cdf")

    def __init__(self, pmf, mc_seed: int | None = None, _validate: bool = True):
        pmf = np.asarray(pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise ValueError("pmf must be a nonempty 1-d array")
        if _validate:
            if np.any(pmf < -1e-15):
                raise ValueError("pmf has negative entries")
            total = pmf.sum()
            if abs(total - 1.0) > _PMF_TOL:
                raise ValueError(f"pmf sums to {total}, not 1")
        self.pmf = pmf
        self.mc_seed = mc_seed
        self._cdf = None

    @classmethod
    def point_mass(cls, r: int) -> "FreqDistribution":
        pmf = np.zeros(r + 1)
        pmf[r] = 1.0
        return cls(pmf, _validate=False)

    @property
    def support_max(self) -> int:
        return self.pmf.size - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(self.pmf.size), self.pmf))

    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            self._cdf = np.cumsum(self.pmf)
        return self._cdf

    def quantile(self, p: float) -> int:
        """Smallest r with CDF(r) >= p."""
        if not 0 < p <= 1:
            raise ValueError("quantile level must be in (0, 1]")
        idx = int(np.searchsorted(self.cdf(), p - 1e-12, side="left"))
        return min(idx, self.support_max)

    def __len__(self):
        return self.pmf.size

    def __repr__(self):
        return f"FreqDistribution(support_max={self.support_max}, mean={self.mean():.4g})"


def total_variation(a: FreqDistribution, b: FreqDistribution) -> float:
    """TV distance between two frequency distributions (supports padded)."""
    size = max(len(a), len(b))
    pa = np.zeros(size)
    pb = np.zeros(size)
    pa[: len(a)] = a.pmf
    pb[: len(b)] = b.pmf
    return 0.5 * float(np.abs(pa - pb).sum())


def pmf_dp(c: int, theta: float, width: int) -> np.ndarray:
    """Beta-Binomial(c, 1, theta/J) masses over r = 0..c.

    Evaluated by the exact ratio recurrence
        pmf(0) = a / (a + c),   pmf(r+1) = pmf(r) * (c-r) / (c-r-1+a)
    with a = theta/J, which keeps the relative error near machine epsilon
    even for counts in the tens of thousands (the gammaln form loses
    digits to cancellation there).
    """
    if c < 0:
        raise ValueError("bucket count must be >= 0")
    if theta <= 0 or width < 1:
        raise ValueError("theta must be > 0 and width >= 1")
    a = theta / width
    if c == 0:
        return np.array([1.0])
    pmf = np.empty(c + 1)
    pmf[0] = a / (a + c)
    remaining = c - np.arange(c, dtype=float)
    pmf[1:] = pmf[0] * np.cumprod(remaining / (remaining - 1.0 + a))
    return pmf


def log_pmf_dp(c: int, theta: float, width: int) -> np.ndarray:
    """Log of ``pmf_dp``; deep-tail underflow maps to -inf."""
    with np.errstate(divide="ignore"):
        return np.log(pmf_dp(c, theta, width))


def pi_dp(c: int, theta: float, width: int) -> FreqDistribution:
    """Smoothed frequency distribution for one bucket under DP smoothing."""
    return FreqDistribution(pmf_dp(c, theta, width))


def pi_nggp(
    c: int,
    params: SmoothingParams,
    width: int,
    mc: MonteCarloConfig = MonteCarloConfig(),
) -> FreqDistribution:
    """Monte Carlo estimate of the power-law smoothed frequency distribution.

    Averages Binomial(r; c, v_k) rows over num_draws draws of the mixing
    variable; the seed used is recorded on the returned distribution.
    """
    if params.kind == "nggp" and params.alpha == 0:
        params = SmoothingParams.dp(params.theta, params.provenance)
    if params.kind == "dp":
        return pi_dp(c, params.theta, width)
    if c < 0:
        raise ValueError("bucket count must be >= 0")
    if c == 0:
        return FreqDistribution.point_mass(0)
    rng = np.random.default_rng(mc.seed)
    draws = sample_v_nggp(rng, params.theta, params.alpha, params.tau, width, size=mc.num_draws)
    pmf = averaged_binomial_pmf(c, draws)
    return FreqDistribution(pmf, mc_seed=mc.seed)


def averaged_binomial_pmf(c: int, probs: np.ndarray) -> np.ndarray:
    """Mean of Binomial(c, v) pmfs over the draws v, chunked to bound memory."""
    r = np.arange(c + 1)
    log_binom = sp.gammaln(c + 1) - sp.gammaln(r + 1) - sp.gammaln(c - r + 1)
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, 1.0)
    total = np.zeros(c + 1)
    chunk = max(1, 10_000_000 // (c + 1))
    for start in range(0, probs.size, chunk):
        v = probs[start : start + chunk, None]
        # exact rows at the endpoints; log-space elsewhere
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = log_binom[None, :] + r[None, :] * np.log(v) + (c - r)[None, :] * np.log1p(-v)
        rows = np.exp(logs)
        interior_0 = v[:, 0] == 0.0
        interior_1 = v[:, 0] == 1.0
        if interior_0.any():
            rows[interior_0] = 0.0
            rows[interior_0, 0] = 1.0
        if interior_1.any():
            rows[interior_1] = 0.0
            rows[interior_1, c] = 1.0
        total += rows.sum(axis=0)
    return total / probs.size


def nggp_shrink_factor(
    theta: float,
    alpha: float,
    tau: float,
    width: int,
    config: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """The multiplier (1-alpha) * (1 - b e^b E_{1/alpha}(b)) applied to a count."""
    b = nggp_scale_b(theta, alpha, tau, width)
    factor = (1.0 - alpha) * (1.0 - b * scaled_exp_integral(1.0 / alpha, b, config))
    return min(max(factor, 0.0), 1.0)


def estimate_freq_dp(c: int, theta: float, width: int) -> float:
    """Posterior-mean style point estimate c * J / (theta + J)."""
    if c < 0:
        raise ValueError("bucket count must be >= 0")
    if theta <= 0 or width < 1:
        raise ValueError("theta must be > 0 and width >= 1")
    return c * width / (theta + width)


def estimate_freq_nggp(
    c: int,
    params: SmoothingParams,
    width: int,
    config: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Closed-form point estimate under power-law smoothing, clamped to [0, c]."""
    if c < 0:
        raise ValueError("bucket count must be >= 0")
    if params.kind == "dp" or params.alpha == 0:
        return estimate_freq_dp(c, params.theta, width)
    return c * nggp_shrink_factor(params.theta, params.alpha, params.tau, width, config)


def estimate_freq_cms(c: int) -> int:
    """Worst-case rule for a single view: report the bucket count itself."""
    if c < 0:
        raise ValueError("bucket count must be >= 0")
    return c
