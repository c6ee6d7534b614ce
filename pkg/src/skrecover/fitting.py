"""Fitting the smoothing parameters from data.

Three routes are provided:

* ``fit_dp``: the bucket counts follow a Dirichlet-multinomial law under
  geometric-tail smoothing, so theta has an exact marginal likelihood
  (``dp_loglik_sketch``) maximized by bounded 1-d search over log theta.
* ``fit_nggp_prefix``: when the first m raw observations were retained,
  the power-law parameters (theta, alpha) are fit by maximizing the
  marginal likelihood of that prefix (``nggp_loglik_prefix``), with tau
  pinned at 1/2 because rescaling the underlying measure trades theta
  against tau and leaves the law unchanged.
* ``fit_nggp_minwass``: sketch-only fitting.  Synthetic prefixes are drawn
  from the urn scheme at candidate parameters, hashed with fresh hash
  functions, scaled up by n/m, and compared to the observed counts by the
  1-Wasserstein distance between sorted count vectors; the average
  distance is minimized by a coarse grid followed by Nelder-Mead.

``nggp_urn_sample`` generates a stream sequentially: each step draws a
latent variable (whose log has a log-concave density, sampled by adaptive
rejection with a grid inverse-CDF fallback) and then picks an old or new
symbol.  The old-symbol weights (count - alpha) are decomposed as
(count - 1) copies of weight 1 plus one weight (1 - alpha), which allows
O(1) selection per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy import special as sp

from .errors import NonIdentifiableError, NumericError
from .hashing import draw_hash
from .sketch import Sketch
from .smoothing import SmoothingParams
from .specfun import DEFAULT_QUAD, QuadratureConfig


@dataclass(frozen=True)
class FitResult:
    params: SmoothingParams
    objective: float
    method: str
    iterations: int
    converged: bool
    seed: int | None = None

    def to_dict(self) -> dict:
        out = self.params.to_dict()
        out.update(
            objective=self.objective,
            method=self.method,
            iterations=self.iterations,
            converged=self.converged,
            seed=self.seed,
        )
        return out


@dataclass(frozen=True)
class PrefixSample:
    """Multiplicities of the distinct values among the first m observations."""

    counts: tuple
    m: int

    def __post_init__(self):
        if any(c < 1 for c in self.counts):
            raise ValueError("multiplicities must be >= 1")
        if sum(self.counts) != self.m:
            raise ValueError("multiplicities must sum to the prefix length")

    @classmethod
    def from_stream(cls, keys) -> "PrefixSample":
        seen: dict = {}
        for k in keys:
            seen[k] = seen.get(k, 0) + 1
        counts = tuple(seen.values())
        return cls(counts=counts, m=sum(counts))

    @property
    def num_distinct(self) -> int:
        return len(self.counts)


# ---------------------------------------------------------------------------
# Dirichlet-process fitting from the sketch


def dp_loglik_sketch(theta: float, sketch: Sketch) -> float:
    """Marginal log-likelihood of the bucket counts, up to a constant in theta.

    log G(theta) - log G(theta + n) - J log G(theta/J) + sum_j log G(theta/J + c_j)
    """
    if theta <= 0:
        raise ValueError("theta must be > 0")
    n, j = sketch.n, sketch.width
    a = theta / j
    counts = sketch.counts.astype(float)
    return float(
        sp.gammaln(theta)
        - sp.gammaln(theta + n)
        - j * sp.gammaln(a)
        + np.sum(sp.gammaln(a + counts))
    )


_DP_LOG_BOUNDS = (-10.0, 20.0)


def fit_dp(sketch: Sketch) -> FitResult:
    """Maximize ``dp_loglik_sketch`` over log theta; deterministic."""
    if sketch.n < 1:
        raise ValueError("the sketch must contain at least one item")
    if sketch.width == 1:
        raise NonIdentifiableError("with one bucket the likelihood does not depend on theta")
    res = optimize.minimize_scalar(
        lambda x: -dp_loglik_sketch(math.exp(x), sketch),
        bounds=_DP_LOG_BOUNDS,
        method="bounded",
        options={"xatol": 1e-10},
    )
    theta = math.exp(res.x)
    return FitResult(
        params=SmoothingParams.dp(theta, provenance="fitted(dp-mle)"),
        objective=-float(res.fun),
        method="dp-mle",
        iterations=int(res.nfev),
        converged=bool(res.success),
    )


# ---------------------------------------------------------------------------
# NGGP prefix likelihood


def _log_latent_integral(
    m: int, k: int, theta: float, alpha: float, tau: float, config: QuadratureConfig
) -> float:
    """log integral over w of u^m exp(-(theta/alpha)((tau+u)^a - tau^a)) (tau+u)^(-m+k a), u = e^w.

    The log-integrand is the urn's latent log-density at step i = m, so it
    is concave with a single mode; the mode is located by root-finding on
    the analytic derivative and subtracted before quadrature.
    """
    logpdf, dlogpdf = _make_latent_logpdf(m, k, theta, alpha, tau)
    lo0, hi0 = _straddle(dlogpdf, 0.0, 8.0)
    w_star = float(optimize.brentq(dlogpdf, lo0, hi0, xtol=1e-10))
    g_star = logpdf(w_star)
    if not math.isfinite(g_star):
        raise NumericError(f"latent mode not finite at theta={theta}, alpha={alpha}")

    def expand(direction: float) -> float:
        step = 1.0
        w = w_star + direction * step
        for _ in range(80):
            if logpdf(w) < g_star - 60.0:
                return w
            step *= 2.0
            w = w_star + direction * step
        raise NumericError("could not bracket the latent integral")

    lo, hi = expand(-1.0), expand(1.0)
    value, err = integrate.quad(
        lambda w: math.exp(min(logpdf(w) - g_star, 50.0)),
        lo,
        hi,
        epsabs=config.abs_tol,
        epsrel=config.rel_tol,
        limit=config.max_subdivisions,
    )
    if value <= 0 or err > max(config.abs_tol, 100 * config.rel_tol * value):
        raise NumericError(
            f"latent integral failed at theta={theta}, alpha={alpha}: value={value}, err={err}"
        )
    return g_star + math.log(value)


def nggp_loglik_prefix(
    theta: float,
    alpha: float,
    prefix: PrefixSample,
    tau: float = 0.5,
    config: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Marginal log-likelihood of a retained prefix, up to a parameter-free constant.

    k log theta + sum_j [log G(n_j - alpha) - log G(1 - alpha)] + log I(theta, alpha)
    where I is the latent integral; the exp((theta/alpha) tau^alpha) factor
    of the usual form is folded into I for stability.
    """
    if theta <= 0:
        raise ValueError("theta must be > 0")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if tau <= 0:
        raise ValueError("tau must be > 0")
    counts = np.asarray(prefix.counts, dtype=float)
    k, m = prefix.num_distinct, prefix.m
    pochhammer = float(np.sum(sp.gammaln(counts - alpha)) - k * sp.gammaln(1.0 - alpha))
    return k * math.log(theta) + pochhammer + _log_latent_integral(m, k, theta, alpha, tau, config)


_ANCHOR_THETAS = (0.1, 1.0, 10.0, 100.0, 1000.0)
_ANCHOR_ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)


def _to_unconstrained(theta: float, alpha: float) -> np.ndarray:
    return np.array([math.log(theta), math.log(alpha / (1.0 - alpha))])


def _from_unconstrained(x) -> tuple[float, float]:
    theta = math.exp(min(max(x[0], -25.0), 25.0))
    alpha = 1.0 / (1.0 + math.exp(-x[1]))
    alpha = min(max(alpha, 1e-6), 1.0 - 1e-6)
    return theta, alpha


def fit_nggp_prefix(
    prefix: PrefixSample,
    tau: float = 0.5,
    restarts: int = 5,
    config: QuadratureConfig = DEFAULT_QUAD,
) -> FitResult:
    """Maximize the prefix likelihood over (log theta, logit alpha), tau fixed.

    Derivative-free Nelder-Mead from the ``restarts`` best anchors of a
    coarse grid; the quadrature-backed objective has no usable gradient.
    """
    if prefix.m < 2:
        raise ValueError("need a prefix of at least two observations")

    def neg_loglik(x) -> float:
        theta, alpha = _from_unconstrained(x)
        try:
            return -nggp_loglik_prefix(theta, alpha, prefix, tau, config)
        except NumericError:
            return math.inf

    anchors = []
    for theta in _ANCHOR_THETAS:
        for alpha in _ANCHOR_ALPHAS:
            x = _to_unconstrained(theta, alpha)
            anchors.append((neg_loglik(x), tuple(x)))
    anchors.sort(key=lambda t: t[0])

    best = None
    iterations = 0
    any_success = False
    for _, start in anchors[: max(1, restarts)]:
        res = optimize.minimize(
            neg_loglik,
            np.asarray(start),
            method="Nelder-Mead",
            options={"xatol": 1e-3, "fatol": 1e-6, "maxiter": 200},
        )
        iterations += int(res.nit)
        any_success = any_success or bool(res.success)
        if math.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None or not math.isfinite(best.fun):
        raise NumericError("all restarts of the prefix fit failed")
    theta, alpha = _from_unconstrained(best.x)
    return FitResult(
        params=SmoothingParams.nggp(theta, alpha, tau, provenance="fitted(nggp-prefix-mle)"),
        objective=-float(best.fun),
        method="nggp-prefix-mle",
        iterations=iterations,
        converged=any_success,
    )


# ---------------------------------------------------------------------------
# Adaptive rejection sampling for the urn's latent variable


class _ArsFailure(Exception):
    pass


def sample_log_concave(rng, logpdf, dlogpdf, lo: float, hi: float, max_rejections: int = 60) -> float:
    """One draw from an (unnormalized) log-concave density by adaptive rejection.

    ``lo`` and ``hi`` must straddle the mode: dlogpdf(lo) > 0 > dlogpdf(hi).
    Tangents at the current abscissae form a piecewise-linear upper hull;
    a candidate is drawn from the corresponding piecewise-exponential
    envelope and accepted with probability exp(logpdf - hull).  Each
    rejection inserts the rejected point, tightening the hull.
    """
    xs = [lo, hi]
    hs = [logpdf(lo), logpdf(hi)]
    dhs = [dlogpdf(lo), dlogpdf(hi)]
    if not (dhs[0] > 0.0 > dhs[-1]):
        raise _ArsFailure("initial points do not straddle the mode")

    for _ in range(max_rejections):
        # tangent intersections
        zs = []
        for i in range(len(xs) - 1):
            denom = dhs[i] - dhs[i + 1]
            if denom <= 0:
                raise _ArsFailure("non-concave tangent slopes")
            z = (hs[i + 1] - hs[i] + xs[i] * dhs[i] - xs[i + 1] * dhs[i + 1]) / denom
            zs.append(z)

        # log segment masses under the exponential hull (overflow-safe)
        log_masses = []
        for i in range(len(xs)):
            zl = zs[i - 1] if i > 0 else None
            zr = zs[i] if i < len(zs) else None
            d = dhs[i]
            if zl is None:
                # leftmost: (-inf, zr], d > 0
                lm = hs[i] + d * (zr - xs[i]) - math.log(d)
            elif zr is None:
                # rightmost: [zl, inf), d < 0
                lm = hs[i] + d * (zl - xs[i]) - math.log(-d)
            else:
                u_left = hs[i] + d * (zl - xs[i])
                span = d * (zr - zl)
                if abs(d) < 1e-12:
                    lm = u_left + math.log(zr - zl)
                elif span > 0:
                    # integrate from the lower end, factor out the growth
                    lm = u_left + span + math.log(-math.expm1(-span)) - math.log(d)
                else:
                    lm = u_left + math.log(-math.expm1(span)) - math.log(-d)
            log_masses.append(lm)
        peak = max(log_masses)
        if not math.isfinite(peak):
            raise _ArsFailure("degenerate envelope mass")
        weights = [math.exp(lm - peak) for lm in log_masses]
        total = sum(weights)

        # pick a segment, then invert its conditional CDF with a fresh uniform
        t = rng.random() * total
        seg = 0
        while seg < len(weights) - 1 and t > weights[seg]:
            t -= weights[seg]
            seg += 1
        frac = min(max(t / weights[seg], 1e-15), 1.0 - 1e-15)
        d = dhs[seg]
        zl = zs[seg - 1] if seg > 0 else None
        zr = zs[seg] if seg < len(zs) else None
        if zl is None:
            x = zr + math.log(frac) / d
        elif zr is None:
            x = zl + math.log1p(-frac) / d
        elif abs(d) < 1e-12:
            x = zl + frac * (zr - zl)
        else:
            span = d * (zr - zl)
            if span > 35.0:
                x = zr + math.log(frac) / d
            elif span < -35.0:
                x = zl + math.log1p(-frac) / d
            else:
                x = zl + math.log1p(frac * math.expm1(span)) / d
        if not math.isfinite(x):
            raise _ArsFailure("non-finite envelope draw")
        x = min(max(x, zl if zl is not None else x), zr if zr is not None else x)

        hull = hs[seg] + d * (x - xs[seg])
        h_x = logpdf(x)
        if math.log(rng.random() + 1e-300) <= h_x - hull:
            return x

        # tighten the hull with the rejected point
        d_x = dlogpdf(x) if math.isfinite(h_x) else -math.inf
        if not (math.isfinite(h_x) and math.isfinite(d_x)):
            continue  # far-tail proposal; nothing useful to insert
        pos = 0
        while pos < len(xs) and xs[pos] < x:
            pos += 1
        xs.insert(pos, x)
        hs.insert(pos, h_x)
        dhs.insert(pos, d_x)
    raise _ArsFailure("too many rejections")


def _grid_sample(rng, logpdf, lo: float, hi: float, num_points: int = 2048) -> float:
    """Fallback inverse-CDF draw on a fixed grid over a bracketing window."""
    grid = np.linspace(lo, hi, num_points)
    logs = np.array([logpdf(x) for x in grid])
    logs -= logs.max()
    weights = np.exp(logs)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    u = rng.random()
    idx = int(np.searchsorted(cdf, u))
    idx = min(max(idx, 1), num_points - 1)
    # linear jitter inside the chosen cell
    left = cdf[idx - 1]
    frac = (u - left) / max(cdf[idx] - left, 1e-300)
    return float(grid[idx - 1] + frac * (grid[idx] - grid[idx - 1]))


# ---------------------------------------------------------------------------
# Generalized urn sampler


def _make_latent_logpdf(i: int, k: int, theta: float, alpha: float, tau: float):
    ta = tau**alpha
    log_tau = math.log(tau)
    coef = theta / alpha
    rest = i - alpha * k

    def _log_tau_plus_u(w: float) -> float:
        # log(tau + e^w) without forming e^w for large w
        if w > 0:
            return w + math.log1p(tau * math.exp(-w))
        return log_tau + math.log1p(math.exp(w) / tau)

    def logpdf(w: float) -> float:
        log_tu = _log_tau_plus_u(w)
        z = alpha * (log_tu - log_tau)
        if z > 690.0:
            return -math.inf
        return i * w - coef * ta * math.expm1(z) - rest * log_tu

    def dlogpdf(w: float) -> float:
        log_tu = _log_tau_plus_u(w)
        arg = w + (alpha - 1.0) * log_tu
        if arg > 690.0:
            return -math.inf
        frac = 1.0 / (1.0 + tau * math.exp(-w)) if w > 0 else math.exp(w - log_tu)
        return i - theta * math.exp(arg) - rest * frac

    return logpdf, dlogpdf


def _straddle(dlogpdf, center: float, width: float = 1.0) -> tuple[float, float]:
    lo, step = center - width, width
    for _ in range(200):
        if dlogpdf(lo) > 0:
            break
        step *= 2.0
        lo -= step
    else:
        raise NumericError("could not bracket the latent mode from the left")
    hi, step = center + width, width
    for _ in range(200):
        if dlogpdf(hi) < 0:
            break
        step *= 2.0
        hi += step
    else:
        raise NumericError("could not bracket the latent mode from the right")
    return lo, hi


def nggp_urn_sample(
    rng: np.random.Generator,
    theta: float,
    alpha: float,
    tau: float,
    m: int,
    return_stream: bool = False,
):
    """Sample m observations from the power-law urn.

    Returns a ``PrefixSample``; with ``return_stream=True`` also returns the
    stream of symbol ids (64-bit ints in order of first appearance).
    The first observation is always a new symbol.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if theta <= 0 or tau <= 0 or not 0 < alpha < 1:
        raise ValueError("need theta > 0, tau > 0, alpha in (0, 1)")

    counts = [1]
    k = 1
    nonfirst: list[int] = []
    stream = [0] if return_stream else None
    center = 0.0
    for i in range(1, m):
        logpdf, dlogpdf = _make_latent_logpdf(i, k, theta, alpha, tau)
        # the latent density tightens like i^(-1/2); start the hull there
        lo, hi = _straddle(dlogpdf, center, max(0.05, 2.5 / math.sqrt(i)))
        try:
            w = sample_log_concave(rng, logpdf, dlogpdf, lo, hi)
        except _ArsFailure:
            w = _grid_sample(rng, logpdf, lo - 10.0, hi + 10.0)
        center = w
        u = math.exp(w)

        weight_new = theta * (u + tau) ** alpha
        total = weight_new + (i - alpha * k)
        r = rng.random() * total
        if r < weight_new:
            counts.append(1)
            symbol = k
            k += 1
        else:
            r -= weight_new
            if r < i - k:
                symbol = nonfirst[int(r)]
            else:
                symbol = int((r - (i - k)) / (1.0 - alpha))
                symbol = min(symbol, k - 1)
            counts[symbol] += 1
            nonfirst.append(symbol)
        if stream is not None:
            stream.append(symbol)

    prefix = PrefixSample(counts=tuple(counts), m=m)
    if return_stream:
        return prefix, np.asarray(stream, dtype=np.int64)
    return prefix


# ---------------------------------------------------------------------------
# Minimum-Wasserstein fitting from the sketch alone


def wasserstein1_counts(a, b) -> float:
    """W1 between the empirical distributions of two equal-length count vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("count vectors must be 1-d with equal length")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


_WASS_THETAS = (1.0, 10.0, 100.0, 1000.0)
_WASS_ALPHAS = (0.15, 0.35, 0.55, 0.75)


def fit_nggp_minwass(
    sketch: Sketch,
    m: int,
    num_mc: int = 10,
    seed: int = 0,
    tau: float = 0.5,
    nm_maxiter: int = 60,
) -> FitResult:
    """Fit (theta, alpha) by matching synthetic sketches to the observed one.

    For each candidate, ``num_mc`` synthetic prefixes of length m are drawn
    from the urn, hashed with freshly drawn hash functions, scaled by n/m,
    and compared to the observed counts by ``wasserstein1_counts``.  The
    same per-replica seeds are reused for every candidate so the objective
    is a fixed deterministic function the optimizer can descend.
    """
    if m < 1 or m > sketch.n:
        raise ValueError("need 1 <= m <= n")
    if num_mc < 1:
        raise ValueError("num_mc must be >= 1")
    observed = sketch.counts.astype(float)
    scale = sketch.n / m
    width = sketch.width

    root = np.random.SeedSequence(seed)
    replica_seeds = root.spawn(num_mc)
    hash_fns = []
    for child in replica_seeds:
        hash_rng = np.random.default_rng(child.spawn(1)[0])
        hash_fns.append(draw_hash(hash_rng, width))

    evaluations = 0

    def objective(x) -> float:
        nonlocal evaluations
        evaluations += 1
        theta, alpha = _from_unconstrained(x)
        dist = 0.0
        for ridx in range(num_mc):
            urn_rng = np.random.default_rng(replica_seeds[ridx])
            prefix, stream = nggp_urn_sample(urn_rng, theta, alpha, tau, m, return_stream=True)
            distinct_buckets = hash_fns[ridx].buckets_of(np.arange(prefix.num_distinct))
            synth = np.bincount(distinct_buckets[stream], minlength=width).astype(float) * scale
            dist += wasserstein1_counts(observed, synth)
        return dist / num_mc

    best_val, best_x = math.inf, None
    for theta in _WASS_THETAS:
        for alpha in _WASS_ALPHAS:
            x = _to_unconstrained(theta, alpha)
            val = objective(x)
            if val < best_val:
                best_val, best_x = val, x
    res = optimize.minimize(
        objective,
        np.asarray(best_x),
        method="Nelder-Mead",
        options={"xatol": 1e-3, "fatol": 1e-4, "maxiter": nm_maxiter},
    )
    if res.fun <= best_val:
        final_x, final_val = res.x, float(res.fun)
    else:
        final_x, final_val = best_x, best_val
    theta, alpha = _from_unconstrained(final_x)
    return FitResult(
        params=SmoothingParams.nggp(theta, alpha, tau, provenance="fitted(nggp-min-wasserstein)"),
        objective=final_val,
        method="nggp-min-wasserstein",
        iterations=evaluations,
        converged=True,
        seed=seed,
    )
