"""Special functions and samplers shared by the estimators.

Log-gamma and digamma are exposed behind domain-checked wrappers so every
estimator goes through one choke point with a uniform error contract.
The generalized exponential integral

    E_nu(z) = integral_1^inf x^(-nu) exp(-z x) dx,   nu >= 1, z >= 0,

is not available for real nu in scipy, so it is evaluated here by adaptive
quadrature of the exponentially scaled form

    S(nu, z) = exp(z) * E_nu(z) = integral_0^inf (1+u)^(-nu) exp(-z u) du,

which stays in [0, 1/(nu-1) + 1/z] for all arguments and never overflows.
A modified-Lentz continued fraction backs the quadrature up for large z.

``sample_v_nggp`` draws the mixing variable that turns a bucket count into
a smoothed frequency distribution under power-law smoothing: a
Beta(1-alpha, alpha) variable times 1 - (b/(b+E))^(1/alpha) with E a unit
exponential and b = theta * tau^alpha / (J * alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import special as sp

from .errors import NumericError


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureConfig()


def log_gamma(x):
    """ln Gamma(x) for x > 0 (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("log_gamma requires x > 0")
    out = sp.gammaln(x)
    return float(out) if out.ndim == 0 else out


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0 (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("digamma requires x > 0")
    out = sp.digamma(x)
    return float(out) if out.ndim == 0 else out


def _scaled_expint_cf(nu: float, z: float, tol: float = 1e-13, max_iter: int = 400) -> float:
    """Continued fraction for exp(z) * E_nu(z); reliable once z is O(1)."""
    tiny = 1e-300
    b = z + nu
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        a = -i * (nu - 1 + i)
        b += 2.0
        d = b + a * d
        if abs(d) < tiny:
            d = tiny
        c = b + a / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise NumericError(f"continued fraction for E_nu failed at nu={nu}, z={z}")


def scaled_exp_integral(nu: float, z: float, config: QuadratureConfig = DEFAULT_QUAD) -> float:
    """exp(z) * E_nu(z), computed without ever forming exp(z)."""
    if nu < 1:
        raise ValueError("index nu must be >= 1")
    if z < 0:
        raise ValueError("z must be >= 0")
    if z == 0:
        if nu <= 1:
            raise ValueError("E_nu(0) diverges for nu <= 1")
        return 1.0 / (nu - 1.0)

    # Substitute u = t / (nu + z): the integrand then decays like exp(-t)
    # near the origin for every (nu, z) regime.
    scale = nu + z

    def integrand(t):
        return math.exp(-nu * math.log1p(t / scale) - z * t / scale) / scale

    try:
        value, err = integrate.quad(
            integrand,
            0.0,
            np.inf,
            epsabs=config.abs_tol,
            epsrel=config.rel_tol,
            limit=config.max_subdivisions,
        )
        if err <= max(config.abs_tol, 10 * config.rel_tol * abs(value)):
            return value
    except Exception:
        pass
    if z >= 1.0:
        return _scaled_expint_cf(nu, z)
    raise NumericError(f"quadrature for E_nu failed at nu={nu}, z={z}")


def exp_integral(nu: float, z: float, config: QuadratureConfig = DEFAULT_QUAD) -> float:
    """E_nu(z) = integral_1^inf x^(-nu) exp(-z x) dx."""
    return math.exp(-z) * scaled_exp_integral(nu, z, config)


def nggp_scale_b(theta: float, alpha: float, tau: float, width: int) -> float:
    """The rate b = theta * tau^alpha / (J * alpha) of the latent exponential race."""
    return theta * tau**alpha / (width * alpha)


def _check_nggp_domain(theta: float, alpha: float, tau: float, width: int) -> None:
    if theta <= 0:
        raise ValueError("theta must be > 0")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1); use the DP path when alpha = 0")
    if tau <= 0:
        raise ValueError("tau must be > 0")
    if width < 1:
        raise ValueError("width must be >= 1")


def sample_v_nggp(
    rng: np.random.Generator,
    theta: float,
    alpha: float,
    tau: float,
    width: int,
    size=None,
):
    """Draw the NGGP mixing variable V in [0, 1].

    V = B * (1 - (b/(b+E))^(1/alpha)) with B ~ Beta(1-alpha, alpha) and
    E ~ Exp(1) independent.  The power is evaluated through log1p so the
    small-alpha regime (where 1/alpha is huge) stays finite.
    """
    _check_nggp_domain(theta, alpha, tau, width)
    b = nggp_scale_b(theta, alpha, tau, width)
    beta_part = rng.beta(1.0 - alpha, alpha, size=size)
    expo = rng.exponential(size=size)
    tilt = -np.expm1(-np.log1p(expo / b) / alpha)
    return beta_part * tilt


def sample_v_dp(rng: np.random.Generator, theta: float, width: int, size=None):
    """DP analogue of the mixing variable: Beta(1, theta / J)."""
    if theta <= 0:
        raise ValueError("theta must be > 0")
    if width < 1:
        raise ValueError("width must be >= 1")
    return rng.beta(1.0, theta / width, size=size)
