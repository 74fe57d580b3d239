"""
Exponential integral and the closed-form expectations built on it.

``gamma0(x)`` is the upper incomplete gamma function of order zero,
Gamma(0, x) = E_1(x) = int_x^inf exp(-u)/u du.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-16
_FPMIN = 1e-300
_MAX_ITER = 500
_SERIES_SPLIT = 1.0
_ASYMPTOTIC_FROM = 700.0


class BoundPair(NamedTuple):
    lower: float
    upper: float


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{n>=1} (-x)^n / (n n!)
    total = 0.0
    term = 1.0
    for n in range(1, _MAX_ITER):
        term *= -x / n
        contrib = term / n
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return -EULER_GAMMA - math.log(x) - total


def _scaled_e1_cf(x: float) -> float:
    """exp(x) * E1(x) by the modified Lentz continued fraction (x > 1)."""
    b = x + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"E1 continued fraction failed to converge at x={x}")


def _gamma0_scalar(x: float) -> float:
    if not x > 0:
        raise DomainError(f"gamma0 requires x > 0, got {x!r}")
    if x <= _SERIES_SPLIT:
        return _e1_series(x)
    return _scaled_e1_cf(x) * math.exp(-x)


def _elementwise(fn, x):
    if np.ndim(x) == 0:
        return fn(float(x))
    arr = np.asarray(x, dtype=float)
    return np.array([fn(v) for v in arr.ravel()]).reshape(arr.shape)


def gamma0(x):
    """
    Exponential integral E_1(x) for x > 0.

    Power series below x = 1, continued fraction above. Accepts scalars or
    arrays.
    """
    return _elementwise(_gamma0_scalar, x)


def _bounds_scalar(x: float) -> BoundPair:
    if not x > 0:
        raise DomainError(f"gamma0_bounds requires x > 0, got {x!r}")
    ex = math.exp(-x)
    return BoundPair(0.5 * ex * math.log1p(2.0 / x), ex * math.log1p(1.0 / x))


def gamma0_bounds(x: float) -> BoundPair:
    """Envelope ``e^{-x} ln(1 + 2/x) / 2 < E_1(x) < e^{-x} ln(1 + 1/x)``."""
    return _bounds_scalar(float(x))


def _phi_of_c_scalar(c: float) -> float:
    if c == math.inf:
        return 1.0
    if not c > 0:
        raise DomainError(f"phi requires c > 0, got {c!r}")
    if c <= _SERIES_SPLIT:
        return c * math.exp(c) * _e1_series(c)
    if c <= _ASYMPTOTIC_FROM:
        return c * _scaled_e1_cf(c)
    # c e^c E1(c) ~ sum_n (-1)^n n! / c^n
    total, term = 1.0, 1.0
    for n in range(1, 30):
        term *= -n / c
        total += term
        if abs(term) < _EPS:
            break
    return total


def phi_of_c(c):
    """``c * exp(c) * E_1(c)``, overflow-safe for large ``c``."""
    return _elementwise(_phi_of_c_scalar, c)


def ce_inverse_quality(beta, alpha, pilot_power, refl_mag, k_tags, ce_noise_power):
    """
    c = K sigma^2 / (beta^2 alpha p_ce |delta|).

    Small c means accurate backscatter-channel estimates. ``alpha = 0`` (no
    estimation slot) maps to ``inf``.
    """
    denom = np.asarray(beta, dtype=float) ** 2 * alpha * pilot_power * refl_mag
    with np.errstate(divide="ignore"):
        c = np.where(denom > 0, k_tags * ce_noise_power / np.where(denom > 0, denom, 1.0), np.inf)
    return float(c) if np.ndim(c) == 0 else c


def phi(beta, alpha, pilot_power, refl_mag, k_tags, ce_noise_power):
    """
    Expected residual fraction E{1 / (beta |h_b|^2 alpha p_ce |delta| / (K sigma^2) + 1)}.

    For h_b ~ CN(0, beta) this equals ``c e^c E_1(c)`` with
    ``c = K sigma^2 / (beta^2 alpha p_ce |delta|)``. Lies in (0, 1); tends to
    0 with perfect estimation and to 1 when the estimate is pure noise.
    """
    for name, v in (("beta", beta), ("refl_mag", refl_mag), ("k_tags", k_tags),
                    ("ce_noise_power", ce_noise_power)):
        if np.any(np.asarray(v) <= 0):
            raise DomainError(f"{name} must be positive")
    if np.any(np.asarray(alpha) < 0) or np.any(np.asarray(pilot_power) < 0):
        raise DomainError("alpha and pilot_power must be non-negative")
    return phi_of_c(ce_inverse_quality(beta, alpha, pilot_power, refl_mag, k_tags, ce_noise_power))


def truncated_inverse_moment(beta, tau):
    """
    int_tau^inf (1/x) (1/beta) e^{-x/beta} dx = E_1(tau/beta) / beta.

    The partial expectation of 1/|h|^2 over |h|^2 >= tau for exponential
    |h|^2 with mean ``beta``.
    """
    if np.any(np.asarray(beta) <= 0) or np.any(np.asarray(tau) <= 0):
        raise DomainError("beta and tau must be positive")
    return gamma0(np.asarray(tau, dtype=float) / beta) / beta


def truncated_inverse_moment_upper(beta, tau):
    """Upper envelope ``e^{-tau/beta} ln(1 + beta/tau) / beta`` of the truncated inverse moment."""
    if np.any(np.asarray(beta) <= 0) or np.any(np.asarray(tau) <= 0):
        raise DomainError("beta and tau must be positive")
    beta = np.asarray(beta, dtype=float)
    out = np.exp(-tau / beta) * np.log1p(beta / tau) / beta
    return float(out) if out.ndim == 0 else out


def inv_chisquare_mean(r_rx: int) -> float:
    """Mean of 1/Z for Z ~ chi^2 with 2R degrees of freedom: 1 / (2(R-1))."""
    if r_rx < 2:
        raise DomainError(f"inverse chi-square mean diverges for R={r_rx} < 2")
    return 1.0 / (2.0 * (r_rx - 1))
