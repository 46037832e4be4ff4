"""
Scalar variational primitives.

Every transform here rewrites a target function as an optimum over an
auxiliary parameter; fixing the parameter gives a one-sided bound that is
tight at the closed-form optimum. All functions accept numpy arrays.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import entr, expit, log_expit, xlogy

LOG2 = math.log(2.0)
DEFAULT_EXPANSION_TERMS = 16


def sigmoid(x):
    return expit(x)


def log_sigmoid(x):
    return log_expit(x)


def _check_range(name, value, lo, hi, lo_open=False, hi_open=False):
    v = np.asarray(value, dtype=float)
    bad = np.isnan(v) | (v <= lo if lo_open else v < lo) | (v >= hi if hi_open else v > hi)
    if np.any(bad):
        left = "(" if lo_open else "["
        right = ")" if hi_open else "]"
        raise ValueError(f"{name} must lie in {left}{lo}, {hi}{right}, got {value}")
    return v


def binary_entropy(xi):
    """H(xi) in nats, with 0 log 0 = 0."""
    xi = _check_range("xi", xi, 0.0, 1.0)
    return entr(xi) + entr(1.0 - xi)


def sigmoid_log_bound(x, xi):
    return xi * np.asarray(x, dtype=float) - binary_entropy(xi)


def sigmoid_bound(x, xi):
    """exp(xi*x - H(xi)) >= g(x) for every xi in [0, 1]."""
    return np.exp(sigmoid_log_bound(x, xi))


def sigmoid_opt_xi(x):
    return expit(-np.asarray(x, dtype=float))


def noisy_or_conjugate(xi):
    """F(xi) = -xi log xi + (xi + 1) log(xi + 1), F(0) = 0."""
    xi = _check_range("xi", xi, 0.0, np.inf)
    return xlogy(xi + 1.0, xi + 1.0) - xlogy(xi, xi)


def noisy_or_log_bound(x, xi):
    x = _check_range("x", x, 0.0, np.inf, lo_open=True)
    return xi * x - noisy_or_conjugate(xi)


def noisy_or_bound(x, xi):
    """exp(xi*x - F(xi)) >= 1 - exp(-x) for x > 0 and xi >= 0."""
    return np.exp(noisy_or_log_bound(x, xi))


def noisy_or_opt_xi(x):
    # q* = e^{-x}, xi* = q*/(1 - q*)
    x = _check_range("x", x, 0.0, np.inf, lo_open=True)
    return 1.0 / np.expm1(x)


def legendre_log(x, lam):
    """lam*x - log(lam) - 1 >= log(x); equality at lam = 1/x."""
    x = _check_range("x", x, 0.0, np.inf, lo_open=True)
    lam = _check_range("lambda", lam, 0.0, np.inf, lo_open=True)
    return lam * x - np.log(lam) - 1.0


def legendre_opt_lambda(x):
    x = _check_range("x", x, 0.0, np.inf, lo_open=True)
    return 1.0 / x


def expansion_factors(x, n_terms: int = DEFAULT_EXPANSION_TERMS):
    """g(2^k x) for k = 0..N-1, stacked along a trailing axis."""
    if n_terms < 1:
        raise ValueError("Expansion needs at least one term")
    scales = np.ldexp(1.0, np.arange(n_terms))
    return expit(np.multiply.outer(np.asarray(x, dtype=float), scales))


def noisy_or_expansion(x, n_terms: int = DEFAULT_EXPANSION_TERMS):
    """Truncated product prod_{k<N} g(2^k x), an over-estimate of 1 - exp(-x)."""
    _check_range("x", x, 0.0, np.inf)
    return np.prod(expansion_factors(x, n_terms), axis=-1)


def log_noisy_or_expansion(x, n_terms: int = DEFAULT_EXPANSION_TERMS):
    _check_range("x", x, 0.0, np.inf)
    scales = np.ldexp(1.0, np.arange(n_terms))
    return np.sum(log_expit(np.multiply.outer(np.asarray(x, dtype=float), scales)), axis=-1)


def expansion_remainder(x, n_terms: int = DEFAULT_EXPANSION_TERMS):
    """1 - exp(-2^N x): the factor dropped by truncating after N terms."""
    return -np.expm1(-np.ldexp(np.asarray(x, dtype=float), n_terms))


@dataclass(frozen=True)
class QuadCoeffs:
    """Quadratic minorant a(X-x)^2 + b(X-x) + c of -log(1+X) on [0, 1]."""

    a: float
    b: float
    c: float
    x: float

    def __call__(self, X):
        d = np.asarray(X, dtype=float) - self.x
        return self.a * d * d + self.b * d + self.c


def quad_coeffs(x: float) -> QuadCoeffs:
    if not 0.0 <= x < 1.0:
        raise ValueError(f"Expansion point must lie in [0, 1), got {x}")
    c = -math.log1p(x)
    b = -1.0 / (1.0 + x)
    a = float(quad_curvature(x))
    if a < 0.0:
        raise ArithmeticError(f"Quadratic coefficient a={a} is negative at x={x}")
    return QuadCoeffs(a=a, b=b, c=c, x=float(x))


# series coefficients (m-1)/m for m = 2..15 of the expansion around x = 1
_SERIES = np.array([(m - 1.0) / m for m in range(2, 16)])


def quad_curvature(x):
    """
    Largest a keeping the quadratic below -log(1+X) on [0, 1].

    Near x = 1 the closed form is 0/0; there a = 1/4 * sum_{m>=2} (m-1)/m v^(m-2)
    with v = (1-x)/2, which tends to 1/8.
    """
    x = np.asarray(x, dtype=float)
    u = 1.0 - x
    v = 0.5 * u
    near = u < 1e-2
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = -((u * (-1.0 / (1.0 + x))) - np.log1p(x) + LOG2) / (u * u)
    powers = np.power.outer(v, np.arange(len(_SERIES)))
    series = 0.25 * (powers @ _SERIES)
    return np.where(near, series, direct)
