"""Quadrature and finite-difference helpers shared across the solvers.

Smooth-integrand rules only: composite Simpson where spectral accuracy is
not needed, trapezoid where discrete compatibility with a finite-volume
operator matters (the two are never mixed inside one identity).
"""

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid, simpson


def simpson_integral(values, x):
    """Composite Simpson integral of sampled values on a uniform-ish grid."""
    return float(simpson(values, x=x))


def cumulative_simpson_from(values, x):
    """Cumulative Simpson F(x_i) = int_{x_0}^{x_i} f, with F(x_0) = 0."""
    return np.concatenate([[0.0], cumulative_simpson(values, x=x)])


def cumulative_simpson_to_end(values, x):
    """Tail integrals G(x_i) = int_{x_i}^{x_N} f by cumulative Simpson."""
    F = cumulative_simpson_from(values, x)
    return F[-1] - F


def trapezoid_weights(x):
    """Weights w with sum(w*f) = trapezoid integral of f over x."""
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2.0
    w[1:] += dx / 2.0
    return w


def cumtrapz_from(values, x):
    """Cumulative trapezoid with leading zero."""
    return cumulative_trapezoid(values, x=x, initial=0.0)


def cumtrapz_to_end(values, x):
    """Tail trapezoid integrals int_{x_i}^{x_N} f."""
    F = cumtrapz_from(values, x)
    return F[-1] - F


def fixed_simpson(func, a, b, n=2048):
    """Composite Simpson of a callable on [a, b] with a fixed even panel count.

    Deterministic by construction; every caller that must agree with another
    to rounding uses this same rule.
    """
    if b == a:
        return 0.0
    x = np.linspace(a, b, n + 1)
    return float(simpson(func(x), x=x))


def diff_1d(values, x, axis=0):
    """Second-order first derivative: central interior, one-sided at the ends."""
    values = np.asarray(values, dtype=float)
    h = x[1] - x[0]
    d = np.empty_like(values)
    v = np.moveaxis(values, axis, 0)
    out = np.moveaxis(d, axis, 0)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return d


def second_diff_at_start(values, h):
    """One-sided O(h^2) second derivative at the first sample of a 1-d array."""
    f = np.asarray(values, dtype=float)
    return (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2


def least_squares_order(hs, errs):
    """Least-squares slope of log(err) vs log(h).

    Returns (order, monotone_flag); requires at least 3 resolutions and
    positive errors.
    """
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if hs.size < 3:
        raise ValueError("need at least 3 resolutions for an order estimate")
    if np.any(errs <= 0):
        raise ValueError("errors must be positive")
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    idx = np.argsort(hs)
    monotone = bool(np.all(np.diff(errs[idx]) >= 0))
    return float(order), monotone
