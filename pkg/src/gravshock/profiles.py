"""One-dimensional profile families with analytic derivatives.

Backgrounds need the upstream speed as a C^3 function; perturbation data
(entrance pressure shape, wall angle, exit pressure) need first and second
derivatives for compatibility checks and curvature bounds. Families are
either closed-form or cubic-spline tables.
"""

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError


class Profile:
    """Callable f(x) with f.deriv(x) and f.deriv2(x)."""

    def __init__(self, func, deriv, deriv2, name="profile"):
        self._f = func
        self._d1 = deriv
        self._d2 = deriv2
        self.name = name

    def __call__(self, x):
        return self._f(np.asarray(x, dtype=float))

    def deriv(self, x):
        return self._d1(np.asarray(x, dtype=float))

    def deriv2(self, x):
        return self._d2(np.asarray(x, dtype=float))

    def __repr__(self):
        return f"Profile({self.name})"


def zero_profile():
    return Profile(np.zeros_like, np.zeros_like, np.zeros_like, "zero")


def constant_profile(c):
    c = float(c)
    return Profile(
        lambda x: np.full_like(x, c), np.zeros_like, np.zeros_like, f"constant({c})"
    )


def poly3_profile(c0, c1=0.0, c2=0.0, c3=0.0):
    c = [float(c0), float(c1), float(c2), float(c3)]
    return Profile(
        lambda x: c[0] + x * (c[1] + x * (c[2] + x * c[3])),
        lambda x: c[1] + x * (2 * c[2] + 3 * c[3] * x),
        lambda x: 2 * c[2] + 6 * c[3] * x,
        f"poly3({c[0]},{c[1]},{c[2]},{c[3]})",
    )


def cosine_profile(a, b):
    """a + b*cos(pi*x); the built-in non-constant upstream-speed family."""
    a, b = float(a), float(b)
    return Profile(
        lambda x: a + b * np.cos(np.pi * x),
        lambda x: -b * np.pi * np.sin(np.pi * x),
        lambda x: -b * np.pi**2 * np.cos(np.pi * x),
        f"cosine({a},{b})",
    )


def sin_bump_profile(amplitude, length=1.0):
    """amplitude * sin(pi x / length)^3: vanishes with two derivatives at x=0.

    The cubed sine gives f(0) = f'(0) = f''(0) = 0 analytically, which is the
    entrance compatibility required of the wall-angle perturbation.
    """
    amp, ln = float(amplitude), float(length)
    w = np.pi / ln

    def f(x):
        return amp * np.sin(w * x) ** 3

    def d1(x):
        return 3 * amp * w * np.sin(w * x) ** 2 * np.cos(w * x)

    def d2(x):
        s, c = np.sin(w * x), np.cos(w * x)
        return 3 * amp * w**2 * s * (2 * c**2 - s**2)

    return Profile(f, d1, d2, f"sin_bump({amp},{ln})")


def table_profile(x_samples, values, name="table"):
    """Natural cubic spline through a two-column sample table."""
    x = np.asarray(x_samples, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 4 or np.any(np.diff(x) <= 0):
        raise ConfigError("table profiles need >= 4 strictly increasing samples")
    spl = CubicSpline(x, v)
    return Profile(spl, spl.derivative(1), spl.derivative(2), name)


def hermite_profile(x0, x1, f0, f1, d0, d1):
    """Cubic Hermite interpolant with prescribed endpoint values and slopes."""
    h = x1 - x0

    def basis(x):
        t = (x - x0) / h
        return t

    def f(x):
        t = basis(x)
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t**2 * (3 - 2 * t)
        h11 = t**2 * (t - 1)
        return h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1

    def df(x):
        t = basis(x)
        h00 = 6 * t * (t - 1)
        h10 = (1 - t) * (1 - 3 * t)
        h01 = 6 * t * (1 - t)
        h11 = t * (3 * t - 2)
        return (h00 * f0 / h + h10 * d0 + h01 * f1 / h + h11 * d1)

    def d2f(x):
        t = basis(x)
        h00 = (12 * t - 6) / h**2
        h10 = (6 * t - 4) / h
        h01 = (6 - 12 * t) / h**2
        h11 = (6 * t - 2) / h
        return h00 * f0 + h10 * d0 + h01 * f1 + h11 * d1

    return Profile(f, df, d2f, "hermite")


_SIMPLE_FAMILIES = {
    "zero": (zero_profile, 0),
    "constant": (constant_profile, 1),
    "poly3": (poly3_profile, None),
    "cosine": (cosine_profile, 2),
    "sin_bump": (sin_bump_profile, None),
}


def parse_profile(spec, length=1.0):
    """Build a profile from a 'family:params' string.

    Families: zero | constant:c | poly3:c0,c1[,c2[,c3]] | cosine:a,b |
    sin_bump:amp[,length] | table:path (two-column CSV).
    """
    name, _, params = spec.partition(":")
    name = name.strip()
    args = [p for p in (s.strip() for s in params.split(",")) if p] if params else []
    if name == "table":
        if len(args) != 1:
            raise ConfigError("table profile needs a file path")
        data = np.loadtxt(args[0], delimiter=",", ndmin=2)
        return table_profile(data[:, 0], data[:, 1], name=f"table({args[0]})")
    if name == "sin_bump":
        if not 1 <= len(args) <= 2:
            raise ConfigError("sin_bump takes amplitude[,length]")
        vals = [float(a) for a in args]
        if len(vals) == 1:
            vals.append(length)
        return sin_bump_profile(*vals)
    if name not in _SIMPLE_FAMILIES:
        raise ConfigError(f"unknown profile family {name!r}")
    builder, n_args = _SIMPLE_FAMILIES[name]
    vals = [float(a) for a in args]
    if n_args is not None and len(vals) != n_args:
        raise ConfigError(f"profile family {name!r} takes {n_args} parameters")
    return builder(*vals)
