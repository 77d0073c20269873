"""Polytropic-gas thermodynamics and Rankine-Hugoniot jump relations.

State vector is U = (p, theta, q, S): pressure, flow angle, speed, entropy.
The thermal relation is p = A exp(S/c_v) rho^gamma with enthalpy
i = gamma p / ((gamma-1) rho) and sound speed c = sqrt(gamma p / rho).
Density is always derived from (p, S); entropy is the stored unknown.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ShockAdmissibilityError

THETA_LIMIT = math.pi / 2  # keeps u = q cos(theta) > 0 through the nozzle


@dataclass(frozen=True)
class GasConstants:
    """gamma > 1, state-equation constant A > 0, specific heat c_v > 0,
    vertical gravity g (positive means the momentum source is -rho*g)."""

    gamma: float
    A: float = 1.0
    c_v: float = 1.0
    g: float = 0.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise DomainError(f"adiabatic exponent must exceed 1, got {self.gamma}")
        if not self.A > 0:
            raise DomainError(f"state-equation constant must be positive, got {self.A}")
        if not self.c_v > 0:
            raise DomainError(f"specific heat must be positive, got {self.c_v}")

    @property
    def mu2(self):
        """(gamma-1)/(gamma+1), the normal-shock contraction factor."""
        return (self.gamma - 1.0) / (self.gamma + 1.0)


@dataclass(frozen=True)
class GasState:
    p: float
    theta: float
    q: float
    S: float

    def __post_init__(self):
        if not self.p > 0:
            raise DomainError(f"pressure must be positive, got {self.p}")
        if not self.q > 0:
            raise DomainError(f"speed must be positive, got {self.q}")
        if not abs(self.theta) < THETA_LIMIT:
            raise DomainError(f"flow angle must lie in (-pi/2, pi/2), got {self.theta}")


class DerivedQuantities(NamedTuple):
    rho: float
    c: float
    M: float
    i: float
    u: float
    v: float


def density(p, S, consts):
    """rho = (p / (A exp(S/c_v)))^(1/gamma)."""
    return (np.asarray(p) / (consts.A * np.exp(np.asarray(S) / consts.c_v))) ** (
        1.0 / consts.gamma
    )


def entropy(p, rho, consts):
    """Invert the state equation: S = c_v log(p / (A rho^gamma))."""
    return consts.c_v * np.log(np.asarray(p) / (consts.A * np.asarray(rho) ** consts.gamma))


def sound_speed(p, rho, consts):
    return np.sqrt(consts.gamma * np.asarray(p) / np.asarray(rho))


def enthalpy(p, rho, consts):
    return consts.gamma * np.asarray(p) / ((consts.gamma - 1.0) * np.asarray(rho))


def temperature(p, rho, consts):
    """T = p / ((gamma-1) c_v rho), so that i = gamma c_v T."""
    return np.asarray(p) / ((consts.gamma - 1.0) * consts.c_v * np.asarray(rho))


def derived_quantities(state, consts):
    """Density, sound speed, Mach number, enthalpy and velocity components."""
    rho = float(density(state.p, state.S, consts))
    c = float(sound_speed(state.p, rho, consts))
    return DerivedQuantities(
        rho=rho,
        c=c,
        M=state.q / c,
        i=float(enthalpy(state.p, rho, consts)),
        u=state.q * math.cos(state.theta),
        v=state.q * math.sin(state.theta),
    )


def normal_shock_arrays(p_m, q_m, rho_m, consts):
    """Downstream (p, q, rho) of a normal shock, vectorized over the upstream.

    p_+ = ((1+mu^2) M^2 - mu^2) p_-,
    q_+ = mu^2 (q_- + 2 c_-^2 / ((gamma-1) q_-)),
    rho_+ = rho_- q_- / q_+.

    Pure formula evaluation; admissibility (M > 1) is the caller's business.
    """
    mu2 = consts.mu2
    c2 = consts.gamma * np.asarray(p_m) / np.asarray(rho_m)
    M2 = np.asarray(q_m) ** 2 / c2
    p_p = ((1.0 + mu2) * M2 - mu2) * p_m
    q_p = mu2 * (q_m + 2.0 * c2 / ((consts.gamma - 1.0) * q_m))
    rho_p = rho_m * q_m / q_p
    return p_p, q_p, rho_p


def rh_downstream(upstream, consts):
    """Subsonic state behind a normal shock with the given supersonic upstream.

    Requires theta = 0 and M > 1; raises ShockAdmissibilityError otherwise.
    Downstream entropy comes from the state equation, so mass flux
    rho_+ q_+ = rho_- q_- and the Bernoulli jump vanish to rounding.
    """
    if upstream.theta != 0.0:
        raise ShockAdmissibilityError("normal-shock upstream must have zero flow angle")
    d = derived_quantities(upstream, consts)
    if not d.M > 1.0:
        raise ShockAdmissibilityError(
            f"upstream Mach number must exceed 1, got M = {d.M}"
        )
    p_p, q_p, rho_p = normal_shock_arrays(upstream.p, upstream.q, d.rho, consts)
    S_p = float(entropy(p_p, rho_p, consts))
    return GasState(p=float(p_p), theta=0.0, q=float(q_p), S=S_p)


class RHResiduals(NamedTuple):
    """Jump-condition defects in absolute and relative form."""

    absolute: np.ndarray
    relative: np.ndarray


def _conserved(state, consts):
    d = derived_quantities(state, consts)
    rho, u, v = d.rho, d.u, d.v
    return np.array(
        [
            rho * u,
            rho * u * u + state.p,
            rho * u * v,
            rho * v,
            rho * v * v + state.p,
            rho * u * v,
            0.5 * state.q**2 + d.i,
        ]
    )


def rh_residuals(minus, plus, slope, consts):
    """Defects of the four jump conditions across a front of slope dx/dy.

    r1 = [rho u] - s [rho v]
    r2 = [rho u^2 + p] - s [rho u v]
    r3 = [rho u v] - s [rho v^2 + p]
    r4 = [q^2/2 + i]

    The relative form scales each defect by the larger of the two flux
    magnitudes entering its jump bracket.
    """
    fm = _conserved(minus, consts)
    fp = _conserved(plus, consts)
    jm = fp - fm
    abs_res = np.array(
        [
            jm[0] - slope * jm[3],
            jm[1] - slope * jm[5],
            jm[2] - slope * jm[4],
            jm[6],
        ]
    )
    scales = np.array(
        [
            max(abs(fm[0]), abs(fp[0]), abs(slope) * max(abs(fm[3]), abs(fp[3]))),
            max(abs(fm[1]), abs(fp[1]), abs(slope) * max(abs(fm[2]), abs(fp[2]))),
            max(abs(fm[2]), abs(fp[2]), abs(slope) * max(abs(fm[4]), abs(fp[4]))),
            max(abs(fm[6]), abs(fp[6])),
        ]
    )
    scales = np.where(scales > 0, scales, 1.0)
    return RHResiduals(absolute=abs_res, relative=abs_res / scales)


def state_from_cartesian(u, v, rho, p, consts):
    """Back out (p, theta, q, S) from velocity components, density, pressure."""
    q = math.hypot(u, v)
    return GasState(p=p, theta=math.atan2(v, u), q=q, S=float(entropy(p, rho, consts)))
