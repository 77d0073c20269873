"""Shock-position solvability: kernels, the J1/J2 functionals, root location.

The linearized subsonic problem behind a candidate shock line xi = K admits
a solution iff an integral identity between the boundary data holds. With

    A_+(eta) = exp(-g int_0^eta ds / (rho_+ q_+^3)),
    D(eta)   = 1/(rho_+ q_+^2) + (gamma-1)/(gamma p_+),
    E(eta)   = 1/(rho_+ q_+^2) - (gamma-1)/(gamma p_+) (rho_+/rho_- - 1),

the kernels are

    K1 = g A_+/(rho_+ q_+) (1/(q_- q_+) - (gamma-1)/(gamma p_+)(rho_+ - rho_-))
    K2 = A_+ (1 - D [p])            ([p] = p_+ - p_-)
    K3 = (1 - M_+^2)/(rho_+^2 q_+^3) A_+
    K4 = A_+/(rho_+ q_+) * E-like entrance coefficient (see h1 below)
    K  = K1 + K2'

and the identity reads J1(K) = J2 where J1 collects the supersonic response

    J1(xi) = -(1/sigma) iint K1 dtheta + (1/sigma) iint K2 d_eta dtheta
             + A_+(m_bar) int_xi^L Theta,

and J2 the exit/entrance data

    J2 = int K3 p_ex(y(eta)) - int K4 p_en(eta).

J1 is assembled here in the pre-integration-by-parts form (K1 and K2 acting
on the accumulated march functionals I0, I1); the equivalent K-form, with
the wall term K2(m_bar) int_0^xi Theta split off, is exposed separately as a
cross-check. The factors A_+ and K2 that appear outside eta-integrals are
evaluated at eta = m_bar throughout.
"""

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .quadrature import (
    cumtrapz_from,
    cumulative_simpson_from,
    fixed_simpson,
    trapezoid_weights,
)


@dataclass
class SolvabilityKernels:
    """Sampled kernels on the eta grid plus the background column they use."""

    eta: np.ndarray
    A_plus: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    K2_prime: np.ndarray
    K3: np.ndarray
    K4: np.ndarray
    prof: SimpleNamespace = field(repr=False)
    exit_map_bg: np.ndarray = field(repr=False)  # int_0^eta dt/(rho_+ q_+)
    g: float = 0.0

    @property
    def K(self):
        return self.K1 + self.K2_prime

    @property
    def A_plus_mbar(self):
        return float(self.A_plus[-1])

    @property
    def K2_mbar(self):
        return float(self.K2[-1])

    @property
    def weights(self):
        return trapezoid_weights(self.eta)

    def capacity(self):
        """int A_+/(rho_+ q_+) d eta, the Neumann capacity of the shock face."""
        return float(
            np.sum(self.weights * self.A_plus / (self.prof.rhop * self.prof.qp))
        )


def compute_kernels(bg, eta):
    """Evaluate A_+ (cumulative Simpson) and the four kernels on eta.

    K2' is differentiated analytically through the hydrostatic relations
    dp_+-/deta = -g/q_+- and the chain rule for the downstream profiles.
    """
    prof = bg.at_eta(eta)
    g = bg.consts.g
    gam = bg.consts.gamma
    integrand = 1.0 / (prof.rhop * prof.qp**3)
    A_plus = np.exp(-g * cumulative_simpson_from(integrand, eta))
    pj = prof.pp - prof.pm  # pressure jump [p] > 0 across a compressive shock

    D = 1.0 / (prof.rhop * prof.qp**2) + (gam - 1.0) / (gam * prof.pp)
    K1 = (
        g * A_plus / (prof.rhop * prof.qp)
        * (1.0 / (prof.qm * prof.qp) - (gam - 1.0) / (gam * prof.pp) * (prof.rhop - prof.rhom))
    )
    K2 = A_plus * (1.0 - D * pj)
    K3 = (1.0 - prof.Mp2) / (prof.rhop**2 * prof.qp**3) * A_plus
    coef_pen = (
        1.0 / (prof.rhop * prof.qp**2)
        - (gam - 1.0) / (gam * prof.pp) * (prof.rhop / prof.rhom - 1.0)
        - prof.Mm2 / (prof.rhom * prof.qm**2) * (1.0 - D * pj)
    )
    K4 = A_plus / (prof.rhop * prof.qp) * coef_pen

    # analytic K2' via the background eta-derivatives
    d = prof.d_eta
    dA = -g * integrand * A_plus
    dpj = -g / prof.qp + g / prof.qm
    dD = (
        -(d.rhop / prof.rhop + 2.0 * d.qp / prof.qp) / (prof.rhop * prof.qp**2)
        + (gam - 1.0) / gam * g / (prof.qp * prof.pp**2)
    )
    K2_prime = dA * (1.0 - D * pj) - A_plus * (dD * pj + D * dpj)

    exit_map = cumtrapz_from(1.0 / (prof.rhop * prof.qp), eta)
    return SolvabilityKernels(
        eta=eta, A_plus=A_plus, K1=K1, K2=K2, K2_prime=K2_prime,
        K3=K3, K4=K4, prof=prof, exit_map_bg=exit_map, g=g,
    )


def theta_integral(Theta, a, b, n=2048):
    """The one fixed quadrature rule used for every int Theta over [a, b]."""
    return fixed_simpson(lambda x: np.asarray(Theta(x), dtype=float), a, b, n)


@dataclass
class LinearShockData:
    """First-order shock data h_1..h_3 and the downstream shock values."""

    eta: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    dp_plus: np.ndarray
    dq_plus: np.ndarray
    dS_plus: np.ndarray
    dtheta_minus: np.ndarray
    mbar_over_m: float
    p_jump: np.ndarray
    qp: np.ndarray
    qm: np.ndarray

    def h4_of(self, dtheta_plus):
        """Linear shock-slope datum from the two tangential angles."""
        return (
            self.mbar_over_m
            * (self.qp * dtheta_plus - self.qm * self.dtheta_minus)
            / self.p_jump
        )


def linearized_shock_data(K0, pert, bg, sigma, mass, trace=None):
    """Assemble h_1^0..h_3^0 from the march functionals at xi = K0.

    Uses the entrance datum sigma p_en(eta), I0 = int_0^K0 dtheta and
    I1 = int_0^K0 d_eta dtheta, combined with the background jump
    coefficients; equals the generic jump-matrix inversion applied to the
    linearized trace, to rounding.
    """
    from .supersonic import shock_trace

    if trace is None:
        trace = shock_trace(pert, K0, bg)
    eta = trace.eta
    prof = bg.at_eta(eta)
    gam = bg.consts.gamma
    cv = bg.consts.c_v
    g = bg.consts.g
    pj = prof.pp - prof.pm
    D = 1.0 / (prof.rhop * prof.qp**2) + (gam - 1.0) / (gam * prof.pp)
    E = 1.0 / (prof.rhop * prof.qp**2) - (gam - 1.0) / (gam * prof.pp) * (
        prof.rhop / prof.rhom - 1.0
    )
    pen = sigma * np.asarray(pert.p_en(eta), dtype=float)
    I0, I1 = trace.I0, trace.I1

    coef_pen_h1 = E - prof.Mm2 / (prof.rhom * prof.qm**2) * (1.0 - D * pj)
    h1 = (
        coef_pen_h1 * pen
        - (1.0 / (prof.qm * prof.qp) - (gam - 1.0) / (gam * prof.pp) * (prof.rhop - prof.rhom))
        * g * I0
        + (1.0 - D * pj) * prof.rhom * prof.qm * I1
    )
    amp = prof.rhop * prof.qp**2 / (1.0 - prof.Mp2)
    h2 = (1.0 - amp * E) * (pen - g * prof.rhom * I0) + (pj + amp * (1.0 - D * pj)) * (
        prof.Mm2 / (prof.rhom * prof.qm**2) * pen - prof.rhom * prof.qm * I1
    )
    h3 = (gam - 1.0) * cv / prof.pp * (
        (prof.rhop / prof.rhom - 1.0 - prof.Mm2 / (prof.rhom * prof.qm**2) * pj) * pen
        - ((prof.rhop - prof.rhom) * g * I0 - prof.rhom * prof.qm * pj * I1)
    )

    return LinearShockData(
        eta=eta, h1=h1, h2=h2, h3=h3,
        dp_plus=amp * h1,
        dq_plus=h2 / (prof.rhop * prof.qp),
        dS_plus=h3,
        dtheta_minus=trace.dtheta,
        mbar_over_m=mass.m_bar / mass.m,
        p_jump=pj,
        qp=prof.qp,
        qm=prof.qm,
    )


class J1Functional:
    """Smooth-in-xi evaluation of J1 built on the march functionals.

    Shares the same cubic xi-interpolants of I0 and I1 as the shock-data
    assembly, so the located root zeroes the fixed-point solvability
    functional at the initial iterate to rounding rather than to O(h^2).
    """

    def __init__(self, kernels, pert, Theta, sigma, L, mass):
        self.kernels = kernels
        self.sigma = sigma
        self.L = L
        self.Theta = Theta
        self.mass = mass
        self.xi = pert.grid.xi
        self._I0 = CubicSpline(self.xi, pert.I0.values, axis=0)
        self._I1 = CubicSpline(self.xi, pert.I1.values, axis=0)
        self._dI0 = self._I0.derivative()
        self._dI1 = self._I1.derivative()
        w = kernels.weights
        self._wK1 = w * kernels.K1
        self._wK2 = w * kernels.K2
        self._pen = np.asarray(pert.p_en(kernels.eta), dtype=float)
        self._pen_deriv = np.asarray(pert.p_en.deriv(kernels.eta), dtype=float)
        self.curvature = pert.curvature_bound()
        self.mass_ratio = pert.mass_ratio
        self._theta_sup2 = None

    def kernel_part(self, xi):
        """-(1/sigma)(int K1 I0 - int K2 I1) at a scalar xi."""
        if self.sigma == 0.0:
            return 0.0
        I0 = self._I0(xi)
        I1 = self._I1(xi)
        return float(-(self._wK1 @ I0) + (self._wK2 @ I1)) / self.sigma

    def __call__(self, xi):
        if np.ndim(xi):
            return np.array([self(x) for x in np.asarray(xi, dtype=float)])
        tail = theta_integral(self.Theta, float(xi), self.L)
        return self.kernel_part(float(xi)) + self.kernels.A_plus_mbar * tail

    def derivative(self, xi):
        """J1'(xi) through the spline derivatives of I0, I1."""
        if self.sigma == 0.0:
            kp = 0.0
        else:
            kp = float(-(self._wK1 @ self._dI0(xi)) + (self._wK2 @ self._dI1(xi))) / self.sigma
        return kp - self.kernels.A_plus_mbar * float(self.Theta(xi))

    def second_derivative_at_zero(self):
        """Closed form: int K/q_- (p_en' - r g / (sigma q_-)) d eta,
        r = m - m_bar over m_bar."""
        k = self.kernels
        prof = k.prof
        drive = self._pen_deriv.copy()
        if self.sigma != 0.0:
            drive = drive - (self.mass_ratio / self.sigma) * k.g / prof.qm
        return float(np.sum(k.weights * k.K / prof.qm * drive))

    def window_constant(self, theta_sup2):
        """The curvature bound entering the admissible-window constants."""
        k = self.kernels
        return self.curvature * float(np.sum(k.weights * np.abs(k.K))) + float(
            np.max(np.abs(k.K2 - k.A_plus))
        ) * theta_sup2


def evaluate_J(kernels, pert, Theta, sigma, L, p_ex, mass):
    """Build the J1 functional and the scalar J2.

    J2 composes the exit datum with the background exit map (the cumulative
    trapezoid of 1/(rho_+ q_+)) and pairs the entrance datum with K4.
    """
    j1 = J1Functional(kernels, pert, Theta, sigma, L, mass)
    w = kernels.weights
    pex_vals = np.asarray(p_ex(kernels.exit_map_bg), dtype=float)
    j2 = float(np.sum(w * kernels.K3 * pex_vals) - np.sum(w * kernels.K4 * j1._pen))
    return j1, j2


@dataclass
class ShockPositionReport:
    """Outcome of the admissible-window analysis and the root search."""

    K0: float | None
    J2: float
    J1_at_0: float
    J1_second_deriv_0: float
    lemma_case: str  # "positive" | "negative" | "degenerate"
    L_star: float
    L0: float
    Ihat: float
    J1_window_edge: float
    window_ok: bool
    slope_condition_ok: bool
    J1_samples: np.ndarray
    xi_samples: np.ndarray
    root_residual: float | None

    def manifest(self, prefix="locate"):
        return {
            f"{prefix}.K0": self.K0,
            f"{prefix}.J2": self.J2,
            f"{prefix}.J1_at_0": self.J1_at_0,
            f"{prefix}.J1pp0": self.J1_second_deriv_0,
            f"{prefix}.lemma_case": self.lemma_case,
            f"{prefix}.L_star": self.L_star,
            f"{prefix}.L0": self.L0,
            f"{prefix}.Ihat": self.Ihat,
            f"{prefix}.window_edge": self.J1_window_edge,
            f"{prefix}.window_ok": self.window_ok,
            f"{prefix}.slope_ok": self.slope_condition_ok,
            f"{prefix}.root_residual": self.root_residual,
        }


def locate_shock(j1, j2, kernels, L, theta_sup2=0.0, n_scan=64, degenerate_tol=1e-12):
    """Determine the admissible shock abscissa from J1(K0) = J2.

    The sign of J1''(0) selects the monotone case (increasing or
    decreasing); the window constants then bound the interval (0, L0) on
    which J1 is strictly monotone, and a Brent search finds the unique root
    when J2 lies inside the attained window. Window violations produce a
    no-root report rather than an exception.
    """
    jpp0 = j1.second_derivative_at_zero()
    j1_0 = j1(0.0)
    scale = max(abs(j1_0), abs(j2), 1.0)
    if abs(jpp0) <= degenerate_tol * scale:
        return ShockPositionReport(
            K0=None, J2=j2, J1_at_0=j1_0, J1_second_deriv_0=jpp0,
            lemma_case="degenerate", L_star=math.inf, L0=0.0, Ihat=0.0,
            J1_window_edge=0.0, window_ok=False, slope_condition_ok=False,
            J1_samples=np.array([]), xi_samples=np.array([]), root_residual=None,
        )

    Ihat = j1.window_constant(theta_sup2)
    positive = jpp0 > 0
    L_star = math.inf if Ihat == 0.0 else 2.0 * abs(jpp0) / Ihat
    L0 = min(L_star, L) * (1.0 - 1e-12)
    if positive:
        edge = L0**2 / 6.0 * (3.0 * jpp0 - L0 * Ihat)
        window_ok = j1_0 < j2 < j1_0 + edge
    else:
        edge = L0**2 / 6.0 * (3.0 * jpp0 + L0 * Ihat)
        window_ok = j1_0 + edge < j2 < j1_0
    slope_ok = (edge > 0) if positive else (edge < 0)

    xi_scan = np.linspace(0.0, L0, n_scan + 1)
    j1_scan = j1(xi_scan)
    K0 = None
    residual = None
    if window_ok and slope_ok:
        delta = 1e-9 * L
        a, b = delta, L0 - delta
        f = lambda x: j1(x) - j2
        fa, fb = f(a), f(b)
        bracket = None
        if fa * fb <= 0:
            bracket = (a, b)
        else:
            vals = j1_scan - j2
            for i in range(n_scan):
                if vals[i] * vals[i + 1] <= 0:
                    bracket = (max(xi_scan[i], delta), min(xi_scan[i + 1], b))
                    break
        if bracket is not None:
            K0 = float(brentq(f, *bracket, xtol=1e-12 * L, rtol=8.9e-16))
            residual = float(f(K0))
    return ShockPositionReport(
        K0=K0, J2=j2, J1_at_0=j1_0, J1_second_deriv_0=jpp0,
        lemma_case="positive" if positive else "negative",
        L_star=L_star, L0=L0, Ihat=Ihat, J1_window_edge=edge,
        window_ok=window_ok, slope_condition_ok=slope_ok,
        J1_samples=j1_scan, xi_samples=xi_scan, root_residual=residual,
    )


def shock_data_functional(kernels, h1):
    """int A_+/(rho_+ q_+) h1 d eta with the shared trapezoid weights."""
    return float(
        np.sum(kernels.weights * kernels.A_plus / (kernels.prof.rhop * kernels.prof.qp) * h1)
    )


def exit_amplitude_for_window(j1, kernels, p_en, pex_shape, L, zeta=0.9, theta_sup2=0.0):
    """Scale factor for the exit-pressure shape placing J2 inside the window.

    With the monotone case's guaranteed rise edge = J1hat(L0), setting
    J2 = J1(0) + zeta*edge (0 < zeta < 1) guarantees a unique admissible
    root. Returns (amplitude, window_edge, L0).
    """
    jpp0 = j1.second_derivative_at_zero()
    Ihat = j1.window_constant(theta_sup2)
    if Ihat == 0.0 or jpp0 == 0.0:
        raise ValueError("degenerate window: no entrance drive")
    L_star = 2.0 * abs(jpp0) / Ihat
    L0 = min(L_star, L)
    sign = 1.0 if jpp0 > 0 else -1.0
    edge = L0**2 / 6.0 * (3.0 * jpp0 - sign * L0 * Ihat)
    w = kernels.weights
    denom = float(np.sum(w * kernels.K3 * np.asarray(pex_shape(kernels.exit_map_bg))))
    pen_term = float(np.sum(w * kernels.K4 * np.asarray(p_en(kernels.eta))))
    target = j1(0.0) + zeta * edge
    return (target + pen_term) / denom, edge, L0


def j1_kform(j1, kernels, pert, xi):
    """The integrated-by-parts form of J1 (cross-check, agrees to O(h^2)):

        -(1/sigma) int K I0 + K2(m_bar) int_0^xi Theta + A_+(m_bar) int_xi^L Theta.
    """
    w = kernels.weights
    if j1.sigma == 0.0:
        kp = 0.0
    else:
        kp = -float(np.sum(w * kernels.K * j1._I0(xi))) / j1.sigma
    return (
        kp
        + kernels.K2_mbar * theta_integral(j1.Theta, 0.0, xi)
        + kernels.A_plus_mbar * theta_integral(j1.Theta, xi, j1.L)
    )
