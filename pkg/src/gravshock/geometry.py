"""Mass coordinates, the entrance-data transplant, and the shock-fixing map.

The second coordinate eta is the scaled stream function: walls map to
eta = 0 and eta = m_bar for any wall shape, and the unknown shock curve
xi = psi(eta) is sent to the vertical line xi = K by

    L_K:      xi_tilde = L + (L - K)/(L - psi(eta)) * (xi - L),
    inverse:  xi = L + (L - psi(eta))/(L - K) * (xi_tilde - L),

which fixes the exit xi = L pointwise.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import gas
from .errors import DegenerateMapError, InvalidPerturbationError
from .profiles import Profile
from .quadrature import cumulative_simpson_from, simpson_integral


def mass_flux_excess(bg, sigma, p_en_sharp):
    """(m_bar, m - m_bar) with the excess integrated in factored form.

    m_bar = int_0^1 rho_- q_- dy,
    m - m_bar = int ((1 + sigma p_en/p_-)^(1/gamma) - 1) rho_- q_- dy,

    both by composite Simpson on the background grid; factoring keeps the
    excess's rounding proportional to sigma.
    """
    flux = bg.rhom * bg.qm
    m_bar = simpson_integral(flux, bg.y)
    if sigma == 0.0:
        return m_bar, 0.0
    rel = sigma * np.asarray(p_en_sharp(bg.y), dtype=float) / bg.pm
    if np.any(rel <= -1.0):
        j = int(np.argmin(rel))
        raise InvalidPerturbationError(
            f"perturbed entrance pressure non-positive at y = {bg.y[j]:.6g}"
        )
    excess = simpson_integral(np.expm1(np.log1p(rel) / bg.consts.gamma) * flux, bg.y)
    return m_bar, excess


def mass_flux_constants(bg, sigma, p_en_sharp):
    """Total background and perturbed entrance mass fluxes (m_bar, m).

    sigma = 0 gives m = m_bar exactly.
    """
    m_bar, excess = mass_flux_excess(bg, sigma, p_en_sharp)
    return m_bar, m_bar + excess


@dataclass
class MassCoordinate:
    """Monotone map between height y and mass coordinate eta at the entrance.

    Built from the perturbed entrance state (density from the perturbed
    pressure at unperturbed entropy and speed); with sigma = 0 it reduces to
    the background map. eta runs over [0, m_bar] with y(0) = 0, y(m_bar) = 1.
    """

    m_bar: float
    m: float
    y_samples: np.ndarray
    eta_samples: np.ndarray
    _y_of_eta: CubicSpline = field(repr=False)
    _eta_of_y: CubicSpline = field(repr=False)
    excess: float = 0.0

    @classmethod
    def build(cls, bg, sigma, p_en_sharp):
        m_bar, excess = mass_flux_excess(bg, sigma, p_en_sharp)
        m = m_bar + excess
        if sigma == 0.0:
            rho_en = bg.rhom
        else:
            rho_en = np.asarray(
                gas.density(
                    bg.pm + sigma * np.asarray(p_en_sharp(bg.y), dtype=float),
                    bg.Sm,
                    bg.consts,
                ),
                dtype=float,
            )
        flux = rho_en * bg.qm
        eta = (m_bar / m) * cumulative_simpson_from(flux, bg.y)
        eta[-1] = m_bar  # pin the endpoint against quadrature rounding
        return cls(
            m_bar=m_bar,
            m=m,
            y_samples=bg.y,
            eta_samples=eta,
            _y_of_eta=CubicSpline(eta, bg.y),
            _eta_of_y=CubicSpline(bg.y, eta),
            excess=excess,
        )

    @property
    def mass_ratio(self):
        """(m - m_bar)/m_bar, the entrance mass-flux excess."""
        return self.excess / self.m_bar

    def y_of_eta(self, eta):
        return self._y_of_eta(eta)

    def eta_of_y(self, y):
        return self._eta_of_y(y)

    def dy_deta(self, eta):
        return self._y_of_eta(eta, 1)


def entrance_transplant(p_en_sharp, mass):
    """Entrance pressure shape as a function of the mass coordinate.

    p_en(eta) = p_en_sharp(y(0, eta)); monotonicity of the composition map
    preserves monotonicity of the data. The derivative uses the chain rule
    through the entrance mass map.
    """

    def f(eta):
        return p_en_sharp(mass.y_of_eta(eta))

    def d1(eta):
        return p_en_sharp.deriv(mass.y_of_eta(eta)) * mass.dy_deta(eta)

    def d2(eta):
        y = mass.y_of_eta(eta)
        dy = mass.dy_deta(eta)
        d2y = mass._y_of_eta(eta, 2)
        return p_en_sharp.deriv2(y) * dy**2 + p_en_sharp.deriv(y) * d2y

    return Profile(f, d1, d2, name=f"{p_en_sharp.name} o y(0,eta)")


@dataclass(frozen=True)
class ShockFixMap:
    """The coordinate change freezing the shock line, and its inverse."""

    K: float
    L: float
    psi: object  # callable eta -> shock abscissa

    def _check(self, psi_vals):
        if np.any(np.asarray(psi_vals) >= self.L):
            raise DegenerateMapError("shock position reaches the nozzle exit")

    def forward(self, xi, eta):
        """(xi, eta) -> (xi_tilde, eta); sends xi = psi(eta) to xi = K."""
        psi_vals = np.asarray(self.psi(eta), dtype=float)
        self._check(psi_vals)
        return self.L + (self.L - self.K) / (self.L - psi_vals) * (
            np.asarray(xi, dtype=float) - self.L
        )

    def inverse(self, xi_tilde, eta):
        psi_vals = np.asarray(self.psi(eta), dtype=float)
        self._check(psi_vals)
        return self.L + (self.L - psi_vals) / (self.L - self.K) * (
            np.asarray(xi_tilde, dtype=float) - self.L
        )

    def jacobian(self, eta):
        """d xi_tilde / d xi = (L - K)/(L - psi); positive while psi < L."""
        psi_vals = np.asarray(self.psi(eta), dtype=float)
        self._check(psi_vals)
        return (self.L - self.K) / (self.L - psi_vals)


def wall_theta_argument(xi, K, L, psi_mbar):
    """Pull the top-wall abscissa back through the shock-fixing map.

    The wall-angle datum at the fixed-domain point xi is the physical angle
    at (L (psi(m_bar) - K) + (L - psi(m_bar)) xi) / (L - K); the identity map
    when psi(m_bar) = K.
    """
    return (L * (psi_mbar - K) + (L - psi_mbar) * np.asarray(xi, dtype=float)) / (L - K)


def reconstruct_psi(psi_prime, eta, psi_mbar):
    """psi(eta) = psi(m_bar) - int_eta^{m_bar} psi' by cumulative trapezoid."""
    from .quadrature import cumtrapz_to_end

    return psi_mbar - cumtrapz_to_end(psi_prime, eta)
