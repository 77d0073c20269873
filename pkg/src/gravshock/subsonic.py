"""Subsonic reconstruction behind the shock via two potentials.

Given interior sources F1..F3, shock data h1..h3, an exit-pressure datum
and a wall-angle datum, the linear problem

    d/dxi (K3-coef dp) - d/deta (A_+ dtheta) = F1
    d/dxi (q_+/A_+ dtheta) + d/deta (dp/A_+) + g^2/(q_+^3 A_+) int_K^xi dtheta = F2
    d/dxi (dp/rho_+ + q_+ dq + T_+ dS) + g dtheta = F3
    d/dxi dS = 0

splits into a pure-Neumann potential Phi absorbing F1 (with the auxiliary
constant H chosen so the Neumann problem balances) and a Dirichlet potential
Psi for the remainder, whose zero-order g^2 term is dominated by the short
nozzle. The pressure/angle pair is recovered from the potential gradients,
speed and entropy by xi-integration of the transport rows.

The two Dirichlet data strips meet at the shock/top-wall corner only if the
boundary data satisfy an integral identity; the corner mismatch equals the
solvability-functional residual and both are reported.
"""

from dataclasses import dataclass, field

import numpy as np

from .elliptic import DirichletHelmholtz, NeumannPoisson
from .errors import CoercivityError
from .fields import Field2D, Grid
from .quadrature import cumtrapz_from, cumulative_simpson_from, trapezoid_weights
from .quadrature import diff_1d


@dataclass
class SubsonicSources:
    """Everything the linear subsonic solve consumes, already sampled.

    p_ex_vals includes the sigma factor and the exit-map composition;
    theta_wall_vals and theta_tail_vals are sigma*Theta at the pulled-back
    wall abscissa and its tail integrals int_xi^L.
    """

    F1: np.ndarray
    F2: np.ndarray
    F3: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    p_ex_vals: np.ndarray
    theta_wall_vals: np.ndarray
    theta_tail_vals: np.ndarray
    sigma: float


@dataclass
class SubsonicSolution:
    dp: Field2D
    dtheta: Field2D
    dq: Field2D
    dS: Field2D
    H: float
    Phi: np.ndarray
    Psi: np.ndarray
    solvability_residual: float
    corner_mismatch: float
    compatibility_defect: float
    min_eig: float


class SubsonicSolver:
    """Grid-bound solver with both elliptic operators factorized once.

    Refuses construction when the nozzle length exceeds the admissible
    bound l_max (coercivity of the zero-order term would be unprovable) and
    double-checks positivity of the assembled operator by inverse iteration.
    """

    def __init__(self, bg, grid, l_max=None):
        self.bg = bg
        self.grid = grid
        self.L = grid.xi1
        self.K = grid.xi0
        g = bg.consts.g

        if l_max is not None and self.L > l_max:
            raise CoercivityError(
                f"nozzle length {self.L:.6g} exceeds the admissible bound "
                f"{l_max:.6g}; subsonic solve refused",
                l_max=l_max,
            )

        # profiles and A_+ on the doubled eta grid (nodes + midpoints)
        eta2 = np.linspace(0.0, grid.eta1, 2 * grid.ny + 1)
        prof2 = bg.at_eta(eta2)
        A2 = np.exp(-g * cumulative_simpson_from(1.0 / (prof2.rhop * prof2.qp**3), eta2))
        nodes = slice(0, None, 2)
        halves = slice(1, None, 2)
        self.prof = bg.at_eta(grid.eta)
        self.A_plus = A2[nodes]
        p2 = prof2
        coef_phi_a2 = (1.0 - p2.Mp2) / (p2.rhop**2 * p2.qp**3) * A2**2
        coef_phi_b2 = A2**2 / p2.qp
        coef_psi_c2 = p2.qp / A2**2
        coef_psi_d2 = p2.rhop**2 * p2.qp**3 / ((1.0 - p2.Mp2) * A2**2)
        coef_psi_e2 = g**2 / (p2.qp**3 * A2**2)

        # pointwise coercivity check mirroring the short-nozzle argument:
        # g^2 max(1/(q^3 A^2)) <= min(c, d)/(2 L^2)
        lhs = float(np.max(coef_psi_e2))
        rhs = float(np.min(np.minimum(coef_psi_c2, coef_psi_d2))) / (2.0 * self.L**2)
        if lhs > rhs:
            raise CoercivityError(
                "zero-order term too large for this nozzle length: "
                f"g^2/(q^3 A^2) max {lhs:.6g} > coefficient floor {rhs:.6g}",
                l_max=l_max,
            )

        self.phi_op = NeumannPoisson(grid, coef_phi_a2[nodes], coef_phi_b2[halves])
        self.psi_op = DirichletHelmholtz(
            grid, coef_psi_c2[nodes], coef_psi_d2[halves], coef_psi_e2[nodes]
        )
        self.coef_e = coef_psi_e2[nodes]
        self.weights_eta = trapezoid_weights(grid.eta)
        self.exit_map_bg = cumtrapz_from(1.0 / (self.prof.rhop * self.prof.qp), grid.eta)

    # -- auxiliary constant ------------------------------------------------

    def capacity(self):
        """int A_+/(rho_+ q_+) d eta with the solver's trapezoid weights."""
        return float(
            np.sum(self.weights_eta * self.A_plus / (self.prof.rhop * self.prof.qp))
        )

    def integrate_domain(self, F):
        """Volume-weighted double integral matching the Neumann balance."""
        return float(np.sum(F * np.outer(self.phi_op.wx, self.phi_op.we)))

    def auxiliary_constant(self, F1, sigma):
        """H with  iint F1 = -sigma H int A_+/(rho_+ q_+): makes the Phi
        problem's discrete Neumann compatibility hold by construction."""
        total = self.integrate_domain(F1)
        if sigma == 0.0:
            return 0.0 if total == 0.0 else -total / self.capacity()
        return -total / (sigma * self.capacity())

    # -- Phi: pure Neumann -------------------------------------------------

    def solve_phi(self, F1, H, sigma):
        """Potential for the F1 balance; returns (Phi, dp_sharp, dtheta_sharp).

        The shock-face flux is A_+ sigma H/(rho_+ q_+); the recovered
        pressure part takes its prescribed boundary values exactly on both
        vertical sides, the angle part vanishes on the walls.
        """
        prof = self.prof
        flux_left = self.A_plus * sigma * H / (prof.rhop * prof.qp)
        res = self.phi_op.solve(F1, flux_left, np.zeros_like(flux_left))
        phi = res.phi
        dphi_dxi = diff_1d(phi, self.grid.xi, axis=0)
        dphi_deta = diff_1d(phi, self.grid.eta, axis=1)
        dp_sharp = self.A_plus * dphi_dxi
        dp_sharp[0, :] = prof.rhop * prof.qp**2 / (1.0 - prof.Mp2) * sigma * H
        dp_sharp[-1, :] = 0.0
        dtheta_sharp = -(self.A_plus / prof.qp) * dphi_deta
        dtheta_sharp[:, 0] = 0.0
        dtheta_sharp[:, -1] = 0.0
        return phi, dp_sharp, dtheta_sharp, res

    # -- Psi: Dirichlet with zero-order term --------------------------------

    def psi_boundary_data(self, sources, H):
        """Assemble the four Dirichlet strips of the second potential.

        Bottom wall zero (gauge Psi(K, 0) = 0); shock side integrates the
        h1 - sigma H datum; exit side integrates the exit-pressure datum;
        top wall runs the exit corner value backwards through the wall-angle
        tail integrals. Returns (left, right, bottom, top, corner_mismatch).
        """
        prof = self.prof
        g_left = cumtrapz_from(
            self.A_plus / (prof.rhop * prof.qp) * (sources.h1 - sources.sigma * H),
            self.grid.eta,
        )
        K3 = (1.0 - prof.Mp2) / (prof.rhop**2 * prof.qp**3) * self.A_plus
        g_right = cumtrapz_from(K3 * sources.p_ex_vals, self.grid.eta)
        g_top = g_right[-1] - self.A_plus[-1] * sources.theta_tail_vals
        g_bottom = np.zeros(self.grid.nx + 1)
        corner_mismatch = float(g_top[0] - g_left[-1])
        return g_left, g_right, g_bottom, g_top, corner_mismatch

    def solve_psi(self, sources, H, dtheta_sharp):
        """Second potential: moves the known shock strip and the Phi-part
        angle history into the right side, then one Dirichlet solve."""
        prof = self.prof
        g = self.bg.consts.g
        g_left, g_right, g_bottom, g_top, mismatch = self.psi_boundary_data(sources, H)
        I_sharp = cumtrapz_from(dtheta_sharp.T, self.grid.xi).T  # int_K^xi dtheta#
        F2_eff = (
            sources.F2
            - g**2 / (prof.qp**3 * self.A_plus) * I_sharp
            + self.coef_e * g_left[None, :]
        )
        psi = self.psi_op.solve(F2_eff, g_left, g_right, g_bottom, g_top)

        dpsi_dxi = diff_1d(psi, self.grid.xi, axis=0)
        dpsi_deta = diff_1d(psi, self.grid.eta, axis=1)
        dtheta_hat = dpsi_dxi / self.A_plus
        dtheta_hat[:, 0] = 0.0
        dtheta_hat[:, -1] = sources.theta_wall_vals
        dp_hat = prof.rhop**2 * prof.qp**3 / ((1.0 - prof.Mp2) * self.A_plus) * dpsi_deta
        dp_hat[0, :] = prof.rhop * prof.qp**2 / (1.0 - prof.Mp2) * (
            sources.h1 - sources.sigma * H
        )
        dp_hat[-1, :] = sources.p_ex_vals
        return psi, dp_hat, dtheta_hat, mismatch

    # -- transport recovery --------------------------------------------------

    def recover_state(self, dp, dtheta, sources):
        """Entropy is the shock datum everywhere; speed integrates the
        Bernoulli row from the shock with cumulative trapezoids."""
        prof = self.prof
        g = self.bg.consts.g
        I_theta = cumtrapz_from(dtheta.T, self.grid.xi).T
        I_F3 = cumtrapz_from(sources.F3.T, self.grid.xi).T
        dq = (
            prof.qp / (1.0 - prof.Mp2) * sources.h1
            + sources.h2 / (prof.rhop * prof.qp)
            - dp / (prof.rhop * prof.qp)
            - g / prof.qp * I_theta
            + I_F3 / prof.qp
        )
        dS = np.broadcast_to(sources.h3, dp.shape).copy()
        return dq, dS

    # -- one full linear solve ----------------------------------------------

    def solve(self, sources):
        H = self.auxiliary_constant(sources.F1, sources.sigma)
        phi, dp_sharp, dtheta_sharp, neu = self.solve_phi(sources.F1, H, sources.sigma)
        psi, dp_hat, dtheta_hat, mismatch = self.solve_psi(sources, H, dtheta_sharp)
        dp = dp_sharp + dp_hat
        dtheta = dtheta_sharp + dtheta_hat
        dq, dS = self.recover_state(dp, dtheta, sources)
        residual = self.check_solvability(sources, H)
        mk = lambda v: Field2D(v, self.grid.xi, self.grid.eta)
        return SubsonicSolution(
            dp=mk(dp), dtheta=mk(dtheta), dq=mk(dq), dS=mk(dS),
            H=H, Phi=phi, Psi=psi,
            solvability_residual=residual,
            corner_mismatch=mismatch,
            compatibility_defect=neu.compatibility_defect,
            min_eig=self.psi_op.min_eig,
        )

    def check_solvability(self, sources, H=None):
        """Left minus right of the data identity

            int A_+/(rho q) h1 + A_+(mbar) int_K^L wall-angle
              = int K3 p_ex - iint F1;

        equals minus the Dirichlet corner mismatch up to the (tiny) Neumann
        compatibility defect.
        """
        prof = self.prof
        w = self.weights_eta
        K3 = (1.0 - prof.Mp2) / (prof.rhop**2 * prof.qp**3) * self.A_plus
        lhs = float(np.sum(w * self.A_plus / (prof.rhop * prof.qp) * sources.h1))
        lhs += self.A_plus[-1] * float(sources.theta_tail_vals[0])
        rhs = float(np.sum(w * K3 * sources.p_ex_vals)) - self.integrate_domain(sources.F1)
        return lhs - rhs
