"""Shared fixtures: the canonical stratified background and the tuned
perturbed-shock configuration used by the locator/iteration tests."""

import numpy as np
import pytest

from gravshock import background, gas, geometry, iteration, locator, profiles, supersonic
from gravshock.fields import Grid

# canonical column: gamma=1.4, unit upstream speed, M(1)^2 = 2, unit top pressure
CANONICAL = dict(gamma=1.4, A=1.0, c_v=1.0, g=0.1, q=1.0, t1=0.5, pm1=1.0)

# perturbed-shock reference: faster column, stronger gravity, short nozzle
REFERENCE = dict(gamma=1.4, A=1.0, c_v=1.0, g=0.3, q=3.0, t1=0.2, pm1=1.0,
                 L=0.5, alpha=0.5, amplitude=0.015, zeta=0.9)


@pytest.fixture(scope="session")
def canonical_bg():
    c = CANONICAL
    consts = gas.GasConstants(gamma=c["gamma"], A=c["A"], c_v=c["c_v"], g=c["g"])
    return background.build_background(
        profiles.constant_profile(c["q"]), c["t1"], c["pm1"], consts, N=1024
    )


@pytest.fixture(scope="session")
def reference_bg():
    c = REFERENCE
    consts = gas.GasConstants(gamma=c["gamma"], A=c["A"], c_v=c["c_v"], g=c["g"])
    return background.build_background(
        profiles.constant_profile(c["q"]), c["t1"], c["pm1"], consts, N=1024
    )


def build_reference_problem(bg, sigma, n, zeta=None, amplitude=None, theta=None,
                            pex_zeta_shift=0.0):
    """Tuned perturbed problem: monotone entrance drive, exit amplitude
    placed a fraction zeta into the guaranteed window."""
    c = REFERENCE
    L = c["L"]
    zeta = c["zeta"] if zeta is None else zeta
    amplitude = c["amplitude"] if amplitude is None else amplitude
    theta = profiles.zero_profile() if theta is None else theta
    pf = background.monotone_entrance_profile(bg, sigma, amplitude)
    mass = geometry.MassCoordinate.build(bg, sigma, pf)
    p_en = geometry.entrance_transplant(pf, mass)
    grid = Grid(0.0, L, bg.m_bar, n, n)
    pert = supersonic.solve_linear_supersonic(
        bg, sigma, p_en, theta, grid, mass.mass_ratio
    )
    kern = locator.compute_kernels(bg, grid.eta)
    j1, _ = locator.evaluate_J(
        kern, pert, theta, sigma, L, profiles.constant_profile(1.0), mass
    )
    theta_sup2 = float(np.max(np.abs(theta.deriv2(np.linspace(0, L, 257)))))
    amp, edge, L0 = locator.exit_amplitude_for_window(
        j1, kern, p_en, profiles.constant_profile(1.0), L,
        zeta=zeta + pex_zeta_shift, theta_sup2=theta_sup2,
    )
    wp1, wp2, lmax = background.length_bound(bg, c["alpha"])
    prob, rep = iteration.setup_problem(
        bg, L, sigma, pf, theta, profiles.constant_profile(amp), n, n, l_max=lmax
    )
    return prob, rep


@pytest.fixture(scope="session")
def reference_problem_128(reference_bg):
    prob, rep = build_reference_problem(reference_bg, 1e-3, 128)
    assert prob is not None
    return prob, rep


@pytest.fixture(scope="session")
def reference_solution_128(reference_problem_128):
    prob, _ = reference_problem_128
    return iteration.fixed_point(prob)
