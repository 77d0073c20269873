"""Acceptance suite: every criterion runs standalone at its stated tolerance
and prints one pass/fail line (run with -s to see them)."""

import time

import numpy as np

from gravshock import (
    background,
    diagnostics,
    gas,
    geometry,
    iteration,
    locator,
    profiles,
    supersonic,
)
from gravshock.elliptic import DirichletHelmholtz, NeumannPoisson
from gravshock.errors import CoercivityError
from gravshock.fields import Grid
from gravshock.quadrature import second_diff_at_start
from gravshock.subsonic import SubsonicSolver
from tests.conftest import CANONICAL, REFERENCE, build_reference_problem
from tests.test_supersonic import corner_smooth_entrance


def report(index, label, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {index}: {label} {detail}")
    return ok


def test_criterion_1_background_equivalence(canonical_bg):
    consts = gas.GasConstants(**{k: CANONICAL[k] for k in ("gamma", "A", "c_v", "g")})
    qm = profiles.constant_profile(1.0)
    start = time.perf_counter()
    y, t, _ = background.inverse_mach_profile(qm, 0.5, consts, N=1000)
    _, t_ode = background.integrate_t_ode(qm, 0.5, consts, n_steps=1000)
    elapsed = time.perf_counter() - start
    err_t = float(np.max(np.abs(t - t_ode)))

    errs = []
    for N in (256, 512, 1024):
        bg = background.build_background(qm, 0.5, 1.0, consts, N=N)
        errs.append(background.hydrostatic_residual(bg.y, bg.pp, bg.rhop, consts.g))
    order = np.polyfit(np.log([1 / 256, 1 / 512, 1 / 1024]), np.log(errs), 1)[0]

    ok = err_t < 1e-8 and elapsed < 1.0 and order >= 1.9
    assert report(1, "background equivalence", ok,
                  f"(closed-vs-march {err_t:.2e}, {elapsed:.2f}s, "
                  f"downstream hydrostatic order {order:.2f})")


def test_criterion_2_jump_exactness(canonical_bg):
    bg = canonical_bg
    worst = 0.0
    for j in range(0, bg.y.size, 16):
        minus = gas.GasState(p=bg.pm[j], theta=0.0, q=bg.qm[j], S=bg.Sm[j])
        plus = gas.GasState(p=bg.pp[j], theta=0.0, q=bg.qp[j], S=bg.Sp[j])
        res = gas.rh_residuals(minus, plus, 0.0, bg.consts)
        worst = max(worst, float(np.max(np.abs(res.relative))))

    consts = bg.consts
    st = gas.GasState(p=1.0, theta=0.0, q=2.0 * np.sqrt(1.4),
                      S=float(gas.entropy(1.0, 1.0, consts)))
    ratio = gas.rh_downstream(st, consts).p / st.p
    classical = abs(ratio - 4.5)

    ok = worst < 1e-12 and classical < 1e-12 * 4.5
    assert report(2, "jump-relation exactness", ok,
                  f"(max relative residual {worst:.2e}, M=2 ratio defect {classical:.2e})")


def test_criterion_3_supersonic_identities(canonical_bg):
    sigma, ratio = 1e-3, 1e-3
    p_en = corner_smooth_entrance(canonical_bg, sigma, ratio)
    theta = profiles.sin_bump_profile(0.5, 1.0)
    errs1, errs2, hs = [], [], []
    for n in (64, 128, 256):
        grid = Grid(0.0, 1.0, canonical_bg.m_bar, n, n)
        pert = supersonic.solve_linear_supersonic(
            canonical_bg, sigma, p_en, theta, grid, ratio
        )
        r1, r2 = supersonic.march_invariant_residuals(pert, canonical_bg)
        errs1.append(r1)
        errs2.append(r2)
        hs.append(1.0 / n)
    order1 = np.polyfit(np.log(hs), np.log(errs1), 1)[0]
    order2 = np.polyfit(np.log(hs), np.log(errs2), 1)[0]

    # exact-solution configuration: entrance slope balancing the mass excess
    g = canonical_bg.consts.g
    slope = ratio * g / sigma
    exact_pen = profiles.Profile(
        lambda e: 0.5 + slope * np.asarray(e, float),
        lambda e: np.full_like(np.asarray(e, float), slope),
        lambda e: np.zeros_like(np.asarray(e, float)),
    )
    grid = Grid(0.0, 1.0, canonical_bg.m_bar, 512, 96)
    pert = supersonic.solve_linear_supersonic(
        canonical_bg, sigma, exact_pen, profiles.zero_profile(), grid, ratio
    )
    dtheta_max = pert.dtheta.max_abs()

    ok = order1 >= 1.9 and order2 >= 1.9 and dtheta_max < 1e-8
    assert report(3, "supersonic identities", ok,
                  f"(orders {order1:.2f}/{order2:.2f}, exact-config angle "
                  f"{dtheta_max:.2e})")


def test_criterion_4_locator_correctness(reference_bg):
    sigma, L = 1e-3, REFERENCE["L"]
    ratio = 1e-3
    p_en = corner_smooth_entrance(reference_bg, sigma, ratio)
    theta = profiles.sin_bump_profile(0.3, L)
    grid = Grid(0.0, L, reference_bg.m_bar, 256, 512)
    pert = supersonic.solve_linear_supersonic(reference_bg, sigma, p_en, theta,
                                              grid, ratio)
    kern = locator.compute_kernels(reference_bg, grid.eta)
    mass = geometry.MassCoordinate.build(reference_bg, 0.0, profiles.zero_profile())
    j1 = locator.J1Functional(kern, pert, theta, sigma, L, mass)
    j1.mass_ratio = ratio

    j1_zero = j1(0.0)
    theta_int = kern.A_plus_mbar * locator.theta_integral(theta, 0.0, L)
    check_a = abs(j1_zero - theta_int) <= 1e-12 * max(abs(theta_int), 1e-6)

    # derivative checks on the entrance-driven response: the wall angle
    # contributes nothing to either derivative at the entrance (triple
    # zero) but its curvature would dominate raw finite differences
    zero = profiles.zero_profile()
    pert0 = supersonic.solve_linear_supersonic(reference_bg, sigma, p_en, zero,
                                               grid, ratio)
    j1d = locator.J1Functional(kern, pert0, zero, sigma, L, mass)
    j1d.mass_ratio = ratio
    h = grid.h_xi
    fd_slope = (-3 * j1d(0.0) + 4 * j1d(h) - j1d(2 * h)) / (2 * h)
    closed = j1d.second_derivative_at_zero()
    scale = 100.0 * (abs(closed) + 1.0)
    check_b = abs(fd_slope) < h**2 * scale

    samples = np.array([j1d(k * h) for k in range(4)])
    fd_second = second_diff_at_start(samples, h)
    check_c = abs(fd_second - closed) <= 1e-3 * abs(closed)

    # root vs bisection oracle and exit-pressure monotonicity (tuned window)
    prob, rep = build_reference_problem(reference_bg, sigma, 128)
    f = lambda x: prob.j1(x) - prob.j2
    a, b = 1e-9 * L, rep.L0 * (1 - 1e-9)
    fa = f(a)
    for _ in range(60):
        m = 0.5 * (a + b)
        if fa * f(m) <= 0:
            b = m
        else:
            a, fa = m, f(m)
    check_d = abs(0.5 * (a + b) - prob.K0) <= 1e-10 * L

    ks = []
    for shift in (0.0, 0.03):
        p2, _ = build_reference_problem(reference_bg, sigma, 128, pex_zeta_shift=shift)
        ks.append(p2.K0)
    check_e = ks[1] > ks[0]

    ok = all((check_a, check_b, check_c, check_d, check_e))
    assert report(4, "locator correctness", ok,
                  f"(J1(0) defect {abs(j1_zero - theta_int):.1e}, slope {fd_slope:.1e}, "
                  f"J1''(0) rel {abs(fd_second - closed) / abs(closed):.1e}, "
                  f"brent-bisect {abs(0.5 * (a + b) - prob.K0):.1e}, "
                  f"K0 monotone {check_e})")


def test_criterion_5_elliptic_solvers(reference_bg):
    K, L, m = 0.3, 1.1, 0.9
    a = lambda e: 2.0 + np.cos(np.pi * e / m)
    b = lambda e: 1.5 + 0.5 * np.sin(np.pi * e / m)
    db = lambda e: 0.5 * np.pi / m * np.cos(np.pi * e / m)
    e_coef = lambda e: 0.7 + 0.2 * np.cos(np.pi * e / m)
    wx, we = np.pi / (L - K), np.pi / m

    def neumann_err(n):
        grid = Grid(K, L, m, n, n)
        X, E = np.meshgrid(grid.xi, grid.eta, indexing="ij")
        exact = np.cos(wx * (X - K)) * np.cos(we * E)
        F = (-a(E) * wx**2 * exact
             - db(E) * we * np.cos(wx * (X - K)) * np.sin(we * E)
             - b(E) * we**2 * exact)
        op = NeumannPoisson(grid, a(grid.eta), b(grid.eta_half()))
        res = op.solve(F, np.zeros(n + 1), np.zeros(n + 1), project=True)
        shifted = exact - op.weighted_mean(exact)
        return float(np.max(np.abs(res.phi - shifted)))

    def dirichlet_err(n):
        grid = Grid(K, L, m, n, n)
        X, E = np.meshgrid(grid.xi, grid.eta, indexing="ij")
        exact = np.sin(wx * (X - K)) * np.sin(we * E)
        F = (-a(E) * wx**2 * exact
             + db(E) * we * np.sin(wx * (X - K)) * np.cos(we * E)
             - b(E) * we**2 * exact
             + e_coef(E) * exact)
        op = DirichletHelmholtz(grid, a(grid.eta), b(grid.eta_half()),
                                e_coef(grid.eta))
        z = np.zeros(n + 1)
        return float(np.max(np.abs(op.solve(F, z, z, z, z) - exact)))

    hs = [1 / 16, 1 / 32, 1 / 64]
    order_n = np.polyfit(np.log(hs), np.log([neumann_err(n) for n in (16, 32, 64)]), 1)[0]
    order_d = np.polyfit(np.log(hs), np.log([dirichlet_err(n) for n in (16, 32, 64)]), 1)[0]

    # physics path: compatibility after H and the zero-mean gauge
    grid = Grid(0.2, REFERENCE["L"], reference_bg.m_bar, 48, 48)
    solver = SubsonicSolver(reference_bg, grid)
    rng = np.random.default_rng(9)
    F1 = 1e-4 * rng.standard_normal((49, 49))
    H = solver.auxiliary_constant(F1, 1e-3)
    phi, _, _, res = solver.solve_phi(F1, H, 1e-3)
    defect = abs(res.compatibility_defect)
    gauge = abs(solver.phi_op.weighted_mean(phi))

    ok = (1.9 <= order_n <= 2.1 and 1.9 <= order_d <= 2.1
          and defect < 1e-10 and gauge < 1e-12)
    assert report(5, "elliptic solvers", ok,
                  f"(orders {order_n:.2f}/{order_d:.2f}, compat {defect:.1e}, "
                  f"gauge {gauge:.1e})")


def test_criterion_6_solvability_corner_continuity(reference_bg):
    sigma = 1e-3
    prob, rep = build_reference_problem(reference_bg, sigma, 256)
    it0, sol0, _ = iteration.initial_iterate(prob)
    mismatch = sol0.corner_mismatch
    residual = sol0.solvability_residual
    agree = abs(mismatch + residual)
    grid_tol = (prob.grid_plus.h_xi**2 + prob.grid_plus.h_eta**2)
    ok = (agree <= grid_tol * max(abs(mismatch), sigma)
          and abs(mismatch) < 1e-6 * sigma and abs(residual) < 1e-6 * sigma)
    assert report(6, "solvability equals corner continuity", ok,
                  f"(mismatch {mismatch:.2e}, residual {residual:.2e}, "
                  f"agreement {agree:.2e})")


def test_criterion_7_contraction(reference_bg):
    sigma = 1e-3
    start = time.perf_counter()
    prob, _ = build_reference_problem(reference_bg, sigma, 256)
    solution = iteration.fixed_point(prob, tol_fp=1e-10 * sigma)
    elapsed = time.perf_counter() - start
    ratios = [r.ratio for r in solution.history if r.ratio is not None]
    ok = (solution.converged and solution.n_iterations <= 15
          and ratios[0] <= 0.5 and elapsed < 60.0)
    assert report(7, "fixed-point contraction", ok,
                  f"(first ratio {ratios[0]:.4f}, {solution.n_iterations} iterations, "
                  f"{elapsed:.1f}s at 256x256)")


def test_criterion_8_main_theorem_scaling(reference_bg):
    sigmas = (1e-2, 1e-3, 1e-4)
    norm_ratios, travel_ratios = [], []
    for sigma in sigmas:
        prob, _ = build_reference_problem(reference_bg, sigma, 128)
        sol = iteration.fixed_point(prob)
        assert sol.converged
        norm = diagnostics.composite_weighted_norm(
            sol.iterate, prob.grid_plus, REFERENCE["alpha"], prob.K0
        )
        norm_ratios.append(norm / sigma)
        travel_ratios.append(abs(sol.iterate.psi_mbar - prob.K0) / sigma)

    def deviation(vals):
        return (max(vals) - min(vals)) / np.mean(vals)

    dev_n, dev_t = deviation(norm_ratios), deviation(travel_ratios)
    ok = dev_n < 0.10 and dev_t < 0.10
    assert report(8, "main-theorem scaling", ok,
                  f"(norm/sigma {[f'{v:.4f}' for v in norm_ratios]} dev {dev_n:.1%}, "
                  f"|psi(m)-K0|/sigma {[f'{v:.4f}' for v in travel_ratios]} "
                  f"dev {dev_t:.1%})")


def test_criterion_9_end_to_end_residuals(reference_bg):
    grids = (64, 96, 128)
    sigmas = (1e-2, 1e-3)
    constants = {s: [] for s in sigmas}
    rh_worst = 0.0
    for sigma in sigmas:
        for n in grids:
            prob, _ = build_reference_problem(reference_bg, sigma, n)
            sol = iteration.fixed_point(prob)
            assert sol.converged
            rep = diagnostics.nonlinear_residual(sol)
            h2 = max(prob.grid_plus.h_xi, prob.grid_plus.h_eta) ** 2
            constants[sigma].append(rep.equation_core() / (h2 + sigma**3))
            rh_worst = max(rh_worst, rep.rh_max)
    stable = all(
        max(vals) / min(vals) < 3.0 for vals in constants.values()
    )
    ok = stable and rh_worst < 1e-8
    detail = {f"{s:g}": [f"{c:.2e}" for c in constants[s]] for s in sigmas}
    assert report(9, "end-to-end residual bound", ok,
                  f"(C per grid {detail}, jump residual {rh_worst:.1e})")


def test_criterion_10_degenerate_gates(reference_bg):
    prob, _ = iteration.setup_problem(
        reference_bg, REFERENCE["L"], 0.0, profiles.zero_profile(),
        profiles.zero_profile(), profiles.zero_profile(), 64, 64,
        K0=0.45 * REFERENCE["L"],
    )
    sol = iteration.fixed_point(prob)
    fields_small = all(
        np.max(np.abs(arr)) <= 1e-13
        for arr in (sol.iterate.dp, sol.iterate.dtheta, sol.iterate.dq,
                    sol.iterate.dS, sol.iterate.psi_prime)
    )
    gate_a = sol.converged and sol.n_iterations == 1 and fields_small

    wp1, wp2, lmax = background.length_bound(reference_bg, REFERENCE["alpha"])
    grid = Grid(0.2, REFERENCE["L"], reference_bg.m_bar, 16, 16)
    try:
        SubsonicSolver(reference_bg, grid, l_max=0.3 * REFERENCE["L"])
        gate_b = False
    except CoercivityError:
        gate_b = True

    ok = gate_a and gate_b
    assert report(10, "degenerate gates", ok,
                  f"(sigma=0 one-iteration {gate_a}, length gate {gate_b})")
