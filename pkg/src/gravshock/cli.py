"""Command-line pipeline: background -> locate -> solve -> verify.

Exit codes: 0 success, 2 invalid background or config, 3 nozzle length
above the admissible bound, 4 shock-position window violated (no root),
5 fixed-point failure (no contraction or stagnation). Every run writes a
manifest echoing the resolved configuration.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import background as bgmod
from . import diagnostics
from .config import (
    build_problem_inputs,
    fields_to_csv,
    load_config,
    write_manifest,
)
from .errors import (
    ConfigError,
    CoercivityError,
    DivergenceError,
    GravshockError,
    InvalidBackgroundError,
    InvalidPerturbationError,
    NonContractionError,
)
from .iteration import fixed_point, setup_problem

EXIT_OK = 0
EXIT_BACKGROUND = 2
EXIT_LENGTH = 3
EXIT_WINDOW = 4
EXIT_FIXED_POINT = 5


def _outdir(cfg, override=None):
    out = Path(override) if override else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_background(cfg, out_override=None):
    out = _outdir(cfg, out_override)
    bg, p_en, theta, p_ex, report = build_problem_inputs(cfg)
    bg.to_csv(out / "background.csv")
    entries = cfg.manifest()
    entries.update(report.manifest())
    entries["background.m_bar"] = bg.m_bar
    entries["background.hydrostatic_residual_up"] = bgmod.hydrostatic_residual(
        bg.y, bg.pm, bg.rhom, bg.consts.g
    )
    entries["background.hydrostatic_residual_down"] = bgmod.hydrostatic_residual(
        bg.y, bg.pp, bg.rhop, bg.consts.g
    )
    write_manifest(out / "background_manifest.txt", entries)
    if not report.length_ok:
        print(
            f"nozzle length {cfg.L} exceeds the admissible bound "
            f"Lmax = {report.Lmax:.6g}",
            file=sys.stderr,
        )
        return EXIT_LENGTH
    if not report.cc01_ok:
        print(
            "warning: entrance data violate the wall compatibility "
            f"(residuals {report.cc01_residuals})",
            file=sys.stderr,
        )
    print(f"background written to {out / 'background.csv'}")
    return EXIT_OK


def _setup(cfg):
    bg, p_en, theta, p_ex, report = build_problem_inputs(cfg)
    if not report.length_ok:
        raise CoercivityError(
            f"nozzle length {cfg.L} exceeds the admissible bound {report.Lmax:.6g}",
            l_max=report.Lmax,
        )
    prob, loc = setup_problem(
        bg, cfg.L, cfg.sigma, p_en, theta, p_ex, cfg.nx, cfg.ny,
        K0=None if _has_perturbation(cfg) else cfg.K0_fallback,
        l_max=report.Lmax, cfl=cfg.cfl,
    )
    return bg, prob, loc, report


def _has_perturbation(cfg):
    return cfg.sigma != 0.0 and not (
        cfg.p_en_spec.startswith("zero")
        and cfg.theta_spec.startswith("zero")
        and cfg.p_ex_spec.startswith("zero")
    )


def cmd_locate(cfg, out_override=None):
    out = _outdir(cfg, out_override)
    bg, prob, loc, report = _setup(cfg)
    entries = cfg.manifest()
    entries.update(report.manifest())
    if loc is not None:
        entries.update(loc.manifest())
        np.savetxt(
            out / "j1_samples.csv",
            np.column_stack([loc.xi_samples, loc.J1_samples]),
            delimiter=",", header="xi,J1", comments="",
        )
    write_manifest(out / "locate_manifest.txt", entries)
    if prob is None:
        print(
            "no admissible shock position: "
            f"J1 range [{loc.J1_samples.min():.6g}, {loc.J1_samples.max():.6g}] "
            f"vs J2 = {loc.J2:.6g} (window_ok={loc.window_ok})",
            file=sys.stderr,
        )
        return EXIT_WINDOW
    if loc is None:
        print(f"degenerate perturbation; fallback shock abscissa K0 = {prob.K0}")
    else:
        print(f"located shock abscissa K0 = {prob.K0:.12g} (case {loc.lemma_case})")
    return EXIT_OK


def cmd_solve(cfg, out_override=None):
    out = _outdir(cfg, out_override)
    bg, prob, loc, report = _setup(cfg)
    if prob is None:
        print("locator window violated; cannot solve", file=sys.stderr)
        return EXIT_WINDOW
    solution = fixed_point(
        prob, tol_fp=cfg.tol_fp, max_iterations=cfg.max_iterations,
        alpha=cfg.alpha, norm_pair_budget=100_000, norm_seed=cfg.seed,
    )
    entries = cfg.manifest()
    entries.update(report.manifest())
    if loc is not None:
        entries.update(loc.manifest())
    entries.update(solution.manifest())
    entries.update(prob.grid_plus.manifest("grid_plus"))
    entries.update(prob.grid_minus.manifest("grid_minus"))
    entries["geometry.m_bar"] = prob.mass.m_bar
    entries["geometry.m"] = prob.mass.m
    write_manifest(out / "solve_manifest.txt", entries)

    it = solution.iterate
    fields_to_csv(
        out / "subsonic_fields.csv", prob.grid_plus,
        {"dp": it.dp, "dtheta": it.dtheta, "dq": it.dq, "dS": it.dS},
    )
    fields_to_csv(
        out / "supersonic_fields.csv", prob.grid_minus,
        {"dp": prob.pert.dp.values, "dtheta": prob.pert.dtheta.values,
         "dq": prob.pert.dq.values},
    )
    np.savetxt(
        out / "shock_profile.csv",
        np.column_stack([prob.grid_plus.eta, solution.psi, it.psi_prime]),
        delimiter=",", header="eta,psi,psi_prime", comments="",
    )
    np.savetxt(
        out / "history.csv",
        np.array(
            [
                [r.index, r.difference, r.ratio if r.ratio is not None else np.nan,
                 r.psi_mbar, r.solvability_residual,
                 r.weighted_norm if r.weighted_norm is not None else np.nan]
                for r in solution.history
            ]
        ),
        delimiter=",",
        header="iteration,difference,ratio,psi_mbar,solvability_residual,weighted_norm",
        comments="",
    )
    if not solution.converged:
        print(
            f"fixed point stagnated after {solution.n_iterations} iterations "
            f"(last difference {solution.history[-1].difference:.3e})",
            file=sys.stderr,
        )
        return EXIT_FIXED_POINT
    print(
        f"converged in {solution.n_iterations} iterations; "
        f"psi(m_bar) = {it.psi_mbar:.12g} (K0 = {prob.K0:.12g})"
    )
    return EXIT_OK


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Render the solver CSV output; requires matplotlib.
import csv
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).parent
data = np.genfromtxt(here / "subsonic_fields.csv", delimiter=",", names=True)
shock = np.genfromtxt(here / "shock_profile.csv", delimiter=",", names=True)
hist = np.genfromtxt(here / "history.csv", delimiter=",", names=True)

nx = len(np.unique(data["xi"]))
ny = len(np.unique(data["eta"]))
X = data["xi"].reshape(nx, ny)
E = data["eta"].reshape(nx, ny)

fig, axes = plt.subplots(2, 2, figsize=(11, 8))
for ax, name in zip(axes.flat, ("dp", "dtheta", "dq", "dS")):
    pc = ax.pcolormesh(X, E, data[name].reshape(nx, ny), shading="auto")
    fig.colorbar(pc, ax=ax)
    ax.set_title(name)
    ax.set_xlabel("xi")
    ax.set_ylabel("eta")
fig.tight_layout()
fig.savefig(here / "subsonic_fields.png", dpi=150)

fig2, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
a1.plot(shock["psi"], shock["eta"])
a1.set_xlabel("psi(eta)")
a1.set_ylabel("eta")
a1.set_title("shock position")
a2.semilogy(hist["iteration"], hist["difference"], "o-")
a2.set_xlabel("iteration")
a2.set_ylabel("difference")
a2.set_title("fixed-point history")
fig2.tight_layout()
fig2.savefig(here / "shock_and_history.png", dpi=150)
print("wrote", here / "subsonic_fields.png", "and", here / "shock_and_history.png")
"""


def cmd_verify(cfg, solution_dir=None, out_override=None):
    out = Path(solution_dir) if solution_dir else _outdir(cfg, out_override)
    out.mkdir(parents=True, exist_ok=True)
    bg, prob, loc, report = _setup(cfg)
    if prob is None:
        print("locator window violated; nothing to verify", file=sys.stderr)
        return EXIT_WINDOW
    solution = fixed_point(prob, tol_fp=cfg.tol_fp, max_iterations=cfg.max_iterations)
    resid = diagnostics.nonlinear_residual(solution)
    norm = diagnostics.composite_weighted_norm(
        solution.iterate, prob.grid_plus, cfg.alpha, prob.K0, seed=cfg.seed
    )
    entries = cfg.manifest()
    entries.update(resid.manifest())
    entries["verify.composite_weighted_norm"] = norm
    entries["verify.norm_over_sigma"] = norm / cfg.sigma if cfg.sigma else 0.0
    entries["verify.converged"] = solution.converged
    write_manifest(out / "verify_manifest.txt", entries)
    (out / "plot_solution.py").write_text(_PLOT_SCRIPT)
    print(
        f"nonlinear residual max {resid.equation_max():.3e}, "
        f"jump residual {resid.rh_max:.3e}, weighted norm {norm:.3e}"
    )
    return EXIT_OK


def _solve_one_sigma(args):
    cfg, sigma, outdir = args
    sub = replace(cfg, sigma=sigma, out_dir=Path(outdir))
    return sigma, cmd_solve(sub)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gravshock",
        description="Stratified transonic-shock pipeline: background, shock "
        "location, perturbed solve, verification.",
    )
    parser.add_argument("command", choices=["background", "locate", "solve", "verify"])
    parser.add_argument("-c", "--config", required=True, help="INI config path")
    parser.add_argument("-o", "--output", default=None, help="output directory override")
    parser.add_argument(
        "--solution", default=None, help="solution directory (verify)"
    )
    parser.add_argument(
        "--sweep-sigma", default=None,
        help="comma-separated sigma values; solve runs once per value",
    )
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BACKGROUND

    try:
        if args.command == "background":
            return cmd_background(cfg, args.output)
        if args.command == "locate":
            return cmd_locate(cfg, args.output)
        if args.command == "solve":
            if args.sweep_sigma:
                sigmas = [float(s) for s in args.sweep_sigma.split(",")]
                out = _outdir(cfg, args.output)
                tasks = [
                    (cfg, s, out / f"sigma_{s:g}") for s in sigmas
                ]
                if args.jobs > 1:
                    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                        results = list(pool.map(_solve_one_sigma, tasks))
                else:
                    results = [_solve_one_sigma(t) for t in tasks]
                worst = max(code for _, code in results)
                for sigma, code in results:
                    print(f"sigma = {sigma:g}: exit {code}")
                return worst
            return cmd_solve(cfg, args.output)
        if args.command == "verify":
            return cmd_verify(cfg, args.solution, args.output)
    except (InvalidBackgroundError, InvalidPerturbationError, ConfigError) as exc:
        print(f"invalid background/config: {exc}", file=sys.stderr)
        return EXIT_BACKGROUND
    except CoercivityError as exc:
        print(f"length bound violated: {exc}", file=sys.stderr)
        return EXIT_LENGTH
    except (NonContractionError, DivergenceError) as exc:
        print(f"fixed-point failure: {exc}", file=sys.stderr)
        return EXIT_FIXED_POINT
    except GravshockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKGROUND
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
