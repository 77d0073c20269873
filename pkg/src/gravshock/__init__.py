"""Transonic shocks in gravity-stratified nozzle flow.

Library layers, bottom to top:

* gas            -- polytropic thermodynamics, normal-shock jump relations
* background     -- stratified normal transonic-shock columns
* geometry       -- mass coordinates, entrance transplant, shock-fixing map
* supersonic     -- linearized supersonic march ahead of the shock
* locator        -- solvability kernels, J1/J2, shock-position root
* subsonic       -- dual-potential linear solver behind the shock
* iteration      -- nonlinear shock free-boundary fixed point
* diagnostics    -- weighted Holder norms, nonlinear residuals, orders
* cli            -- background / locate / solve / verify pipeline
"""

from .gas import GasConstants, GasState, derived_quantities, rh_downstream, rh_residuals
from .background import (
    BackgroundSolution,
    build_background,
    build_background_from_bottom,
    compatible_entrance_profile,
    main_theorem_constants,
)
from .geometry import MassCoordinate, ShockFixMap, entrance_transplant, mass_flux_constants
from .fields import Field2D, Grid
from .supersonic import solve_linear_supersonic, shock_trace
from .locator import compute_kernels, evaluate_J, linearized_shock_data, locate_shock
from .subsonic import SubsonicSolver, SubsonicSources
from .iteration import Iterate, fixed_point, setup_problem
from .diagnostics import (
    WeightedNormSpec,
    composite_weighted_norm,
    convergence_order,
    nonlinear_residual,
    weighted_norm,
)

__all__ = [
    "GasConstants", "GasState", "derived_quantities", "rh_downstream", "rh_residuals",
    "BackgroundSolution", "build_background", "build_background_from_bottom",
    "compatible_entrance_profile", "main_theorem_constants",
    "MassCoordinate", "ShockFixMap", "entrance_transplant", "mass_flux_constants",
    "Field2D", "Grid",
    "solve_linear_supersonic", "shock_trace",
    "compute_kernels", "evaluate_J", "linearized_shock_data", "locate_shock",
    "SubsonicSolver", "SubsonicSources",
    "Iterate", "fixed_point", "setup_problem",
    "WeightedNormSpec", "composite_weighted_norm", "convergence_order",
    "nonlinear_residual", "weighted_norm",
]

__version__ = "0.1.0"
