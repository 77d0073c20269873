"""Run configuration: flat INI-style text with typed blocks.

Sections: [gas], [background], [nozzle], [perturbation], [numerics],
[output]. Profile-valued entries use 'family:params' strings; the entrance
shape additionally accepts compat_cubic:P0,P1, which is built against the
background so the wall compatibility holds exactly.
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import background as bgmod
from . import profiles
from .errors import ConfigError
from .gas import GasConstants


@dataclass
class RunConfig:
    consts: GasConstants
    q_spec: str
    t1: float
    pm1: float
    N: int
    L: float
    alpha: float
    K0_fallback: float
    sigma: float
    p_en_spec: str
    theta_spec: str
    p_ex_spec: str
    nx: int
    ny: int
    tol_fp: float | None
    max_iterations: int
    seed: int
    cfl: float
    out_dir: Path
    raw: dict = field(default_factory=dict)

    def manifest(self):
        out = {f"config.{k}": v for k, v in sorted(self.raw.items())}
        return out


_DEFAULTS = {
    ("gas", "A"): "1.0",
    ("gas", "c_v"): "1.0",
    ("gas", "g"): "0.0",
    ("background", "N"): "1024",
    ("nozzle", "K0_fallback"): "",
    ("perturbation", "sigma"): "0.0",
    ("perturbation", "p_en"): "zero",
    ("perturbation", "theta"): "zero",
    ("perturbation", "p_ex"): "zero",
    ("numerics", "nx"): "128",
    ("numerics", "ny"): "128",
    ("numerics", "tol_fp"): "",
    ("numerics", "max_iterations"): "50",
    ("numerics", "seed"): "20240",
    ("numerics", "cfl"): "0.85",
    ("output", "directory"): "out",
}


def load_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    def get(section, key, required=False):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        default = _DEFAULTS.get((section, key))
        if default is None and required:
            raise ConfigError(f"missing required option [{section}] {key}")
        return default

    try:
        consts = GasConstants(
            gamma=float(get("gas", "gamma", required=True)),
            A=float(get("gas", "A")),
            c_v=float(get("gas", "c_v")),
            g=float(get("gas", "g")),
        )
        L = float(get("nozzle", "L", required=True))
        k0_raw = get("nozzle", "K0_fallback")
        cfg = RunConfig(
            consts=consts,
            q_spec=get("background", "q_family", required=True),
            t1=float(get("background", "t1", required=True)),
            pm1=float(get("background", "pm1", required=True)),
            N=int(get("background", "N")),
            L=L,
            alpha=float(get("nozzle", "alpha", required=True)),
            K0_fallback=float(k0_raw) if k0_raw else L / 2.0,
            sigma=float(get("perturbation", "sigma")),
            p_en_spec=get("perturbation", "p_en"),
            theta_spec=get("perturbation", "theta"),
            p_ex_spec=get("perturbation", "p_ex"),
            nx=int(get("numerics", "nx")),
            ny=int(get("numerics", "ny")),
            tol_fp=float(get("numerics", "tol_fp")) if get("numerics", "tol_fp") else None,
            max_iterations=int(get("numerics", "max_iterations")),
            seed=int(get("numerics", "seed")),
            cfl=float(get("numerics", "cfl")),
            out_dir=Path(get("output", "directory")),
        )
    except ValueError as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
    cfg.raw = {
        f"{s}.{k}": v for s in parser.sections() for k, v in parser.items(s)
    }
    return cfg


def build_entrance_profile(spec, bg, sigma):
    """The entrance shape; the compat families are resolved against the
    background (their wall slopes depend on it)."""
    name, _, params = spec.partition(":")
    name = name.strip()
    if name == "compat_cubic":
        vals = [float(v) for v in params.split(",") if v.strip()]
        if len(vals) != 2:
            raise ConfigError("compat_cubic takes the two endpoint values P0,P1")
        return bgmod.compatible_entrance_profile(bg, sigma, vals[0], vals[1])
    if name == "compat_monotone":
        vals = [float(v) for v in params.split(",") if v.strip()]
        if len(vals) != 1:
            raise ConfigError("compat_monotone takes a single amplitude")
        return bgmod.monotone_entrance_profile(bg, sigma, vals[0])
    return profiles.parse_profile(spec)


def build_problem_inputs(cfg):
    """Background plus the three perturbation profiles of a run."""
    qm = profiles.parse_profile(cfg.q_spec)
    bg = bgmod.build_background(qm, cfg.t1, cfg.pm1, cfg.consts, cfg.N)
    p_en = build_entrance_profile(cfg.p_en_spec, bg, cfg.sigma)
    theta = profiles.parse_profile(cfg.theta_spec, length=cfg.L)
    p_ex = profiles.parse_profile(cfg.p_ex_spec)
    report = bgmod.main_theorem_constants(bg, cfg.alpha, cfg.L, cfg.sigma, p_en)
    return bg, p_en, theta, p_ex, report


def write_manifest(path, entries):
    """Deterministic flat key = value text."""
    lines = []
    for key in sorted(entries):
        value = entries[key]
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


def fields_to_csv(path, grid, named_fields):
    """Long-format CSV: xi, eta, field columns."""
    X, E = np.meshgrid(grid.xi, grid.eta, indexing="ij")
    cols = [X.ravel(), E.ravel()]
    names = ["xi", "eta"]
    for name, values in named_fields.items():
        names.append(name)
        cols.append(np.asarray(values).ravel())
    data = np.column_stack(cols)
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="")
