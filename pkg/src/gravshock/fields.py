"""Tensor-grid scalar fields on the fixed computational rectangles."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import diff_1d


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [xi0, xi1] x [0, eta1] with nx x ny cells."""

    xi0: float
    xi1: float
    eta1: float
    nx: int
    ny: int
    xi: np.ndarray = field(init=False, repr=False)
    eta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.xi1 <= self.xi0:
            raise ValueError("xi1 must exceed xi0")
        object.__setattr__(self, "xi", np.linspace(self.xi0, self.xi1, self.nx + 1))
        object.__setattr__(self, "eta", np.linspace(0.0, self.eta1, self.ny + 1))

    @property
    def h_xi(self):
        return (self.xi1 - self.xi0) / self.nx

    @property
    def h_eta(self):
        return self.eta1 / self.ny

    @property
    def corners(self):
        """Q1..Q4: inflow-bottom, outflow-bottom, outflow-top, inflow-top."""
        return (
            (self.xi0, 0.0),
            (self.xi1, 0.0),
            (self.xi1, self.eta1),
            (self.xi0, self.eta1),
        )

    def eta_half(self):
        """Midpoints eta_{j+1/2}, used by conservative flux discretizations."""
        return 0.5 * (self.eta[:-1] + self.eta[1:])

    def manifest(self, prefix="grid"):
        return {
            f"{prefix}.xi0": self.xi0,
            f"{prefix}.xi1": self.xi1,
            f"{prefix}.eta1": self.eta1,
            f"{prefix}.nx": self.nx,
            f"{prefix}.ny": self.ny,
        }


@dataclass
class Field2D:
    """Scalar samples values[i, j] at (xi[i], eta[j])."""

    values: np.ndarray
    xi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.xi), len(self.eta)):
            raise ValueError("field shape does not match its grid")

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros((grid.nx + 1, grid.ny + 1)), grid.xi, grid.eta)

    @classmethod
    def from_function(cls, grid, func):
        X, E = np.meshgrid(grid.xi, grid.eta, indexing="ij")
        return cls(func(X, E), grid.xi, grid.eta)

    def copy(self):
        return Field2D(self.values.copy(), self.xi, self.eta)

    def d_xi(self):
        return diff_1d(self.values, self.xi, axis=0)

    def d_eta(self):
        return diff_1d(self.values, self.eta, axis=1)

    def at_xi(self, xi_points):
        """Cubic interpolation of every eta-row at the given xi positions.

        Returns an array of shape (len(xi_points), n_eta).
        """
        spl = CubicSpline(self.xi, self.values, axis=0)
        return spl(np.asarray(xi_points, dtype=float))

    def max_abs(self):
        return float(np.max(np.abs(self.values)))
