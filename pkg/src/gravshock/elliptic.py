"""Conservative second-order elliptic solvers on the fixed rectangle.

Two problems back the subsonic reconstruction:

* a pure-Neumann divergence-form problem
      d/dxi (a(eta) Phi_xi) + d/deta (b(eta) Phi_eta) = F,
  discretized node-centered finite-volume (half cells along the boundary),
  gauge-fixed by zero volume-weighted mean via a bordered system;

* a Dirichlet problem with a zero-order term of the "wrong" sign,
      d/dxi (c(eta) Psi_xi) + d/deta (d(eta) Psi_eta) + e(eta) Psi = F,
  well-posed only while the domain is short enough; the assembled matrix is
  symmetric and its smallest eigenvalue is probed by inverse iteration.

Coefficients depend on eta only (the stratified background), which keeps
both operators independent of the iterate: factorizations are computed once
per grid and reused for every right-hand side.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import CoercivityError, CompatibilityError


def _volume_weights(n, h):
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2.0
    return w


def _neumann_1d(coef_half, h):
    """1-d finite-volume operator -d/ds(coef d/ds) with zero-flux ends.

    coef_half holds the n face coefficients; the matrix has n+1 rows and
    carries the 1/h flux scaling (face lengths are applied by the caller).
    """
    n = len(coef_half)
    diag = np.zeros(n + 1)
    diag[:-1] += coef_half
    diag[1:] += coef_half
    return sp.diags(
        [-coef_half / h, diag / h, -coef_half / h], offsets=(-1, 0, 1), format="csr"
    )


@dataclass
class NeumannSolution:
    phi: np.ndarray
    compatibility_defect: float
    multiplier: float


class NeumannPoisson:
    """Finite-volume pure-Neumann solver, factorized once per grid."""

    def __init__(self, grid, a_nodes, b_half):
        self.grid = grid
        self.a = np.asarray(a_nodes, dtype=float)      # at eta nodes
        self.b_half = np.asarray(b_half, dtype=float)  # at eta midpoints
        nx, ny = grid.nx, grid.ny
        hx, he = grid.h_xi, grid.h_eta
        self.wx = _volume_weights(nx, hx)
        self.we = _volume_weights(ny, he)

        # A = -(discrete divergence): SPD up to the constant nullspace
        Nx = _neumann_1d(np.full(nx, 1.0), hx)                 # xi line operator
        Ax = sp.kron(Nx, sp.diags(self.a * self.we), format="csr")
        Ne = _neumann_1d(self.b_half, he)                      # eta line operator
        Ae = sp.kron(sp.diags(self.wx), Ne, format="csr")
        A = (Ax + Ae).tocsr()

        vol = np.outer(self.wx, self.we).ravel()
        B = sp.bmat([[A, vol[:, None]], [vol[None, :], None]], format="csc")
        self._lu = splu(B)
        self._vol = vol
        self._n = A.shape[0]

    def solve(self, F_nodes, flux_left, flux_right, tol=1e-10, project=False):
        """Solve with interior source F and prescribed a*Phi_xi wall fluxes.

        flux_left/right are arrays over eta of the conormal flux a Phi_xi at
        the inflow/outflow faces (wall faces carry zero flux). Returns the
        zero-mean solution and the discrete compatibility defect, which must
        vanish: sum of all balances telescopes the interior fluxes away.
        With project=True an incompatible defect (such as the O(h^2) one of
        a manufactured source) is removed by shifting the source mean
        instead of raising.
        """
        F = np.asarray(F_nodes, dtype=float)
        rhs = F * np.outer(self.wx, self.we)
        rhs[0, :] += np.asarray(flux_left, dtype=float) * self.we
        rhs[-1, :] -= np.asarray(flux_right, dtype=float) * self.we
        b = rhs.ravel()
        defect = float(np.sum(b))
        scale = max(float(np.sum(np.abs(b))), 1.0)
        if abs(defect) > tol * scale:
            if not project:
                raise CompatibilityError(
                    f"Neumann data violate discrete compatibility: defect {defect:.3e}",
                    defect=defect,
                )
            b = b - defect * self._vol / np.sum(self._vol)
        sol = self._lu.solve(np.concatenate([-b, [0.0]]))
        phi = sol[: self._n].reshape(F.shape)
        return NeumannSolution(
            phi=phi, compatibility_defect=defect, multiplier=float(sol[-1])
        )

    def weighted_mean(self, phi):
        return float(np.sum(self._vol * phi.ravel()) / np.sum(self._vol))


class DirichletHelmholtz:
    """Dirichlet solver for the zero-order-perturbed divergence operator."""

    def __init__(self, grid, c_nodes, d_half, e_nodes, min_eig_check=True):
        self.grid = grid
        self.c = np.asarray(c_nodes, dtype=float)
        self.d_half = np.asarray(d_half, dtype=float)
        self.e = np.asarray(e_nodes, dtype=float)
        nx, ny = grid.nx, grid.ny
        hx, he = grid.h_xi, grid.h_eta
        ni, nj = nx - 1, ny - 1
        if ni < 1 or nj < 1:
            raise ValueError("grid too coarse for an interior Dirichlet solve")

        Tx = sp.diags(
            [-np.ones(ni - 1), 2 * np.ones(ni), -np.ones(ni - 1)], (-1, 0, 1)
        ) / hx**2
        c_int = self.c[1:-1]
        dh = self.d_half
        diag_e = (dh[1:] + dh[:-1]) / he**2  # interior j = 1..ny-1
        Te = sp.diags(
            [-dh[1:-1] / he**2, diag_e, -dh[1:-1] / he**2], (-1, 0, 1)
        )
        M = (
            sp.kron(Tx, sp.diags(c_int))
            + sp.kron(sp.identity(ni), Te - sp.diags(self.e[1:-1]))
        ).tocsc()
        self._M = M
        try:
            self._lu = splu(M)
        except RuntimeError as exc:
            raise CoercivityError(
                f"operator factorization failed (singular): {exc}", eig_min=0.0
            ) from exc
        self._shape = (ni, nj)
        self.min_eig = self.min_eig_estimate() if min_eig_check else None
        if self.min_eig is not None and self.min_eig <= 0.0:
            raise CoercivityError(
                "zero-order term defeats the operator: minimum eigenvalue "
                f"{self.min_eig:.3e} <= 0 (nozzle too long)",
                eig_min=self.min_eig,
            )

    def min_eig_estimate(self, iters=30, seed=1234):
        """Smallest-eigenvalue estimate of the symmetric matrix by inverse
        power iteration on the cached factorization."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self._M.shape[0])
        x /= np.linalg.norm(x)
        lam = None
        for _ in range(iters):
            y = self._lu.solve(x)
            ny_ = float(np.linalg.norm(y))
            if not np.isfinite(ny_) or ny_ == 0.0:
                return 0.0
            x = y / ny_
            lam = float(x @ (self._M @ x))
        return lam

    def solve(self, F_nodes, g_left, g_right, g_bottom, g_top):
        """Solve L Psi = F with Dirichlet data on the four sides.

        Corner entries of the returned array take the inflow/outflow side
        values (the interior solve never reads corners).
        """
        hx, he = self.grid.h_xi, self.grid.h_eta
        F = np.asarray(F_nodes, dtype=float)
        rhs = -F[1:-1, 1:-1].copy()
        rhs[0, :] += self.c[1:-1] / hx**2 * np.asarray(g_left, dtype=float)[1:-1]
        rhs[-1, :] += self.c[1:-1] / hx**2 * np.asarray(g_right, dtype=float)[1:-1]
        rhs[:, 0] += self.d_half[0] / he**2 * np.asarray(g_bottom, dtype=float)[1:-1]
        rhs[:, -1] += self.d_half[-1] / he**2 * np.asarray(g_top, dtype=float)[1:-1]
        sol = self._lu.solve(rhs.ravel()).reshape(self._shape)

        psi = np.empty((self.grid.nx + 1, self.grid.ny + 1))
        psi[1:-1, 1:-1] = sol
        psi[:, 0] = g_bottom
        psi[:, -1] = g_top
        psi[0, :] = g_left
        psi[-1, :] = g_right
        psi[0, 0], psi[0, -1] = g_left[0], g_left[-1]
        psi[-1, 0], psi[-1, -1] = g_right[0], g_right[-1]
        return psi
