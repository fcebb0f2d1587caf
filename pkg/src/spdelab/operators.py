"""Tridiagonal discretisations of the heterogeneous diffusion operator and its dual.

The generator is assembled in divergence form,

    (A phi)_j = rho_j/(2 h^2) * [a_{j+1/2}(phi_{j+1}-phi_j) - a_{j-1/2}(phi_j-phi_{j-1})]
                + b_j (phi_{j+1}-phi_{j-1})/(2h),

with diffusivity sampled at cell midpoints, so the discrete flux a*phi' is
continuous across a coefficient jump whenever the interface sits on a node.
Boundary rows are zeroed (homogeneous Dirichlet bookkeeping); columns are
kept so constants are annihilated exactly at interior rows when b = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientField, interface_coefficients
from .grids import WeightedGrid, inner_product, _values

__all__ = [
    "DiscreteOperator",
    "CoercivityReport",
    "assemble_operator",
    "assemble_adjoint",
    "adjoint_residual",
    "coercivity_check",
    "default_coercivity_params",
]


@dataclass
class DiscreteOperator:
    """Tridiagonal matrix with metadata about what it realises.

    `kind` is one of "A", "A_star_smooth", "A_star_piecewise" or "kappa_form"
    (the kappa-flux form used by the backward solvers and kernel builder).
    """

    lower: np.ndarray   # length n-1, entries (j+1, j)
    diag: np.ndarray    # length n
    upper: np.ndarray   # length n-1, entries (j, j+1)
    kind: str
    grid: WeightedGrid
    boundary: str = "dirichlet"

    def __post_init__(self):
        n = self.grid.n
        if self.diag.shape != (n,) or self.lower.shape != (n - 1,) or self.upper.shape != (n - 1,):
            raise ValueError("band shapes inconsistent with grid size")
        if not (np.all(np.isfinite(self.diag)) and np.all(np.isfinite(self.lower))
                and np.all(np.isfinite(self.upper))):
            raise ValueError("operator entries must be finite")

    @property
    def n(self) -> int:
        return self.grid.n

    def apply(self, v) -> np.ndarray:
        """Matrix-vector product; v may be (..., n)-shaped."""
        v = np.asarray(getattr(v, "values", v), dtype=float)
        out = self.diag * v
        out[..., :-1] += self.upper * v[..., 1:]
        out[..., 1:] += self.lower * v[..., :-1]
        return out

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        m += np.diag(self.upper, 1)
        m += np.diag(self.lower, -1)
        return m

    def banded(self) -> np.ndarray:
        """(3, n) banded storage as used by scipy.linalg.solve_banded."""
        ab = np.zeros((3, self.n))
        ab[0, 1:] = self.upper
        ab[1, :] = self.diag
        ab[2, :-1] = self.lower
        return ab

    def transpose(self) -> "DiscreteOperator":
        return DiscreteOperator(lower=self.upper.copy(), diag=self.diag.copy(),
                                upper=self.lower.copy(), kind=self.kind + "_T",
                                grid=self.grid, boundary=self.boundary)

    def scaled(self, s: float) -> "DiscreteOperator":
        return DiscreteOperator(lower=s * self.lower, diag=s * self.diag,
                                upper=s * self.upper, kind=self.kind,
                                grid=self.grid, boundary=self.boundary)

    def add_diagonal(self, d) -> "DiscreteOperator":
        return DiscreteOperator(lower=self.lower.copy(), diag=self.diag + d,
                                upper=self.upper.copy(), kind=self.kind,
                                grid=self.grid, boundary=self.boundary)

    def export_csv(self, path) -> None:
        """Write nonzero entries as (row, col, value) triples."""
        rows = []
        for j in range(self.n):
            if self.diag[j] != 0.0:
                rows.append((j, j, self.diag[j]))
            if j + 1 < self.n and self.upper[j] != 0.0:
                rows.append((j, j + 1, self.upper[j]))
            if j > 0 and self.lower[j - 1] != 0.0:
                rows.append((j, j - 1, self.lower[j - 1]))
        with open(path, "w") as fh:
            fh.write("row,col,value\n")
            for r, c, v in rows:
                fh.write(f"{r},{c},{v!r}\n")


def _zero_boundary_rows(lower, diag, upper):
    diag[0] = diag[-1] = 0.0
    upper[0] = 0.0
    lower[-1] = 0.0


def assemble_operator(field: CoefficientField, grid: WeightedGrid) -> DiscreteOperator:
    """Divergence-form stencil of the generator with Dirichlet boundary rows."""
    if grid.n < 3:
        raise ValueError("grid too small to assemble a second-order stencil")
    x = grid.nodes
    h = grid.h
    rho, _, b = field.tables(x)
    _, a_half, _ = field.tables(grid.midpoints())

    n = grid.n
    lower = np.zeros(n - 1)
    diag = np.zeros(n)
    upper = np.zeros(n - 1)

    coef = rho / (2.0 * h * h)
    # second-order part, rows 1..n-2
    diag[1:-1] = -coef[1:-1] * (a_half[1:] + a_half[:-1])
    upper[1:] = coef[1:-1] * a_half[1:]
    lower[:-1] = coef[1:-1] * a_half[:-1]
    # centered drift
    upper[1:] += b[1:-1] / (2.0 * h)
    lower[:-1] -= b[1:-1] / (2.0 * h)

    _zero_boundary_rows(lower, diag, upper)
    return DiscreteOperator(lower=lower, diag=diag, upper=upper, kind="A", grid=grid)


def assemble_adjoint(field: CoefficientField, grid: WeightedGrid) -> DiscreteOperator:
    """Dual operator under the weighted pairing.

    Smooth branch: same divergence-form second-order stencil plus the
    expanded first-order part -b psi' - rho (b/rho)' psi.

    Piecewise branch: single-phase stencil per side plus, at the interface
    node, the point-mass row realising the dual's interface term.  The
    diffusivity jump enters through a centered-difference weight c_a, the
    drift jump through (b_minus - rho_minus/rho_plus * b_plus); the mass is
    normalised against the weighted quadrature so the discrete duality
    identity <A phi, psi> = <phi, A* psi> holds under refinement (checked in
    the test suite for generic two-phase fields).
    """
    if grid.n < 3:
        raise ValueError("grid too small to assemble a second-order stencil")
    x = grid.nodes
    h = grid.h
    n = grid.n
    rho, _, b = field.tables(x)

    lower = np.zeros(n - 1)
    diag = np.zeros(n)
    upper = np.zeros(n - 1)

    if not field.is_piecewise:
        _, a_half, _ = field.tables(grid.midpoints())
        coef = rho / (2.0 * h * h)
        diag[1:-1] = -coef[1:-1] * (a_half[1:] + a_half[:-1])
        upper[1:] = coef[1:-1] * a_half[1:]
        lower[:-1] = coef[1:-1] * a_half[:-1]
        # first-order part of the dual: -b psi' - rho (b/rho)' psi
        upper[1:] -= b[1:-1] / (2.0 * h)
        lower[:-1] += b[1:-1] / (2.0 * h)
        diag[1:-1] -= rho[1:-1] * field.drift_weight_derivative(x[1:-1])
        _zero_boundary_rows(lower, diag, upper)
        return DiscreteOperator(lower=lower, diag=diag, upper=upper,
                                kind="A_star_smooth", grid=grid)

    _, a_half, _ = field.tables(grid.midpoints())
    coef = rho / (2.0 * h * h)
    diag[1:-1] = -coef[1:-1] * (a_half[1:] + a_half[:-1])
    upper[1:] = coef[1:-1] * a_half[1:]
    lower[:-1] = coef[1:-1] * a_half[:-1]
    upper[1:] -= b[1:-1] / (2.0 * h)
    lower[:-1] += b[1:-1] / (2.0 * h)

    j0 = grid.interface_index
    if j0 is not None and 0 < j0 < n - 1:
        # Interface row: minus-phase stencil (closed-left convention) plus the
        # point-mass terms.  The second-order part is rewritten single-phase so
        # the diffusivity jump appears only through c_a.
        am = field.a_minus
        rm = field.rho_minus
        c2 = rm * am / (2.0 * h * h)
        diag[j0] = -2.0 * c2
        upper[j0] = c2 - field.b_minus / (2.0 * h)
        lower[j0 - 1] = c2 + field.b_minus / (2.0 * h)
        c_a = interface_coefficients(field).c_a
        # drift interface weight of the weighted transpose: the pairing flips
        # the sign of the incoming side (fixed by the duality tests)
        c_b_dual = field.b_minus - rm * field.b_plus / field.rho_plus
        # point mass 1/h in the plain dx measure: <phi, mass>_weighted then
        # reproduces phi(0) * (...) / rho(0)
        upper[j0] += c_a / (2.0 * h * h)
        lower[j0 - 1] -= c_a / (2.0 * h * h)
        diag[j0] += c_b_dual / h

    _zero_boundary_rows(lower, diag, upper)
    return DiscreteOperator(lower=lower, diag=diag, upper=upper,
                            kind="A_star_piecewise", grid=grid)


def adjoint_residual(A: DiscreteOperator, A_star: DiscreteOperator,
                     grid: WeightedGrid, phi, psi) -> float:
    """|<A phi, psi> - <phi, A* psi>| in the weighted inner product."""
    pv, qv = _values(phi), _values(psi)
    return abs(inner_product(A.apply(pv), qv, grid)
               - inner_product(pv, A_star.apply(qv), grid))


def default_coercivity_params(lower: float, upper: float) -> tuple[float, float]:
    """(lambda0, alpha) for the energy inequality, from the ellipticity bounds."""
    c_rho = upper / lower
    lambda0 = upper**2 * c_rho / lower**2 + 2.0
    alpha = min(lower**2 / 2.0, 1.0)
    return lambda0, alpha


@dataclass(frozen=True)
class CoercivityReport:
    margins: np.ndarray
    min_margin: float
    lambda0: float
    alpha: float
    tol: float
    passed: bool


def coercivity_check(A: DiscreteOperator, grid: WeightedGrid, trials,
                     lambda0: float, alpha: float,
                     tol_rel: float = 1e-8) -> CoercivityReport:
    """Evaluate the energy inequality margin for each trial function.

    margin(u) = -2<Au,u> + lambda0 ||u||^2 - alpha (||u'||^2_{L2} + ||u||^2),
    with u' by centered differences.  Passes when every margin exceeds
    -tol_rel * scale, scale being the size of the terms involved.
    """
    if len(trials) == 0:
        raise ValueError("coercivity check needs at least one trial function")
    margins = np.empty(len(trials))
    scale = 0.0
    for k, u in enumerate(trials):
        uv = _values(u)
        nrm2 = inner_product(uv, uv, grid)
        du = np.gradient(uv, grid.h)
        dnorm2 = float(np.dot(du * du, grid.quad_dx))
        quad = -2.0 * inner_product(A.apply(uv), uv, grid)
        margins[k] = quad + lambda0 * nrm2 - alpha * (dnorm2 + nrm2)
        scale = max(scale, abs(quad) + lambda0 * nrm2 + alpha * (dnorm2 + nrm2))
    tol = tol_rel * max(scale, 1e-30)
    mn = float(margins.min())
    return CoercivityReport(margins=margins, min_margin=mn, lambda0=lambda0,
                            alpha=alpha, tol=tol, passed=bool(mn >= -tol))
