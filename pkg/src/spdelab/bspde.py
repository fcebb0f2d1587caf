"""Linear backward equation with a martingale term: three solution routes.

The equation

    du = -[kappa(x) u_xx - b(x) u_x + c u + gamma q + f(t,x)] dt + q dW,
    u(T, .) = g,

is solved (i) in closed form for constant coefficients, (ii) by backward
Crank-Nicolson on the tilt-reduced deterministic problem for any field, and
(iii) by Monte Carlo over the tilted characteristic diffusion.  The
martingale field is recovered from the slope identity q = sigma * u_x
rather than time-stepped directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coeffs import CoefficientField
from .grids import WeightedGrid
from .kernels import assemble_kappa_form
from .stepping import crank_nicolson_evolve

__all__ = [
    "LinearBspdeProblem",
    "BackwardSolution",
    "solve_closed_form",
    "solve_backward_fd",
    "transmission_residual",
    "feynman_kac_mc",
    "q_consistency",
    "interface_q",
]

_MC_CHUNK = 50_000


@dataclass(frozen=True)
class LinearBspdeProblem:
    """Problem data; kappa(x) = rho*a/2 and sigma(x) = sqrt(rho*a) derive from the field."""

    field: CoefficientField
    c: float
    gamma: float
    f: Callable | None      # f(t, x), vectorised in x; None means 0
    g: Callable
    T: float

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError("horizon T must be positive")

    def kappa(self, x):
        rho, a, _ = self.field.tables(np.asarray(x, dtype=float))
        return 0.5 * rho * a

    def sigma(self, x):
        rho, a, _ = self.field.tables(np.asarray(x, dtype=float))
        return np.sqrt(rho * a)

    def drift(self, x):
        """Tilted drift b(x) + sigma(x)*gamma."""
        rho, a, b = self.field.tables(np.asarray(x, dtype=float))
        return b + np.sqrt(rho * a) * self.gamma

    def constant_parameters(self) -> tuple[float, float, float]:
        """(sigma, b0, beta) for a constant-coefficient field."""
        if not self.field.is_constant:
            raise ValueError("closed forms need constant coefficients")
        rho, a, b = self.field.sample(0.0)
        sigma = float(np.sqrt(rho * a))
        return sigma, float(b), float(b) + sigma * self.gamma


@dataclass
class BackwardSolution:
    """Value and martingale fields on the space-time grid, t-index first."""

    times: np.ndarray
    u: np.ndarray           # (n_steps+1, n)
    q: np.ndarray           # (n_steps+1, n)
    grid: WeightedGrid
    method: str


def _gauss_weights(n_quad: int, halfwidth: float) -> np.ndarray:
    return np.linspace(-halfwidth, halfwidth, n_quad)


def solve_closed_form(problem: LinearBspdeProblem, t: float, x,
                      n_quad: int = 2001, halfwidth_sds: float = 8.0,
                      n_time: int = 201):
    """Gaussian-quadrature evaluation of the representation formula.

    Returns (u, q) at time t for scalar or vector x.  The terminal part
    integrates g against the tilted Gaussian over +-halfwidth_sds standard
    deviations; the source part adds the time integral of the same smoothing
    applied to f.
    """
    if t >= problem.T:
        raise ValueError(f"need t < T, got t={t}, T={problem.T}")
    sigma, _, beta = problem.constant_parameters()
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    tau = problem.T - t
    c = problem.c

    z = _gauss_weights(n_quad, halfwidth_sds)
    phi = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)

    def smoothed(fn, lag):
        """(integral of fn against the kernel, same with the slope weight)."""
        s = sigma * np.sqrt(lag)
        m = xs - beta * lag
        y = m[:, None] + s * z[None, :]
        vals = np.asarray(fn(y), dtype=float) * np.ones_like(y)
        base = np.trapezoid(vals * phi[None, :], z, axis=1)
        slope = np.trapezoid(vals * (z / s)[None, :] * phi[None, :], z, axis=1)
        return base, slope

    u_val, u_slope = smoothed(problem.g, tau)
    u = np.exp(c * tau) * u_val
    q = sigma * np.exp(c * tau) * u_slope

    if problem.f is not None:
        svals = np.linspace(t, problem.T, n_time)
        fu = np.empty((n_time, xs.size))
        fq = np.empty((n_time, xs.size))
        for k, s in enumerate(svals):
            lag = s - t
            disc = np.exp(c * lag)
            if lag <= 0.0:
                fu[k] = disc * np.asarray(problem.f(s, xs), dtype=float)
                delta = 1e-6 * np.maximum(1.0, np.abs(xs))
                fx = (np.asarray(problem.f(s, xs + delta), dtype=float)
                      - np.asarray(problem.f(s, xs - delta), dtype=float)) / (2 * delta)
                fq[k] = disc * sigma * fx
            else:
                base, slope = smoothed(lambda y, s=s: problem.f(s, y), lag)
                fu[k] = disc * base
                fq[k] = disc * sigma * slope
        u = u + np.trapezoid(fu, svals, axis=0)
        q = q + np.trapezoid(fq, svals, axis=0)

    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(u[0]), float(q[0])
    return u, q


def _slope_field(u: np.ndarray, grid: WeightedGrid,
                 field: CoefficientField) -> np.ndarray:
    """q = sigma(x) * u_x with centered differences; one-sided at boundaries
    and from the minus phase at the interface node."""
    rho, a, _ = field.tables(grid.nodes)
    sig = np.sqrt(rho * a)
    q = sig * np.gradient(u, grid.h, axis=-1)
    j0 = grid.interface_index
    if j0 is not None and field.is_piecewise and not field.is_constant and j0 >= 2:
        left = (3.0 * u[..., j0] - 4.0 * u[..., j0 - 1] + u[..., j0 - 2]) / (2.0 * grid.h)
        q[..., j0] = np.sqrt(field.rho_minus * field.a_minus) * left
    return q


def solve_backward_fd(problem: LinearBspdeProblem, grid: WeightedGrid,
                      n_steps: int, rannacher: int = 2) -> BackwardSolution:
    """Backward Crank-Nicolson on the tilt-reduced deterministic problem.

    The stencil is the midpoint-kappa flux form, so two-phase fields satisfy
    the interface matching conditions discretely and a degenerate interface
    reproduces the constant-coefficient solve bit for bit.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    op = assemble_kappa_form(problem.field, grid, gamma=problem.gamma, c=problem.c)
    gvals = np.asarray(problem.g(grid.nodes), dtype=float) * np.ones(grid.n)
    dt = problem.T / n_steps
    u_hist = np.empty((n_steps + 1, grid.n))
    u_hist[n_steps] = gvals

    source = None
    if problem.f is not None:
        source = lambda tau: np.asarray(problem.f(problem.T - tau, grid.nodes),
                                        dtype=float) * np.ones(grid.n)

    def record(k, tau, v):
        u_hist[n_steps - k] = v

    crank_nicolson_evolve(op, gvals, dt, n_steps, source=source,
                          rannacher=rannacher, on_step=record)
    times = np.linspace(0.0, problem.T, n_steps + 1)
    q_hist = _slope_field(u_hist, grid, problem.field)
    return BackwardSolution(times=times, u=u_hist, q=q_hist, grid=grid,
                            method="fd_two_phase" if (problem.field.is_piecewise
                                                      and not problem.field.is_constant)
                            else "fd_smooth")


def transmission_residual(solution: BackwardSolution, field: CoefficientField,
                          t_index: int) -> tuple[float, float]:
    """Interface mismatches of a two-phase backward solution at one time slice.

    jump_u extrapolates u to x=0 quadratically from strictly-left and
    strictly-right nodes; jump_flux compares the native one-sided fluxes
    kappa^- (u_{j0}-u_{j0-1})/h and kappa^+ (u_{j0+1}-u_{j0})/h.
    """
    grid = solution.grid
    j0 = grid.interface_index
    if j0 is None:
        raise ValueError("transmission residual needs a piecewise field with "
                         "the interface on a node")
    if not 3 <= j0 <= grid.n - 4:
        raise ValueError("interface too close to the window edge")
    u = solution.u[t_index]
    h = grid.h
    # quadratic extrapolation to x=0 from three one-sided nodes
    left = 3.0 * u[j0 - 1] - 3.0 * u[j0 - 2] + u[j0 - 3]
    right = 3.0 * u[j0 + 1] - 3.0 * u[j0 + 2] + u[j0 + 3]
    jump_u = abs(left - right)

    du_left = (u[j0] - u[j0 - 1]) / h
    du_right = (u[j0 + 1] - u[j0]) / h
    kap_m = 0.5 * field.rho_minus * field.a_minus
    kap_p = 0.5 * field.rho_plus * field.a_plus
    jump_flux = abs(kap_m * du_left - kap_p * du_right)
    return jump_u, jump_flux


def interface_q(solution: BackwardSolution, field: CoefficientField,
                t_index: int) -> tuple[float, float]:
    """One-sided martingale values (sigma^- u_x(0-), sigma^+ u_x(0+))."""
    grid = solution.grid
    j0 = grid.interface_index
    if j0 is None or not 2 <= j0 <= grid.n - 3:
        raise ValueError("interface not available on this grid")
    u = solution.u[t_index]
    h = grid.h
    du_left = (3.0 * u[j0] - 4.0 * u[j0 - 1] + u[j0 - 2]) / (2.0 * h)
    du_right = (-3.0 * u[j0] + 4.0 * u[j0 + 1] - u[j0 + 2]) / (2.0 * h)
    sig_m = float(np.sqrt(field.rho_minus * field.a_minus))
    sig_p = float(np.sqrt(field.rho_plus * field.a_plus))
    return sig_m * du_left, sig_p * du_right


def q_consistency(solution: BackwardSolution, field: CoefficientField) -> float:
    """Max defect of q = sigma(x) u_x over interior nodes (interface excluded)."""
    grid = solution.grid
    rho, a, _ = field.tables(grid.nodes)
    sig = np.sqrt(rho * a)
    du = (solution.u[:, 2:] - solution.u[:, :-2]) / (2.0 * grid.h)
    resid = np.abs(solution.q[:, 1:-1] - sig[1:-1] * du)
    j0 = grid.interface_index
    if j0 is not None and 1 <= j0 <= grid.n - 2:
        resid[:, j0 - 1] = 0.0
    return float(resid.max())


def feynman_kac_mc(problem: LinearBspdeProblem, t: float, x: float,
                   n_paths: int, n_steps: int, seed: int,
                   interface_scheme: str = "transformed") -> tuple[float, float]:
    """Monte-Carlo estimate of u(t, x) over the tilted diffusion.

    Constant coefficients use plain Euler-Maruyama (exact per step).  For
    two-phase fields the default scheme integrates the piecewise-linear
    image y = x / kappa(x), whose limit matches the flux-form interface
    condition of the FD route; interface_scheme="naive" keeps the raw
    per-position Euler update instead (biased at the interface, retained
    for comparison runs).
    """
    if t >= problem.T:
        raise ValueError("need t < T")
    if n_paths < 100:
        raise ValueError("need at least 100 paths")
    if interface_scheme not in ("transformed", "naive"):
        raise ValueError(f"unknown interface scheme {interface_scheme!r}")
    horizon = problem.T - t
    dt = horizon / n_steps
    c = problem.c
    sqdt = np.sqrt(dt)

    piecewise = problem.field.is_piecewise and not problem.field.is_constant
    if piecewise:
        rho_m, rho_p = problem.field.rho_minus, problem.field.rho_plus
        a_m, a_p = problem.field.a_minus, problem.field.a_plus
        kap = np.array([0.5 * rho_m * a_m, 0.5 * rho_p * a_p])
        sig = np.array([np.sqrt(rho_m * a_m), np.sqrt(rho_p * a_p)])
        bt = np.array([problem.field.b_minus, problem.field.b_plus]) + sig * problem.gamma
    else:
        sigma0, _, beta0 = problem.constant_parameters()

    root = np.random.SeedSequence(seed)
    n_chunks = (n_paths + _MC_CHUNK - 1) // _MC_CHUNK
    children = root.spawn(n_chunks)
    total = 0.0
    total_sq = 0.0
    done = 0
    for ci in range(n_chunks):
        m = min(_MC_CHUNK, n_paths - done)
        done += m
        rng = np.random.Generator(np.random.PCG64(children[ci]))
        payoff = np.zeros(m)
        if not piecewise:
            X = np.full(m, float(x))
            for k in range(n_steps):
                if problem.f is not None:
                    payoff += np.exp(c * (k * dt)) * np.asarray(
                        problem.f(t + k * dt, X), dtype=float) * dt
                X += -beta0 * dt + sigma0 * sqdt * rng.standard_normal(m)
            payoff += np.exp(c * horizon) * np.asarray(problem.g(X), dtype=float)
        elif interface_scheme == "transformed":
            side = 1 if float(x) > 0.0 else 0
            Y = np.full(m, float(x) / kap[side])
            for k in range(n_steps):
                s = (Y > 0.0).astype(int)
                if problem.f is not None:
                    X = kap[s] * Y
                    payoff += np.exp(c * (k * dt)) * np.asarray(
                        problem.f(t + k * dt, X), dtype=float) * dt
                drift = -bt[s] / kap[s]
                vol = np.sqrt(2.0 / kap[s])
                Y += drift * dt + vol * sqdt * rng.standard_normal(m)
            s = (Y > 0.0).astype(int)
            payoff += np.exp(c * horizon) * np.asarray(problem.g(kap[s] * Y), dtype=float)
        else:
            X = np.full(m, float(x))
            for k in range(n_steps):
                if problem.f is not None:
                    payoff += np.exp(c * (k * dt)) * np.asarray(
                        problem.f(t + k * dt, X), dtype=float) * dt
                s = (X > 0.0).astype(int)
                X += -bt[s] * dt + sig[s] * sqdt * rng.standard_normal(m)
            payoff += np.exp(c * horizon) * np.asarray(problem.g(X), dtype=float)
        total += payoff.sum()
        total_sq += np.dot(payoff, payoff)
    mean = total / n_paths
    var = max(total_sq / n_paths - mean * mean, 0.0)
    stderr = np.sqrt(var / n_paths)
    return float(mean), float(stderr)
