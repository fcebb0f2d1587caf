"""Pathwise solver for the forward SPDE.

Time stepping is semi-implicit: the generator is treated implicitly (no
parabolic step-size restriction), reaction and noise terms explicitly with
Ito (left-endpoint) evaluation.  Brownian increments are derived
deterministically from (seed, path index), so results are bit-reproducible
regardless of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .coeffs import CoefficientField
from .grids import WeightedGrid
from .operators import DiscreteOperator
from .stepping import implicit_step_matrix, solve_shifted

__all__ = [
    "ForwardProblem",
    "PathEnsemble",
    "ForwardSolution",
    "PicardResult",
    "simulate_forward",
    "picard_iterate",
    "mild_residual",
]


@dataclass(frozen=True)
class ForwardProblem:
    """Data of the forward equation dY = (A Y + kappa) dt + sigma dB.

    kappa_fn and sigma_fn have signature (t, x, y, u1, u2) and must
    broadcast over numpy arrays in x and y.  `lipschitz` is the declared
    Lipschitz constant of (kappa, sigma) in y, used by the contraction
    audits.
    """

    field: CoefficientField
    kappa_fn: Callable
    sigma_fn: Callable
    xi: np.ndarray
    T: float
    lipschitz: float = 0.0
    bound_M: float | None = None

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError("horizon T must be positive")
        xi = np.asarray(self.xi, dtype=float)
        if not np.all(np.isfinite(xi)):
            raise ValueError("initial condition must be finite")
        if self.bound_M is not None and np.max(np.abs(xi)) > self.bound_M:
            raise ValueError("initial condition exceeds its declared bound")


@dataclass
class PathEnsemble:
    """Reproducible Brownian driving for a family of paths."""

    n_paths: int
    n_steps: int
    T: float
    seed: int
    _cache: np.ndarray | None = dc_field(default=None, repr=False, compare=False)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def increments(self) -> np.ndarray:
        """(n_paths, n_steps) array of N(0, dt) increments, bit-stable in seed."""
        if self._cache is None:
            root = np.random.SeedSequence(self.seed)
            out = np.empty((self.n_paths, self.n_steps))
            scale = np.sqrt(self.dt)
            for p, child in enumerate(root.spawn(self.n_paths)):
                rng = np.random.Generator(np.random.PCG64(child))
                out[p] = scale * rng.standard_normal(self.n_steps)
            self._cache = out
        return self._cache


@dataclass
class ForwardSolution:
    times: np.ndarray
    Y: np.ndarray               # (paths, n_steps+1, n) or (paths, n) when terminal-only
    store: str                  # "full" | "terminal"
    scheme: str
    controls: tuple[np.ndarray, np.ndarray]
    grid: WeightedGrid
    increments: np.ndarray      # the driving noise actually used

    def terminal(self) -> np.ndarray:
        return self.Y[:, -1, :] if self.store == "full" else self.Y

    def ensemble_mean(self) -> np.ndarray:
        return self.Y.mean(axis=0)

    def ensemble_var(self) -> np.ndarray:
        if self.Y.shape[0] > 1:
            return self.Y.var(axis=0, ddof=1)
        return np.zeros_like(self.Y[0])


def _control_array(u, times: np.ndarray) -> np.ndarray:
    if callable(u):
        return np.asarray([float(u(t)) for t in times])
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return np.full(times.shape, float(arr))
    if arr.shape != times.shape:
        raise ValueError(f"control array has shape {arr.shape}, expected {times.shape}")
    return arr


def simulate_forward(problem: ForwardProblem, controls, ensemble: PathEnsemble,
                     grid: WeightedGrid, operator: DiscreteOperator | None,
                     store: str = "full") -> ForwardSolution:
    """Semi-implicit Euler over the ensemble.

    `operator` may be None to disable the spatial part (pure time
    integration, used by the test hooks).  With store="terminal" only the
    final slice per path is kept.
    """
    if store not in ("full", "terminal"):
        raise ValueError("store must be 'full' or 'terminal'")
    if abs(ensemble.T - problem.T) > 1e-12 * max(1.0, problem.T):
        raise ValueError("ensemble horizon does not match the problem")
    N = ensemble.n_steps
    dt = ensemble.dt
    times = np.linspace(0.0, problem.T, N + 1)
    u1 = _control_array(controls[0], times)
    u2 = _control_array(controls[1], times)

    x = grid.nodes
    Y = np.broadcast_to(np.asarray(problem.xi, dtype=float),
                        (ensemble.n_paths, grid.n)).copy()
    dB = ensemble.increments()
    ab = implicit_step_matrix(operator, dt) if operator is not None else None

    hist = None
    if store == "full":
        hist = np.empty((ensemble.n_paths, N + 1, grid.n))
        hist[:, 0, :] = Y
    for k in range(N):
        t = times[k]
        drift = problem.kappa_fn(t, x, Y, u1[k], u2[k])
        noise = problem.sigma_fn(t, x, Y, u1[k], u2[k])
        rhs = Y + dt * np.broadcast_to(drift, Y.shape) \
            + np.broadcast_to(noise, Y.shape) * dB[:, k][:, None]
        Y = solve_shifted(ab, rhs) if ab is not None else rhs
        if hist is not None:
            hist[:, k + 1, :] = Y
    if not np.all(np.isfinite(Y)):
        raise FloatingPointError("forward simulation produced non-finite values")
    return ForwardSolution(times=times, Y=hist if hist is not None else Y,
                           store=store, scheme="semi_implicit_euler",
                           controls=(u1, u2), grid=grid, increments=dB)


@dataclass
class PicardResult:
    iterates: list[np.ndarray]        # each (paths, n_steps+1, n)
    ratios: list[float]
    exact_convergence: bool
    times: np.ndarray


def picard_iterate(problem: ForwardProblem, ensemble: PathEnsemble,
                   grid: WeightedGrid, operator: DiscreteOperator | None,
                   n_iter: int) -> PicardResult:
    """Successive substitutions of the mild fixed-point map.

    Iterate 0 propagates the initial condition alone; iterate k+1 re-runs
    the stepping with reaction and noise evaluated on iterate k.  Ratios are
    successive quotients of max-over-time ensemble-mean squared weighted
    norms of the differences; a vanishing difference reports ratio 0 and
    sets the exact-convergence flag.
    """
    if n_iter < 2:
        raise ValueError("need at least two iterations to form a ratio")
    N, dt = ensemble.n_steps, ensemble.dt
    times = np.linspace(0.0, problem.T, N + 1)
    x = grid.nodes
    P = ensemble.n_paths
    dB = ensemble.increments()
    ab = implicit_step_matrix(operator, dt) if operator is not None else None

    def propagate(source_traj):
        Y = np.broadcast_to(np.asarray(problem.xi, dtype=float), (P, grid.n)).copy()
        hist = np.empty((P, N + 1, grid.n))
        hist[:, 0, :] = Y
        for k in range(N):
            rhs = Y
            if source_traj is not None:
                base = source_traj[:, k, :]
                drift = problem.kappa_fn(times[k], x, base, 0.0, 0.0)
                noise = problem.sigma_fn(times[k], x, base, 0.0, 0.0)
                rhs = Y + dt * np.broadcast_to(drift, Y.shape) \
                    + np.broadcast_to(noise, Y.shape) * dB[:, k][:, None]
            Y = solve_shifted(ab, rhs) if ab is not None else rhs
            hist[:, k + 1, :] = Y
        return hist

    iterates = [propagate(None)]
    for _ in range(n_iter):
        iterates.append(propagate(iterates[-1]))

    def esup(diff):
        per = np.einsum("pkj,j->pk", diff**2, grid.quad)
        return float(per.mean(axis=0).max())

    deltas = [esup(iterates[k + 1] - iterates[k]) for k in range(len(iterates) - 1)]
    ratios: list[float] = []
    exact = False
    for k in range(1, len(deltas)):
        if deltas[k - 1] == 0.0:
            ratios.append(0.0)
            exact = True
        else:
            ratios.append(deltas[k] / deltas[k - 1])
            if deltas[k] == 0.0:
                exact = True
    return PicardResult(iterates=iterates, ratios=ratios,
                        exact_convergence=exact, times=times)


def mild_residual(solution: ForwardSolution, problem: ForwardProblem,
                  kernel_provider, checkpoints=None) -> float:
    """Defect of the semigroup convolution identity at checkpoint times.

    kernel_provider(tau, V) must propagate the rows of V over a lag tau > 0.
    Time integrals use left-endpoint quadrature, matching the Ito evaluation
    of the scheme.  Returns the maximum over checkpoints of the per-path
    weighted norm of the defect, averaged over paths.
    """
    if solution.store != "full":
        raise ValueError("mild residual needs a fully stored solution")
    Y = solution.Y
    P, n_times, n = Y.shape
    times = solution.times
    dt = times[1] - times[0]
    u1, u2 = solution.controls
    grid = solution.grid
    dB = solution.increments
    x = grid.nodes
    if checkpoints is None:
        checkpoints = [n_times // 4, n_times // 2, (3 * n_times) // 4, n_times - 1]
    checkpoints = [k for k in sorted(set(checkpoints)) if 0 < k < n_times]

    worst = 0.0
    for nidx in checkpoints:
        t = times[nidx]
        acc = kernel_provider(t, np.broadcast_to(problem.xi, (P, n)))
        for m in range(nidx):
            drift = np.broadcast_to(
                problem.kappa_fn(times[m], x, Y[:, m, :], u1[m], u2[m]), (P, n))
            noise = np.broadcast_to(
                problem.sigma_fn(times[m], x, Y[:, m, :], u1[m], u2[m]), (P, n))
            incr = dt * drift + noise * dB[:, m][:, None]
            lag = t - times[m]
            acc = acc + (kernel_provider(lag, incr) if lag > 0 else incr)
        defect = Y[:, nidx, :] - acc
        nrm = np.sqrt(np.einsum("pj,j->p", defect**2, grid.quad))
        worst = max(worst, float(nrm.mean()))
    return worst
