"""Implicit time stepping shared by the kernel builder and the backward solvers."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from .operators import DiscreteOperator

__all__ = ["crank_nicolson_evolve", "implicit_step_matrix", "solve_shifted"]


def implicit_step_matrix(op: DiscreteOperator, coef: float) -> np.ndarray:
    """Banded storage of (I - coef * L)."""
    ab = op.banded() * (-coef)
    ab[1, :] += 1.0
    return ab


def solve_shifted(ab: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve (I - coef*L) x = rhs for one or many right-hand sides."""
    if rhs.ndim == 1:
        return solve_banded((1, 1), ab, rhs)
    # solve_banded treats columns as independent right-hand sides
    return solve_banded((1, 1), ab, rhs.T).T


def crank_nicolson_evolve(op: DiscreteOperator, v0: np.ndarray, dt: float,
                          n_steps: int, source=None, rannacher: int = 2,
                          on_step=None) -> np.ndarray:
    """Evolve dv/dt = L v + source(t) from v0 over n_steps of size dt.

    The first `rannacher` steps are split into two implicit-Euler half steps
    to damp rough initial data; the rest are Crank-Nicolson.  `source(t)`
    must return a vector (evaluated at the step midpoint for CN, at the end
    of each half step for the startup).  `on_step(k, t, v)` is called after
    every full step; v may be a matrix of stacked columns.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    v = np.array(v0, dtype=float)
    ab_half = implicit_step_matrix(op, 0.5 * dt)
    t = 0.0
    for k in range(n_steps):
        if k < rannacher:
            for _ in range(2):
                rhs = v if source is None else v + 0.5 * dt * source(t + 0.5 * dt)
                v = solve_shifted(ab_half, rhs)
                t += 0.5 * dt
        else:
            rhs = v + 0.5 * dt * op.apply(v)
            if source is not None:
                rhs = rhs + dt * source(t + 0.5 * dt)
            v = solve_shifted(ab_half, rhs)
            t += dt
        if on_step is not None:
            on_step(k + 1, t, v)
    return v
