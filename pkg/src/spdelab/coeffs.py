"""Spatial coefficient triples (rho, a, b) for the heterogeneous diffusion operator.

Two families are supported:

* smooth fields, given by samplable callables (optionally with analytic
  derivatives for the first-order terms), and
* two-phase piecewise-constant fields with a single material interface
  fixed at x = 0.  The interface uses the closed-left convention: x = 0
  belongs to the minus phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "CoefficientField",
    "EllipticityBounds",
    "InterfaceCoefficients",
    "ValidationReport",
    "Violation",
    "validate_hypothesis",
    "interface_coefficients",
]

# step used by finite-difference fallbacks for coefficient derivatives
_FD_REL_STEP = 1e-6


@dataclass(frozen=True)
class EllipticityBounds:
    """Uniform bounds: lower <= rho, a <= upper and |b| <= upper."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 < self.lower <= self.upper):
            raise ValueError(f"need 0 < lower <= upper, got ({self.lower}, {self.upper})")


@dataclass(frozen=True)
class InterfaceCoefficients:
    """Weights of the interface point masses in the two-phase dual operator.

    ``c_a = rho_minus * (a_plus - a_minus) / 2`` multiplies the derivative of
    the test function at 0, ``c_b = -(rho_minus/rho_plus * b_plus + b_minus)``
    the value itself.
    """

    c_a: float
    c_b: float


@dataclass(frozen=True)
class CoefficientField:
    """The triple (rho, a, b): density weight, diffusivity and drift velocity.

    ``kind`` is "smooth" or "piecewise".  Use the :meth:`smooth` and
    :meth:`piecewise` constructors.  Instances are immutable and all
    sampling is pure, so fields can be shared freely.
    """

    kind: str
    # smooth branch
    rho_fn: Callable | None = None
    a_fn: Callable | None = None
    b_fn: Callable | None = None
    da_fn: Callable | None = None
    db_fn: Callable | None = None
    drho_fn: Callable | None = None
    # piecewise branch
    rho_minus: float = field(default=np.nan)
    rho_plus: float = field(default=np.nan)
    a_minus: float = field(default=np.nan)
    a_plus: float = field(default=np.nan)
    b_minus: float = field(default=np.nan)
    b_plus: float = field(default=np.nan)

    @classmethod
    def smooth(cls, rho, a, b, da=None, db=None, drho=None) -> "CoefficientField":
        return cls(kind="smooth", rho_fn=rho, a_fn=a, b_fn=b,
                   da_fn=da, db_fn=db, drho_fn=drho)

    @classmethod
    def piecewise(cls, rho=(1.0, 1.0), a=(1.0, 1.0), b=(0.0, 0.0)) -> "CoefficientField":
        rm, rp = float(rho[0]), float(rho[1])
        am, ap = float(a[0]), float(a[1])
        bm, bp = float(b[0]), float(b[1])
        if min(rm, rp, am, ap) <= 0.0:
            raise ValueError("piecewise rho and a values must be positive")
        return cls(kind="piecewise", rho_minus=rm, rho_plus=rp,
                   a_minus=am, a_plus=ap, b_minus=bm, b_plus=bp)

    @classmethod
    def constant(cls, rho=1.0, a=1.0, b=0.0) -> "CoefficientField":
        """Degenerate two-phase field with equal phases."""
        return cls.piecewise(rho=(rho, rho), a=(a, a), b=(b, b))

    # -- queries -------------------------------------------------------

    @property
    def is_piecewise(self) -> bool:
        return self.kind == "piecewise"

    @property
    def is_constant(self) -> bool:
        """True when the field is piecewise with identical phases."""
        return (self.is_piecewise
                and self.rho_minus == self.rho_plus
                and self.a_minus == self.a_plus
                and self.b_minus == self.b_plus)

    def sample(self, x: float) -> tuple[float, float, float]:
        """Point values (rho(x), a(x), b(x)); x <= 0 takes the minus phase."""
        if not np.isfinite(x):
            raise ValueError(f"sample point must be finite, got {x}")
        rho, a, b = self.tables(np.asarray([x], dtype=float))
        return float(rho[0]), float(a[0]), float(b[0])

    def tables(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised sampling over an array of positions."""
        xs = np.asarray(xs, dtype=float)
        if self.is_piecewise:
            plus = xs > 0.0
            rho = np.where(plus, self.rho_plus, self.rho_minus)
            a = np.where(plus, self.a_plus, self.a_minus)
            b = np.where(plus, self.b_plus, self.b_minus)
            return rho, a, b
        rho = np.asarray(self.rho_fn(xs), dtype=float) * np.ones_like(xs)
        a = np.asarray(self.a_fn(xs), dtype=float) * np.ones_like(xs)
        b = np.asarray(self.b_fn(xs), dtype=float) * np.ones_like(xs)
        return rho, a, b

    def drift_weight_derivative(self, xs: np.ndarray) -> np.ndarray:
        """d/dx of b(x)/rho(x), needed by the dual operator's first-order term.

        Uses analytic derivatives when both db and drho were supplied,
        otherwise a central difference with step 1e-6 * max(1, |x|).
        """
        xs = np.asarray(xs, dtype=float)
        if self.is_piecewise:
            return np.zeros_like(xs)
        if self.db_fn is not None and self.drho_fn is not None:
            rho = np.asarray(self.rho_fn(xs), dtype=float)
            b = np.asarray(self.b_fn(xs), dtype=float)
            return (np.asarray(self.db_fn(xs), dtype=float) * rho
                    - b * np.asarray(self.drho_fn(xs), dtype=float)) / rho**2
        step = _FD_REL_STEP * np.maximum(1.0, np.abs(xs))
        ratio = lambda z: np.asarray(self.b_fn(z), dtype=float) / np.asarray(self.rho_fn(z), dtype=float)
        return (ratio(xs + step) - ratio(xs - step)) / (2.0 * step)


@dataclass(frozen=True)
class Violation:
    x: float
    quantity: str
    value: float
    reason: str


@dataclass(frozen=True)
class ValidationReport:
    accepted: bool
    n_probes: int
    violations: tuple[Violation, ...]

    def summary(self) -> str:
        status = "accepted" if self.accepted else "rejected"
        return f"{status} ({len(self.violations)} violations over {self.n_probes} probes)"


def validate_hypothesis(field: CoefficientField, bounds: EllipticityBounds,
                        probe_points) -> ValidationReport:
    """Check lower <= rho, a <= upper and |b| <= upper at every probe point.

    Non-finite samples are reported as violations with the offending
    coordinate.  An empty violation list means the field is accepted.
    """
    xs = np.asarray(probe_points, dtype=float)
    if xs.size == 0:
        raise ValueError("probe_points must be nonempty")
    if not np.all(np.isfinite(xs)):
        raise ValueError("probe_points must be finite")

    rho, a, b = field.tables(xs)
    lo, hi = bounds.lower, bounds.upper
    violations: list[Violation] = []
    for name, vals in (("rho", rho), ("a", a), ("b", b)):
        bad = ~np.isfinite(vals)
        for i in np.flatnonzero(bad):
            violations.append(Violation(float(xs[i]), name, float(vals[i]), "non-finite sample"))
        if name == "b":
            out = np.isfinite(vals) & (np.abs(vals) > hi)
            reason = f"|b| > {hi}"
        else:
            out = np.isfinite(vals) & ((vals < lo) | (vals > hi))
            reason = f"outside [{lo}, {hi}]"
        for i in np.flatnonzero(out):
            violations.append(Violation(float(xs[i]), name, float(vals[i]), reason))
    violations.sort(key=lambda v: v.x)
    return ValidationReport(accepted=not violations, n_probes=xs.size,
                            violations=tuple(violations))


def default_probe_points(x_min: float, x_max: float, n: int = 10_000) -> np.ndarray:
    return np.linspace(x_min, x_max, n)


def interface_coefficients(field: CoefficientField) -> InterfaceCoefficients:
    """Interface point-mass weights for a two-phase field."""
    if not field.is_piecewise:
        raise ValueError("interface coefficients are defined for piecewise fields only")
    c_a = 0.5 * field.rho_minus * (field.a_plus - field.a_minus)
    c_b = -(field.rho_minus / field.rho_plus * field.b_plus + field.b_minus)
    return InterfaceCoefficients(c_a=c_a, c_b=c_b)
