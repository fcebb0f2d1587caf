"""Scenario configuration: strict flat key-value files with dotted sections.

Grammar (one statement per line):

    # comment                               -- ignored, as are blank lines
    section.key = value

Values are integers, floats, bare words, or shape declarations like
``gaussian(center=0, width=1, height=1)`` (see `shapes`).  Unknown sections
or keys fail fast with the offending line number.  The canonical
re-serialisation of a parsed scenario plus the seed defines the config
fingerprint stamped on every output file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientField, EllipticityBounds
from .bspde import LinearBspdeProblem
from .forward import ForwardProblem, PathEnsemble
from .game import GameSpec
from .grids import Field, WeightedGrid
from .shapes import ShapeError, parse_shape

__all__ = ["Scenario", "ConfigError", "load_scenario", "parse_scenario_text"]


class ConfigError(ValueError):
    pass


# section -> key -> kind ("int" | "float" | "word" | "shape")
_SCHEMA: dict[str, dict[str, str]] = {
    "coefficients": {
        "kind": "word",
        "rho_minus": "float", "rho_plus": "float",
        "a_minus": "float", "a_plus": "float",
        "b_minus": "float", "b_plus": "float",
        "rho": "shape", "a": "shape", "b": "shape",
        "bounds_lower": "float", "bounds_upper": "float",
    },
    "grid": {"x_min": "float", "x_max": "float", "n": "int"},
    "time": {"horizon": "float", "steps": "int"},
    "state": {"initial": "shape"},
    "noise": {"sigma0": "float", "kappa": "shape", "sigma": "shape"},
    "bspde": {"c": "float", "gamma": "float", "f": "shape", "g": "shape"},
    "game": {
        "gamma1": "float", "gamma2": "float", "gamma3": "float",
        "sigma0": "float", "alpha1": "shape", "alpha2": "shape",
    },
    "ensemble": {"paths": "int", "seed": "int"},
    "output": {"dir": "word"},
}


@dataclass
class Scenario:
    """Parsed and schema-checked configuration, ready to build module inputs."""

    data: dict[str, dict[str, object]]
    raw: dict[str, dict[str, str]]
    name: str = "scenario"

    # -- plumbing ------------------------------------------------------

    def has(self, section: str, key: str | None = None) -> bool:
        if section not in self.data:
            return False
        return key is None or key in self.data[section]

    def get(self, section: str, key: str, default=None):
        try:
            return self.data[section][key]
        except KeyError:
            if default is not None:
                return default
            raise ConfigError(f"scenario is missing {section}.{key}") from None

    def canonical_text(self) -> str:
        lines = []
        for sec in sorted(self.raw):
            for key in sorted(self.raw[sec]):
                lines.append(f"{sec}.{key} = {self.raw[sec][key]}")
        return "\n".join(lines) + "\n"

    def fingerprint(self, seed: int | None = None) -> str:
        if seed is None:
            seed = int(self.get("ensemble", "seed", 0)) if self.has("ensemble", "seed") else 0
        payload = self.canonical_text() + f"seed={seed}\n"
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    # -- builders ------------------------------------------------------

    def build_field(self) -> CoefficientField:
        kind = str(self.get("coefficients", "kind"))
        sec = self.data.get("coefficients", {})
        if kind == "piecewise":
            return CoefficientField.piecewise(
                rho=(sec.get("rho_minus", 1.0), sec.get("rho_plus", 1.0)),
                a=(self.get("coefficients", "a_minus"), self.get("coefficients", "a_plus")),
                b=(sec.get("b_minus", 0.0), sec.get("b_plus", 0.0)))
        if kind == "smooth":
            return CoefficientField.smooth(
                rho=self.get("coefficients", "rho"),
                a=self.get("coefficients", "a"),
                b=self.get("coefficients", "b"))
        raise ConfigError(f"coefficients.kind must be piecewise or smooth, got {kind!r}")

    def build_bounds(self) -> EllipticityBounds:
        sec = self.data.get("coefficients", {})
        if "bounds_lower" in sec and "bounds_upper" in sec:
            return EllipticityBounds(lower=float(sec["bounds_lower"]),
                                     upper=float(sec["bounds_upper"]))
        field = self.build_field()
        if field.is_piecewise:
            vals = [field.rho_minus, field.rho_plus, field.a_minus, field.a_plus]
            lo = min(vals)
            hi = max(vals + [abs(field.b_minus), abs(field.b_plus)])
            return EllipticityBounds(lower=lo, upper=max(hi, lo))
        xs = np.linspace(self.get("grid", "x_min"), self.get("grid", "x_max"), 2001)
        rho, a, b = field.tables(xs)
        lo = min(rho.min(), a.min())
        hi = max(rho.max(), a.max(), np.abs(b).max())
        return EllipticityBounds(lower=float(lo), upper=float(max(hi, lo)))

    def build_grid(self, field: CoefficientField | None = None) -> WeightedGrid:
        field = field if field is not None else self.build_field()
        return WeightedGrid.build(self.get("grid", "x_min"), self.get("grid", "x_max"),
                                  self.get("grid", "n"), field)

    def build_initial(self, grid: WeightedGrid) -> np.ndarray:
        shape = self.get("state", "initial")
        return np.asarray(shape(grid.nodes), dtype=float) * np.ones(grid.n)

    def build_forward_problem(self, grid: WeightedGrid,
                              field: CoefficientField | None = None) -> ForwardProblem:
        field = field if field is not None else self.build_field()
        xi = self.build_initial(grid)
        sec = self.data.get("noise", {})
        if "kappa" in sec or "sigma" in sec:
            kshape = sec.get("kappa")
            sshape = sec.get("sigma")
            kappa_fn = (lambda t, x, y, u1, u2: kshape(y)) if kshape is not None \
                else (lambda t, x, y, u1, u2: 0.0)
            sigma_fn = (lambda t, x, y, u1, u2: sshape(y)) if sshape is not None \
                else (lambda t, x, y, u1, u2: 0.0)
        else:
            s0 = float(sec.get("sigma0", 0.0))
            kappa_fn = lambda t, x, y, u1, u2: 0.0
            sigma_fn = lambda t, x, y, u1, u2: s0
        return ForwardProblem(field=field, kappa_fn=kappa_fn, sigma_fn=sigma_fn,
                              xi=xi, T=self.get("time", "horizon"))

    def build_bspde_problem(self, field: CoefficientField | None = None) -> LinearBspdeProblem:
        field = field if field is not None else self.build_field()
        fshape = self.data.get("bspde", {}).get("f")
        f = None if fshape is None else (lambda t, x: fshape(x))
        return LinearBspdeProblem(field=field,
                                  c=float(self.get("bspde", "c", 0.0)),
                                  gamma=float(self.get("bspde", "gamma", 0.0)),
                                  f=f, g=self.get("bspde", "g"),
                                  T=self.get("time", "horizon"))

    def build_game_spec(self, grid: WeightedGrid,
                        field: CoefficientField | None = None) -> GameSpec:
        field = field if field is not None else self.build_field()
        mk = lambda shape: Field(np.asarray(shape(grid.nodes), dtype=float) * np.ones(grid.n), grid)
        return GameSpec(field=field,
                        alpha1=mk(self.get("game", "alpha1")),
                        alpha2=mk(self.get("game", "alpha2")),
                        xi=Field(self.build_initial(grid), grid),
                        gamma1=float(self.get("game", "gamma1")),
                        gamma2=float(self.get("game", "gamma2")),
                        gamma3=float(self.get("game", "gamma3")),
                        sigma0=float(self.get("game", "sigma0", 1e-30)),
                        T=self.get("time", "horizon"))

    def build_ensemble(self, paths: int | None = None,
                       seed: int | None = None) -> PathEnsemble:
        return PathEnsemble(
            n_paths=int(paths if paths is not None else self.get("ensemble", "paths")),
            n_steps=int(self.get("time", "steps")),
            T=float(self.get("time", "horizon")),
            seed=int(seed if seed is not None else self.get("ensemble", "seed")))


def parse_scenario_text(text: str, name: str = "scenario") -> Scenario:
    data: dict[str, dict[str, object]] = {}
    raw: dict[str, dict[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {stripped!r}")
        lhs, rhs = (s.strip() for s in stripped.split("=", 1))
        if "." not in lhs:
            raise ConfigError(f"line {lineno}: key {lhs!r} is missing its section prefix")
        section, key = (s.strip() for s in lhs.split(".", 1))
        if section not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section {section!r}")
        kind = _SCHEMA[section][key]
        try:
            value = _convert(rhs, kind)
        except (ValueError, ShapeError) as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        data.setdefault(section, {})[key] = value
        raw.setdefault(section, {})[key] = rhs
    return Scenario(data=data, raw=raw, name=name)


def _convert(rhs: str, kind: str):
    if kind == "int":
        return int(rhs)
    if kind == "float":
        return float(rhs)
    if kind == "shape":
        return parse_shape(rhs)
    if kind == "word":
        if not rhs or any(ch.isspace() for ch in rhs.strip()):
            raise ValueError(f"expected a single word, got {rhs!r}")
        return rhs.strip()
    raise ValueError(f"unhandled schema kind {kind!r}")


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    import os
    return parse_scenario_text(text, name=os.path.splitext(os.path.basename(path))[0])
