"""Experiment configuration: INI-style files with explicit schema validation.

Sections: [problem], [formulation], [grids], [domain], [quadrature],
[reference], [output], [lab], and one [particle.<name>] per particle for
particle-list problems.  Height/slope data are expressions in ``theta``
evaluated with a restricted namespace.  Defaults mirror the reported
experiment settings (c = 1e-3, lambda2 = 1, quad_order = 5, cutcell_depth=8).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .assembly import QuadOptions
from .benchmark import BenchmarkParams
from .geometry import Ellipse, Particle, circle


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration (CLI exit code 3)."""


_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "sqrt": np.sqrt, "abs": np.abs, "pi": math.pi,
}


def make_profile(expr):
    """Compile a theta-expression (or plain number) into a vectorized callable."""
    expr = str(expr).strip()
    try:
        const = float(expr)
        return lambda theta: np.full_like(np.asarray(theta, dtype=float), const)
    except ValueError:
        pass
    code = compile(expr, "<profile>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name != "theta":
            raise ConfigError(f"unknown name {name!r} in profile expression {expr!r}")

    def profile(theta):
        out = eval(code, {"__builtins__": {}},
                   {**_EXPR_NAMES, "theta": np.asarray(theta, dtype=float)})
        return np.broadcast_to(np.asarray(out, dtype=float),
                               np.asarray(theta, dtype=float).shape).copy()

    return profile


@dataclass(frozen=True)
class ParticleSpec:
    particle: Particle
    bulk_field: str = "zero"       # zero | normal_slope | benchmark_inner
    f2_const: float | None = None  # needed by normal_slope


@dataclass
class ExperimentConfig:
    problem: str = "symmetric-benchmark"     # or particle-list
    kappa: float = 1.0
    sigma: float = 0.0
    formulation: str = "soft_curve"          # or soft_bulk
    lambda1: float = 2.0
    lambda2: float = 1.0
    c: float = 1e-3
    s: int = 1
    bulk_lambda: float | None = None         # default 4 - 2s
    grids: tuple = (8, 12, 16, 24, 32, 48)
    norms: tuple = ("L2", "H1", "H2")
    bounds: tuple = (-1.0, 1.0, -1.0, 1.0)
    quad: QuadOptions = dc_field(default_factory=QuadOptions)
    reference_n: int | None = None
    reference_lambda1: float = 3.0
    reference_c: float = 1e-3
    reference_formulation: str = "auto"   # auto | soft_curve | soft_bulk
    out_path: str = "study.csv"
    figures: bool = True
    seed: int = 12345
    lab_bound_count: int = 1000
    lab_perturbed_count: int = 200
    particle_specs: tuple = ()
    benchmark: BenchmarkParams = dc_field(default_factory=BenchmarkParams)

    def bulk_exponent(self):
        return self.bulk_lambda if self.bulk_lambda is not None else 4.0 - 2.0 * self.s

    def validate(self):
        if self.problem not in ("symmetric-benchmark", "particle-list"):
            raise ConfigError(f"unknown problem kind {self.problem!r}")
        if self.formulation not in ("soft_curve", "soft_bulk"):
            raise ConfigError(f"unknown formulation {self.formulation!r}")
        if self.c <= 0:
            raise ConfigError("penalty constant c must be positive")
        if self.s not in (0, 1):
            raise ConfigError("bulk smoothness s must be 0 or 1")
        if len(self.grids) < 1 or any(n < 1 for n in self.grids):
            raise ConfigError("grid list must contain positive cell counts")
        if list(self.grids) != sorted(set(self.grids)):
            raise ConfigError("grid list must be strictly increasing")
        if any(n not in ("L2", "H1", "H2") for n in self.norms):
            raise ConfigError(f"unknown norm in {self.norms}")
        if self.problem == "particle-list" and not self.particle_specs:
            raise ConfigError("particle-list problem needs [particle.*] sections")
        if self.reference_n is not None:
            for n in self.grids:
                if self.reference_n % n != 0:
                    raise ConfigError(
                        f"reference grid {self.reference_n} is not nested above {n}")
        if self.reference_formulation not in ("auto", "soft_curve", "soft_bulk"):
            raise ConfigError(
                f"unknown reference formulation {self.reference_formulation!r}")
        return self


def _get(parser, section, key, default=None, cast=str):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
    return default


def _get_bool(parser, section, key, default):
    if parser.has_option(section, key):
        try:
            return parser.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"bad boolean for [{section}] {key}") from exc
    return default


def _parse_particle(parser, section):
    kind = _get(parser, section, "shape", "ellipse")
    center = _get(parser, section, "center", "0 0")
    try:
        cx, cy = (float(v) for v in center.split())
    except ValueError as exc:
        raise ConfigError(f"bad center in [{section}]: {center!r}") from exc
    try:
        if kind == "circle":
            shape = circle((cx, cy), _get(parser, section, "radius", cast=float))
        elif kind == "ellipse":
            shape = Ellipse(center=(cx, cy),
                            a=_get(parser, section, "a", cast=float),
                            b=_get(parser, section, "b", cast=float),
                            angle=_get(parser, section, "angle", 0.0, float))
        else:
            raise ConfigError(f"unknown shape {kind!r} in [{section}]")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad shape parameters in [{section}]: {exc}") from exc
    f1_expr = _get(parser, section, "f1", "0")
    f2_expr = _get(parser, section, "f2", "0")
    particle = Particle(
        shape=shape,
        f1=make_profile(f1_expr),
        f2=make_profile(f2_expr),
        variable_height=_get_bool(parser, section, "variable_height", True),
        exterior=_get_bool(parser, section, "exterior", False),
    )
    f2_const = None
    try:
        f2_const = float(str(f2_expr).strip())
    except ValueError:
        pass
    return ParticleSpec(particle=particle,
                        bulk_field=_get(parser, section, "bulk_field", "zero"),
                        f2_const=f2_const)


def parse_config(path=None, text=None) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        if text is not None:
            parser.read_string(text)
        elif path is not None:
            if not parser.read(path):
                raise ConfigError(f"config file not found: {path}")
        else:
            parser.read_string("")
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    known = {"problem", "formulation", "grids", "norms", "domain", "quadrature",
             "reference", "output", "lab"}
    for section in parser.sections():
        if section not in known and not section.startswith("particle."):
            raise ConfigError(f"unknown config section [{section}]")

    cfg = ExperimentConfig()
    cfg.problem = _get(parser, "problem", "kind", cfg.problem)
    cfg.kappa = _get(parser, "problem", "kappa", cfg.kappa, float)
    cfg.sigma = _get(parser, "problem", "sigma", cfg.sigma, float)
    cfg.formulation = _get(parser, "formulation", "kind", cfg.formulation)
    cfg.lambda1 = _get(parser, "formulation", "lambda1", cfg.lambda1, float)
    cfg.lambda2 = _get(parser, "formulation", "lambda2", cfg.lambda2, float)
    cfg.c = _get(parser, "formulation", "c", cfg.c, float)
    cfg.s = _get(parser, "formulation", "s", cfg.s, int)
    cfg.bulk_lambda = _get(parser, "formulation", "lambda", None, float)
    if parser.has_option("grids", "list"):
        try:
            cfg.grids = tuple(int(v) for v in parser.get("grids", "list").split())
        except ValueError as exc:
            raise ConfigError("bad grid list") from exc
    if parser.has_option("norms", "list"):
        cfg.norms = tuple(parser.get("norms", "list").split())
    if parser.has_option("domain", "bounds"):
        try:
            cfg.bounds = tuple(float(v) for v in parser.get("domain", "bounds").split())
        except ValueError as exc:
            raise ConfigError("bad domain bounds") from exc
        if len(cfg.bounds) != 4:
            raise ConfigError("domain bounds need four numbers")
    cfg.quad = QuadOptions(
        order=_get(parser, "quadrature", "quad_order", 5, int),
        cutcell_depth=_get(parser, "quadrature", "cutcell_depth", 8, int),
        curve_pts=_get(parser, "quadrature", "curve_points_per_cell", 6, int),
        max_dtheta=_get(parser, "quadrature", "max_dtheta", 0.2, float),
    )
    cfg.reference_n = _get(parser, "reference", "n", None, int)
    cfg.reference_lambda1 = _get(parser, "reference", "lambda1", 3.0, float)
    cfg.reference_c = _get(parser, "reference", "c", 1e-3, float)
    cfg.reference_formulation = _get(parser, "reference", "formulation", "auto")
    cfg.out_path = _get(parser, "output", "path", cfg.out_path)
    cfg.figures = _get_bool(parser, "output", "figures", cfg.figures)
    cfg.seed = _get(parser, "lab", "seed", cfg.seed, int)
    cfg.lab_bound_count = _get(parser, "lab", "bound_count", 1000, int)
    cfg.lab_perturbed_count = _get(parser, "lab", "perturbed_count", 200, int)
    cfg.particle_specs = tuple(
        _parse_particle(parser, s) for s in sorted(parser.sections())
        if s.startswith("particle."))
    return cfg.validate()


#: Documented default layout for the four-ellipse study: one ellipse per
#: quadrant, alternating orientations, constant slopes +1, +1, -1, -1.
NONSYM_DEFAULT = """\
[problem]
kind = particle-list

[formulation]
kind = soft_curve
lambda1 = 2

[grids]
list = 8 16 32

[reference]
n = 128
lambda1 = 3

[particle.1]
shape = ellipse
center = 0.45 0.5
a = 0.2
b = 0.1
angle = 0.0
f2 = 1
bulk_field = normal_slope

[particle.2]
shape = ellipse
center = -0.5 0.45
a = 0.2
b = 0.1
angle = 1.5707963267948966
f2 = 1
bulk_field = normal_slope

[particle.3]
shape = ellipse
center = -0.45 -0.5
a = 0.2
b = 0.1
angle = 0.0
f2 = -1
bulk_field = normal_slope

[particle.4]
shape = ellipse
center = 0.5 -0.45
a = 0.2
b = 0.1
angle = 1.5707963267948966
f2 = -1
bulk_field = normal_slope
"""
