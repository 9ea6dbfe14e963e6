"""Scenario files: an INI-style ``key = value`` format with section headers.

Initial fields are given as generator expressions, e.g.::

    k0 = constant(0.2) + gaussian-bump(0.0, 1.5, 1.0)
    a0 = sum-of-bumps([[-2.0, 1.0, 1.0], [2.0, 1.0, 0.5]])
    k0 = step(0.0, 0.5, 1.5)

``gaussian-bump(center, width, height)`` takes a number or ``[x, y]`` as
center; ``step(edge, lo, hi)`` is ``lo`` left of ``edge`` along the first
axis and ``hi`` elsewhere. Terms may be added with ``+``.
"""
from __future__ import annotations

import ast
import configparser
import hashlib
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .adjoint import OptimizeConfig
from .forward import Scenario
from .grid import Field, Grid, TimeGrid
from .kernels import KernelTailError, NominalSpec, tail_mass
from .objective import AdmissibleSet, ObjectiveSpec
from .operators import ModelParams, ProductionSpec, validate_model


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = errors


GENERATORS = {"constant": 1, "gaussian-bump": 3, "step": 3, "sum-of-bumps": 1}


@dataclass(frozen=True)
class FieldExpr:
    """Sum of named generator terms, each ``(name, args)``."""

    terms: tuple[tuple[str, tuple], ...]

    def render(self) -> str:
        return " + ".join(f"{name}({', '.join(_render(a) for a in args)})" for name, args in self.terms)

    def sample(self, grid: Grid) -> np.ndarray:
        out = np.zeros(grid.shape)
        for name, args in self.terms:
            out += _sample(grid, name, args)
        return out


def _render(a) -> str:
    if isinstance(a, (list, tuple)):
        return "[" + ", ".join(_render(b) for b in a) + "]"
    return repr(float(a))


def _bump(grid: Grid, center, width, height):
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    sq = sum((c - x0) ** 2 for c, x0 in zip(grid.coords, center))
    return height * np.exp(-sq / (2.0 * width**2))


def _sample(grid: Grid, name: str, args: tuple) -> np.ndarray:
    if name == "constant":
        return np.full(grid.shape, float(args[0]))
    if name == "gaussian-bump":
        return _bump(grid, *args)
    if name == "step":
        edge, lo, hi = args
        return np.where(grid.coords[0] < edge, float(lo), float(hi))
    return sum((_bump(grid, *b) for b in args[0]), np.zeros(grid.shape))


def _numbers(node_value, errors, where, depth=0):
    if isinstance(node_value, bool):
        errors.append(f"{where}: booleans are not numbers")
        return None
    if isinstance(node_value, (int, float)):
        if not math.isfinite(node_value):
            errors.append(f"{where}: non-finite number")
        return float(node_value)
    if isinstance(node_value, (list, tuple)) and depth < 3:
        return tuple(_numbers(v, errors, where, depth + 1) for v in node_value)
    errors.append(f"{where}: arguments must be numbers or lists of numbers")
    return None


def parse_field_expr(text: str, dim: int, where: str, errors: list[str]) -> FieldExpr | None:
    src = text.strip().replace("gaussian-bump", "gaussian_bump").replace("sum-of-bumps", "sum_of_bumps")
    try:
        tree = ast.parse(src, mode="eval").body
    except SyntaxError:
        errors.append(f"{where}: cannot parse field expression {text!r}")
        return None
    calls = []

    def flatten(node):
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Add):
            flatten(node.left)
            flatten(node.right)
        else:
            calls.append(node)

    flatten(tree)
    terms = []
    n_err = len(errors)
    for call in calls:
        if not (isinstance(call, ast.Call) and isinstance(call.func, ast.Name)) or call.keywords:
            errors.append(f"{where}: expected generator calls joined by '+', got {text!r}")
            return None
        name = call.func.id.replace("_", "-")
        if name not in GENERATORS:
            errors.append(f"{where}: unknown generator {name!r} (known: {', '.join(GENERATORS)})")
            continue
        if len(call.args) != GENERATORS[name]:
            errors.append(f"{where}: {name} takes {GENERATORS[name]} argument(s)")
            continue
        try:
            raw = [ast.literal_eval(a) for a in call.args]
        except ValueError:
            errors.append(f"{where}: {name} arguments must be literals")
            continue
        args = tuple(_numbers(a, errors, where) for a in raw)
        if len(errors) > n_err:
            continue
        bumps = []
        if name == "gaussian-bump":
            bumps = [args]
        elif name == "sum-of-bumps":
            if not all(isinstance(b, tuple) and len(b) == 3 for b in args[0]):
                errors.append(f"{where}: sum-of-bumps expects a list of [center, width, height]")
                continue
            bumps = list(args[0])
        elif any(isinstance(a, tuple) for a in args):
            errors.append(f"{where}: {name} takes scalar arguments")
            continue
        for center, width, _ in bumps:
            if isinstance(center, tuple) and len(center) != dim:
                errors.append(f"{where}: bump center {list(center)} does not have {dim} component(s)")
            if isinstance(width, tuple) or not width > 0:
                errors.append(f"{where}: bump width must be a positive number")
        terms.append((name, args))
    if len(errors) > n_err:
        return None
    return FieldExpr(tuple(terms))


# section -> key -> (type, default, symbol / meaning)
SCHEMA: dict[str, dict[str, tuple[type, object, str]]] = {
    "grid": {
        "dim": (int, 1, "n, spatial dimension (1 or 2)"),
        "radius": (float, 8.0, "R, box half-width; R^n stands in for the whole space"),
        "points": (int, 128, "cells per axis (>= 16)"),
    },
    "time": {
        "horizon": (float, 1.0, "T, time horizon"),
        "steps": (int, 80, "N_t, number of time steps / control slabs"),
    },
    "model": {
        "alpha": (float, 0.05, "alpha, local diffusion weight (> 0)"),
        "beta": (float, 0.5, "beta, nonlocal diffusion weight (>= 0)"),
        "delta": (float, 0.05, "delta, depreciation rate"),
        "eps": (float, 0.5, "epsilon, diffusion kernel bandwidth"),
        "mu": (float, 0.25, "mu, productivity kernel bandwidth (0 < mu <= epsilon)"),
        "xi": (float, 0.5, "xi, offset in the growth-fraction denominator"),
        "eta": (float, 0.01, "eta, nominal function phi(k) = sqrt(k^2 + eta)"),
        "tail_tol": (float, 1e-8, "allowed kernel mass outside the central half of the box"),
    },
    "production": {
        "lipschitz": (float, 0.3, "L_p, Lipschitz constant of p"),
        "bound": (float, 1.0, "M_p, bound of p"),
    },
    "objective": {
        "tau": (float, 0.05, "tau, time discount rate"),
        "gamma": (float, 0.1, "gamma, spatial discount rate"),
        "rho1": (float, 0.1, "rho_1, terminal penalty weight (penalty 1/(2 rho_1))"),
        "rho2": (float, 0.01, "rho_2, non-negativity penalty weight (penalty 1/(2 rho_2))"),
        "kappa": (float, 1.0, "kappa, utility curvature in U(c) = 1 - exp(-kappa c)"),
        "utility_weight": (float, 1.0, "multiplier on the running utility (0 switches it off)"),
    },
    "admissible": {
        "c_max": (FieldExpr, "constant(0.3)", "c_max(x), maximal consumption"),
        "norm_cap": (float, 1.0, "C-bar, cap on ||c||_{L2(0,T;L2)}"),
    },
    "fields": {
        "k0": (FieldExpr, "constant(0.2) + gaussian-bump(0.0, 1.5, 1.0)", "k_0(x), initial capital (> 0)"),
        "k_T": (FieldExpr, "constant(0.3)", "k_T(x), terminal capital target"),
        "a0": (FieldExpr, "gaussian-bump(0.0, 2.0, 1.0)", "A_0(x), initial productivity"),
    },
    "solver": {
        "picard_subinterval": (float, 0.0, "T*, Picard subinterval length (0 means T/8)"),
        "picard_tol": (float, 1e-10, "Picard stopping tolerance"),
        "picard_max_iter": (int, 60, "Picard iteration cap per subinterval"),
    },
    "optimize": {
        "max_outer": (int, 200, "projected-gradient iteration cap"),
        "initial_step": (float, 1.0, "initial Armijo step"),
        "shrink": (float, 0.5, "Armijo shrink factor in (0, 1)"),
        "sufficient_decrease": (float, 1e-4, "Armijo constant in (0, 1/2)"),
        "grad_tol": (float, 1e-7, "stop when the projected-gradient norm falls below this"),
    },
    "check": {
        "samples": (int, 100, "random fields per invariant in `check`"),
        "theta": (float, 0.0, "theta for the boundedness condition (0 means 4 L_p^2)"),
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed, validated scenario file; ``values[section][key]``."""

    values: dict

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".")
        return self.values[section][key]

    def with_overrides(self, **overrides) -> "ScenarioConfig":
        """Copy with ``section__key=value`` overrides, re-validated."""
        vals = {s: dict(kv) for s, kv in self.values.items()}
        for name, value in overrides.items():
            section, key = name.split("__")
            if isinstance(value, str) and SCHEMA[section][key][0] is FieldExpr:
                value = _parse_field_or_raise(value, vals["grid"]["dim"], f"{section}.{key}")
            vals[section][key] = value
        cfg = ScenarioConfig(vals)
        errors = validate(cfg)
        if errors:
            raise ConfigError(errors)
        return cfg

    @property
    def hash(self) -> str:
        return config_hash(self)


def _parse_field_or_raise(text, dim, where):
    errors: list[str] = []
    expr = parse_field_expr(text, dim, where, errors)
    if errors:
        raise ConfigError(errors)
    return expr


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem found."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    errors: list[str] = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed scenario file: {exc}"]) from None
    raw: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                errors.append(f"unknown key {section}.{key}")
            else:
                raw.setdefault(section, {})[key] = value

    dim_text = raw.get("grid", {}).get("dim")
    try:
        dim = int(dim_text) if dim_text is not None else SCHEMA["grid"]["dim"][1]
    except ValueError:
        dim = 1
    values: dict[str, dict] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (typ, default, _) in keys.items():
            text_value = raw.get(section, {}).get(key)
            where = f"{section}.{key}"
            source = str(default) if text_value is None else text_value
            if typ is FieldExpr:
                values[section][key] = parse_field_expr(source, dim, where, errors)
            elif typ is int:
                try:
                    values[section][key] = int(source)
                except ValueError:
                    errors.append(f"{where}: expected an integer, got {source!r}")
                    values[section][key] = default
            else:
                try:
                    v = float(source)
                except ValueError:
                    errors.append(f"{where}: expected a number, got {source!r}")
                    v = float(default)
                if math.isnan(v):
                    errors.append(f"{where}: NaN is not allowed")
                    v = float(default)
                values[section][key] = v
    # keep going so that semantic errors are reported alongside syntax errors
    errors += validate(ScenarioConfig(values))
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(values)


def validate(cfg: ScenarioConfig) -> list[str]:
    v = cfg.values
    errors = []
    g, t, m = v["grid"], v["time"], v["model"]
    if g["dim"] not in (1, 2):
        errors.append(f"grid.dim must be 1 or 2, got {g['dim']}")
    if not g["radius"] > 0:
        errors.append("grid.radius must be > 0")
    if g["points"] < 16:
        errors.append("grid.points must be >= 16")
    if not t["horizon"] > 0:
        errors.append("time.horizon must be > 0")
    if t["steps"] < 1:
        errors.append("time.steps must be >= 1")
    errors += [f"model: {e}" for e in validate_model(m["alpha"], m["beta"], m["delta"], m["eps"], m["mu"], m["xi"])]
    if not m["eta"] > 0:
        errors.append("model.eta must be > 0")
    if not m["tail_tol"] > 0:
        errors.append("model.tail_tol must be > 0")
    if not errors and m["eps"] > 0:
        tm = tail_mass(m["eps"], g["dim"], g["radius"] / 2)
        if tm > m["tail_tol"]:
            errors.append(f"grid.radius {g['radius']} too small for eps {m['eps']}: kernel tail mass {tm:.2e} "
                          f"exceeds model.tail_tol {m['tail_tol']:.1e}")
    p = v["production"]
    if not (p["lipschitz"] > 0 and p["bound"] > 0):
        errors.append("production.lipschitz and production.bound must be > 0")
    o = v["objective"]
    if not o["tau"] >= 0:
        errors.append("objective.tau must be >= 0")
    for key in ("gamma", "rho1", "rho2", "kappa"):
        if not o[key] > 0:
            errors.append(f"objective.{key} must be > 0")
    if not o["utility_weight"] >= 0:
        errors.append("objective.utility_weight must be >= 0")
    if not v["admissible"]["norm_cap"] > 0:
        errors.append("admissible.norm_cap must be > 0")
    opt = v["optimize"]
    if not 0 < opt["shrink"] < 1:
        errors.append("optimize.shrink must lie in (0, 1)")
    if not 0 < opt["sufficient_decrease"] < 0.5:
        errors.append("optimize.sufficient_decrease must lie in (0, 1/2)")
    if opt["max_outer"] < 0:
        errors.append("optimize.max_outer must be >= 0")
    if v["check"]["samples"] < 1:
        errors.append("check.samples must be >= 1")
    exprs = (v["fields"]["k0"], v["admissible"]["c_max"])
    if errors or any(e is None for e in exprs):
        return errors
    grid = Grid(g["dim"], g["radius"], g["points"])
    k0 = v["fields"]["k0"].sample(grid)
    if not np.all(k0 > 0):
        errors.append("fields.k0 must be strictly positive on the grid")
    if np.any(v["admissible"]["c_max"].sample(grid) < 0):
        errors.append("admissible.c_max must be non-negative")
    return errors


def serialize(cfg: ScenarioConfig) -> str:
    """Canonical text: every key in schema order, floats in shortest round-trip form."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (typ, _, _) in keys.items():
            value = cfg.values[section][key]
            if typ is FieldExpr:
                text = value.render()
            elif typ is int:
                text = str(int(value))
            else:
                text = repr(float(value))
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(serialize(cfg).encode("utf-8")).hexdigest()


def schema_reference() -> str:
    """Annotated listing of every key, its default and the model symbol it sets."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key, (_, default, doc) in keys.items():
            out.append(f"{key} = {default}    # {doc}")
        out.append("")
    return "\n".join(out)


@dataclass
class Setup:
    scenario: Scenario
    objective: ObjectiveSpec
    admissible: AdmissibleSet
    optimize: OptimizeConfig


def build(cfg: ScenarioConfig) -> Setup:
    v = cfg.values
    g, m = v["grid"], v["model"]
    grid = Grid(g["dim"], g["radius"], g["points"])
    time = TimeGrid(v["time"]["horizon"], v["time"]["steps"])
    params = ModelParams(m["alpha"], m["beta"], m["delta"], m["eps"], m["mu"], m["xi"], NominalSpec(m["eta"]))
    production = ProductionSpec(v["production"]["lipschitz"], v["production"]["bound"])
    f = v["fields"]
    try:
        scenario = Scenario.build(grid, time, params, production, f["a0"].sample(grid), f["k0"].sample(grid),
                                  f["k_T"].sample(grid), tail_tol=m["tail_tol"])
    except KernelTailError as exc:
        raise ConfigError([str(exc)]) from None
    o = v["objective"]
    spec = ObjectiveSpec(o["tau"], o["gamma"], o["rho1"], o["rho2"], o["kappa"], o["utility_weight"])
    aset = AdmissibleSet(Field(grid, v["admissible"]["c_max"].sample(grid)), v["admissible"]["norm_cap"])
    opt = v["optimize"]
    oc = OptimizeConfig(opt["max_outer"], opt["initial_step"], opt["shrink"], opt["sufficient_decrease"],
                        opt["grad_tol"])
    return Setup(scenario, spec, aset, oc)


SHIPPED = ("default", "step", "plane2d")


def shipped_text(name: str) -> str:
    return resources.files("nlramsey.scenarios").joinpath(f"{name}.ini").read_text(encoding="utf-8")


def load_shipped(name: str) -> ScenarioConfig:
    return parse_scenario(shipped_text(name))
