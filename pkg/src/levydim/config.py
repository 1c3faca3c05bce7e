"""Run configuration: exponent trees, command parameters and their YAML/JSON form.

Parsing is strict (unknown keys raise) and every section is filled with its
defaults, so ``emit(parse(emit(cfg))) == emit(cfg)``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .criteria import ShellOptions
from .exponents import (
    AdditiveProcessSpec,
    BrownianDrift,
    DifferenceLift,
    ExponentExpr,
    FractionalPower,
    IsotropicStable,
    ProductLift,
    StableSubordinatorMarginal,
    Sum,
)
from .solver import HYPOTHESIS_KEYS, DimensionProblem, SolverOptions


class ConfigError(ValueError):
    pass


_EXPONENT_KEYS = {
    "isotropic_stable": ({"alpha"}, {"d"}),
    "brownian_drift": ({"Q"}, {"b"}),
    "stable_subordinator": ({"alpha"}, set()),
    "sum": ({"terms"}, set()),
    "fractional_power": ({"base", "gamma"}, set()),
    "product_lift": ({"components"}, set()),
    "difference_lift": ({"base", "slot", "k"}, set()),
}


def _check_keys(where: str, data: dict, required: set, optional: set = frozenset()):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    missing = required - set(data)
    unknown = set(data) - required - set(optional)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def exponent_from_config(tree: dict, where: str = "exponent") -> ExponentExpr:
    if not isinstance(tree, dict) or "kind" not in tree:
        raise ConfigError(f"{where}: exponent needs a 'kind'")
    kind = tree["kind"]
    if kind not in _EXPONENT_KEYS:
        raise ConfigError(f"{where}: unknown exponent kind {kind!r}")
    body = {key: val for key, val in tree.items() if key != "kind"}
    required, optional = _EXPONENT_KEYS[kind]
    _check_keys(f"{where} ({kind})", body, required, optional)
    try:
        if kind == "isotropic_stable":
            return IsotropicStable(float(body["alpha"]), int(body.get("d", 1)))
        if kind == "brownian_drift":
            return BrownianDrift(np.array(body["Q"], dtype=float),
                                 None if body.get("b") is None else np.array(body["b"], dtype=float))
        if kind == "stable_subordinator":
            return StableSubordinatorMarginal(float(body["alpha"]))
        if kind == "sum":
            return Sum(tuple(exponent_from_config(t, f"{where}.terms[{i}]")
                             for i, t in enumerate(body["terms"])))
        if kind == "fractional_power":
            return FractionalPower(exponent_from_config(body["base"], f"{where}.base"), float(body["gamma"]))
        if kind == "product_lift":
            return ProductLift(tuple(exponent_from_config(t, f"{where}.components[{i}]")
                                     for i, t in enumerate(body["components"])))
        return DifferenceLift(exponent_from_config(body["base"], f"{where}.base"),
                              int(body["slot"]), int(body["k"]))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def exponent_to_config(expr: ExponentExpr) -> dict:
    if isinstance(expr, IsotropicStable):
        return {"kind": "isotropic_stable", "alpha": float(expr.alpha), "d": int(expr.d)}
    if isinstance(expr, BrownianDrift):
        return {"kind": "brownian_drift", "Q": expr.Q.tolist(), "b": expr.b.tolist()}
    if isinstance(expr, StableSubordinatorMarginal):
        return {"kind": "stable_subordinator", "alpha": float(expr.alpha)}
    if isinstance(expr, Sum):
        return {"kind": "sum", "terms": [exponent_to_config(t) for t in expr.terms]}
    if isinstance(expr, FractionalPower):
        return {"kind": "fractional_power", "base": exponent_to_config(expr.base), "gamma": float(expr.gamma)}
    if isinstance(expr, ProductLift):
        return {"kind": "product_lift", "components": [exponent_to_config(c) for c in expr.components]}
    if isinstance(expr, DifferenceLift):
        return {"kind": "difference_lift", "base": exponent_to_config(expr.base),
                "slot": int(expr.slot), "k": int(expr.k)}
    raise ConfigError(f"{type(expr).__name__} exponents cannot be written to a config")


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def digest(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


@dataclass
class ProblemConfig:
    kind: str = "level_set"
    exponents: list = field(default_factory=list)
    k: Optional[int] = None

    def validate(self):
        if self.kind not in ("level_set", "multiple_times"):
            raise ConfigError(f"problem.kind must be level_set or multiple_times, got {self.kind!r}")
        if not self.exponents:
            raise ConfigError("problem.exponents must list at least one exponent")
        if self.kind == "level_set" and self.k is not None:
            raise ConfigError("problem.k is only meaningful for multiple_times")
        if self.kind == "multiple_times" and (self.k is None or int(self.k) < 2):
            raise ConfigError("problem.k must be an integer >= 2 for multiple_times")
        self.exponent_exprs()

    def exponent_exprs(self) -> list:
        return [exponent_from_config(t, f"problem.exponents[{i}]") for i, t in enumerate(self.exponents)]

    def spec_hash(self) -> str:
        return digest({"kind": self.kind, "exponents": self.exponents, "k": self.k})

    def build(self, hypotheses: dict) -> DimensionProblem:
        exprs = self.exponent_exprs()
        if self.kind == "level_set":
            return DimensionProblem.level_set(AdditiveProcessSpec(tuple(exprs)), **hypotheses)
        k = int(self.k)
        if len(exprs) == 1:
            exprs = exprs * k
        if len(exprs) != k:
            raise ConfigError(f"multiple_times needs 1 or k={k} exponents, got {len(exprs)}")
        return DimensionProblem.multiple_times(exprs, k, **hypotheses)


@dataclass
class ShellSection:
    m_lo: int = -10
    m_hi: int = 30
    samples: int = 20_000
    slope_margin: float = 0.25
    tail_window: int = 8
    shard_size: int = 5_000


@dataclass
class SolverSection:
    beta_tol: float = 0.02
    slope_margin: float = 0.01
    scan_points: int = 4
    cross_check: bool = True
    method: str = "auto"


@dataclass
class SimulateSection:
    target: str = "field"  # field | subordinator | saturated
    T: float = 1.0
    mesh: int = 16
    paths: int = 1
    format: str = "csv"
    alpha: Optional[float] = None
    t: Optional[list] = None
    samples: int = 100_000
    laplace_points: list = field(default_factory=lambda: [0.5, 1.0, 2.0])


@dataclass
class EstimateSection:
    inputs: list = field(default_factory=list)
    eps_c: float = 1.0
    eps_degree: Optional[float] = None
    levels: Optional[list] = None
    dim_report: Optional[str] = None
    tolerance: float = 0.15


@dataclass
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    hypotheses: dict = field(default_factory=lambda: {key: False for key in HYPOTHESIS_KEYS})
    seed: int = 0
    threads: int = 1
    out: str = "out"
    shells: ShellSection = field(default_factory=ShellSection)
    solver: SolverSection = field(default_factory=SolverSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    estimate: EstimateSection = field(default_factory=EstimateSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        return digest(self.to_dict())

    def shell_options(self) -> ShellOptions:
        s = self.shells
        return ShellOptions(s.m_lo, s.m_hi, s.samples, self.seed, s.slope_margin, s.tail_window,
                            s.shard_size, self.threads)

    def solver_options(self) -> SolverOptions:
        s = self.solver
        return SolverOptions(s.beta_tol, s.slope_margin, s.scan_points, s.cross_check, s.method,
                             self.shell_options())


_SECTIONS = {
    "problem": ProblemConfig,
    "shells": ShellSection,
    "solver": SolverSection,
    "simulate": SimulateSection,
    "estimate": EstimateSection,
}


def _section(cls, data, where):
    names = {f.name for f in fields(cls)}
    _check_keys(where, data, set(), names)
    return cls(**data)


def parse_config(data: dict) -> RunConfig:
    if data is None:
        data = {}
    top = {f.name for f in fields(RunConfig)}
    _check_keys("config", data, {"problem"}, top)
    kwargs = {}
    for key, val in data.items():
        if key in _SECTIONS:
            kwargs[key] = _section(_SECTIONS[key], val, key)
        elif key == "hypotheses":
            _check_keys("hypotheses", val, set(), set(HYPOTHESIS_KEYS))
            kwargs[key] = {k: bool(val.get(k, False)) for k in HYPOTHESIS_KEYS}
        else:
            kwargs[key] = val
    cfg = RunConfig(**kwargs)
    cfg.problem.validate()
    if not isinstance(cfg.seed, int) or cfg.seed < 0 or cfg.seed >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.simulate.target not in ("field", "subordinator", "saturated"):
        raise ConfigError(f"simulate.target {cfg.simulate.target!r} is not field, subordinator or saturated")
    if cfg.simulate.format not in ("csv", "bin"):
        raise ConfigError("simulate.format must be csv or bin")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    return parse_config(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
