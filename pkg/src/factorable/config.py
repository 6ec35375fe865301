"""Experiment configuration: a single JSON document, validated strictly.

Unknown keys are rejected with the dotted path of the offending field.
Precedence when resolving: command-line flags > config file > defaults.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .factorize import SequencePlan, default_sequences
from .fields import (FieldEnsemble, fbm_covariance, line_space, simulate_brownian,
                     simulate_brownian_sheet, simulate_fbm, simulate_gaussian_field,
                     simulate_stable)
from .orlicz import OrliczFunction, PsiFunction, norm_from_config

GENERATORS = ("brownian", "fbm", "stable", "gaussian", "brownian_sheet", "constant")
PIPELINES = ("factorize", "entropy-bound", "kr-bound", "rectangle", "heavy-tail")
GAUSSIAN_FAMILIES = ("brownian", "fbm", "gaussian", "brownian_sheet")
KERNELS = ("min", "exponential", "squared_exponential")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _check_keys(doc, allowed, path):
    if not isinstance(doc, dict):
        raise ConfigError(path, f"expected an object, got {type(doc).__name__}")
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _from_dict(cls, doc, path):
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(doc, names, path)
    return cls(**doc)


@dataclass
class GridSpec:
    start: float = 0.0
    stop: float = 1.0 / math.e
    n: int = 2049

    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n)


@dataclass
class GeneratorSpec:
    family: str = "brownian"
    params: dict = field(default_factory=dict)
    grid: GridSpec = field(default_factory=GridSpec)
    M: int = 10_000
    seed: int = 0
    dims: int = 2

    def validate(self, path="generator"):
        if self.family not in GENERATORS:
            raise ConfigError(f"{path}.family", f"unknown generator {self.family!r}; "
                              f"choose from {GENERATORS}")
        if int(self.M) < 2:
            raise ConfigError(f"{path}.M", "need at least 2 realizations")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"{path}.seed", "seed must be an unsigned 64-bit integer")
        if int(self.grid.n) < 2:
            raise ConfigError(f"{path}.grid.n", "need at least 2 grid points")
        allowed = {
            "brownian": {"scale"},
            "fbm": {"hurst"},
            "stable": {"alpha"},
            "gaussian": {"kernel", "length", "variance"},
            "brownian_sheet": set(),
            "constant": {"value"},
        }[self.family]
        for k in self.params:
            if k not in allowed:
                raise ConfigError(f"{path}.params.{k}", f"not a parameter of {self.family}")
        if self.family == "gaussian" and self.params.get("kernel", "min") not in KERNELS:
            raise ConfigError(f"{path}.params.kernel", f"choose from {KERNELS}")

    def simulate(self, threads: Optional[int] = None) -> FieldEnsemble:
        t = self.grid.points()
        p, M, seed = self.params, int(self.M), int(self.seed)
        if self.family == "brownian":
            return simulate_brownian(t, M, seed, threads, scale=float(p.get("scale", 1.0)))
        if self.family == "fbm":
            return simulate_fbm(float(p.get("hurst", 0.5)), t, M, seed, threads)
        if self.family == "stable":
            return simulate_stable(float(p.get("alpha", 1.2)), t, M, seed, threads)
        if self.family == "gaussian":
            kernel = p.get("kernel", "min")
            ell = float(p.get("length", 1.0))
            var = float(p.get("variance", 1.0))
            lag = np.abs(t[:, None] - t[None, :])
            if kernel == "min":
                cov = var * fbm_covariance(t, 0.5)
            elif kernel == "exponential":
                cov = var * np.exp(-lag / ell)
            else:
                cov = var * np.exp(-0.5 * (lag / ell) ** 2)
            return simulate_gaussian_field(line_space(t), cov, M, seed, threads)
        if self.family == "brownian_sheet":
            return simulate_brownian_sheet([t] * int(self.dims), M, seed, threads)
        value = float(p.get("value", 0.0))
        return FieldEnsemble(np.full((M, t.size), value), line_space(t), "constant", seed,
                             {"value": value})


@dataclass
class PlanSpec:
    nu: float = 1.0
    theta_param: float = 1.0
    N: int = 40
    a: Optional[list] = None
    b: Optional[list] = None

    def build(self, path="plan") -> SequencePlan:
        try:
            if self.a is not None or self.b is not None:
                if self.a is None or self.b is None:
                    raise ValueError("explicit sequences need both a and b")
                return SequencePlan.explicit(self.a, self.b)
            return default_sequences(self.nu, self.theta_param, int(self.N))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None


@dataclass
class OptionsSpec:
    m: float = 1.0
    direction: Optional[list] = None
    entropy_psi: dict = field(default_factory=lambda: {"family": "degenerate", "param": 2.0})
    entropy_deltas: dict = field(default_factory=lambda: {"lo": 2.0 ** -10, "hi": 0.25, "n": 20})
    kr_p: float = 4.0
    kr_theta: float = 2.0
    kr_points: int = 129


@dataclass
class ExperimentConfig:
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    norm: dict = field(default_factory=lambda: {"kind": "orlicz", "phi": {"family": "power", "param": 2.0}})
    plan: PlanSpec = field(default_factory=PlanSpec)
    delta_grid: Optional[list] = None
    pipelines: list = field(default_factory=lambda: ["factorize"])
    options: OptionsSpec = field(default_factory=OptionsSpec)
    out: str = "out"
    threads: Optional[int] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        _check_keys(doc, [f.name for f in dataclasses.fields(cls)], "")
        doc = dict(doc)
        if "generator" in doc:
            gen = dict(doc["generator"])
            _check_keys(gen, [f.name for f in dataclasses.fields(GeneratorSpec)], "generator")
            if "grid" in gen:
                gen["grid"] = _from_dict(GridSpec, gen["grid"], "generator.grid")
            doc["generator"] = GeneratorSpec(**gen)
        if "plan" in doc:
            doc["plan"] = _from_dict(PlanSpec, doc["plan"], "plan")
        if "options" in doc:
            doc["options"] = _from_dict(OptionsSpec, doc["options"], "options")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    def validate(self):
        self.generator.validate()
        try:
            self.norm_spec()
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError("norm", str(exc)) from None
        self.plan.build()
        for i, p in enumerate(self.pipelines):
            if p not in PIPELINES:
                raise ConfigError(f"pipelines[{i}]", f"unknown pipeline {p!r}; choose from {PIPELINES}")
        if self.delta_grid is not None:
            d = np.asarray(self.delta_grid, dtype=float)
            if d.ndim != 1 or np.any(d < 0):
                raise ConfigError("delta_grid", "must be a list of nonnegative numbers")
        try:
            PsiFunction.from_config(self.options.entropy_psi)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError("options.entropy_psi", str(exc)) from None
        if self.threads is not None and int(self.threads) < 1:
            raise ConfigError("threads", "must be positive")

    def norm_spec(self):
        return norm_from_config(self.norm)

    def orlicz(self) -> Optional[OrliczFunction]:
        spec = self.norm_spec()
        return getattr(spec, "phi", None)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_overrides(self, seed=None, out=None, threads=None) -> "ExperimentConfig":
        cfg = dataclasses.replace(self, generator=dataclasses.replace(self.generator))
        if seed is not None:
            cfg.generator.seed = int(seed)
        if out is not None:
            cfg.out = str(out)
        if threads is not None:
            cfg.threads = int(threads)
        cfg.validate()
        return cfg
