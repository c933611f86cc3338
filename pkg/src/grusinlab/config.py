"""Experiment configuration: a strict, YAML-backed nested mapping.

Configs are validated before any compute; unknown keys are rejected so
that typos cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .assembly import Grid
from .params import REPRESENTATIVES, CoefficientField, GrusinParams

PARAM_KEYS = {"n", "m", "d1", "d1p", "d2", "d2p", "representative"}
GRID_KEYS = {"half_widths", "cells"}
SOLVER_KEYS = {"scheme", "steps", "mass_tol"}
TOP_KEYS = {"experiment", "seed", "out", "params", "grid", "solver", "options"}


class ConfigError(ValueError):
    pass


def _check_keys(mapping: dict, allowed: set, where: str):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


@dataclass
class SolverBlock:
    scheme: str = "cn"
    steps: int = 48
    mass_tol: float = 1e-8

    def __post_init__(self):
        if self.scheme not in ("cn", "chebyshev", "expm"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 1234
    out: str = "runs"
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    solver: SolverBlock = field(default_factory=SolverBlock)
    options: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        _check_keys(raw, TOP_KEYS, "config")
        if "experiment" not in raw:
            raise ConfigError("config requires an 'experiment' key")
        params = dict(raw.get("params", {}))
        _check_keys(params, PARAM_KEYS, "params")
        grid = dict(raw.get("grid", {}))
        _check_keys(grid, GRID_KEYS, "grid")
        solver = SolverBlock(**raw.get("solver", {}))
        cfg = cls(
            experiment=str(raw["experiment"]),
            seed=int(raw.get("seed", 1234)),
            out=str(raw.get("out", "runs")),
            params=params,
            grid=grid,
            solver=solver,
            options=dict(raw.get("options", {})),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r") as fh:
            raw = yaml.safe_load(fh)
        return cls.from_mapping(raw or {})

    def validate(self):
        if self.params:
            self.grusin_params()  # raises on invalid values
        rep = self.params.get("representative", "smooth")
        if rep not in REPRESENTATIVES:
            raise ConfigError(f"unknown representative {rep!r}")
        if self.grid:
            self.make_grid()

    def grusin_params(self) -> GrusinParams:
        p = self.params
        return GrusinParams(
            n=int(p.get("n", 1)),
            m=int(p.get("m", 0)),
            d1=float(p.get("d1", 0.0)),
            d1p=float(p.get("d1p", 0.0)),
            d2=float(p.get("d2", 0.0)),
            d2p=float(p.get("d2p", 0.0)),
        )

    def coefficient_field(self) -> CoefficientField:
        return CoefficientField(
            self.grusin_params(), self.params.get("representative", "smooth")
        )

    def make_grid(self) -> Grid:
        if not self.grid:
            raise ConfigError("config has no grid block")
        return Grid(self.grid["half_widths"], self.grid["cells"])

    def to_mapping(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "out": self.out,
            "params": dict(self.params),
            "grid": dict(self.grid),
            "solver": {
                "scheme": self.solver.scheme,
                "steps": self.solver.steps,
                "mass_tol": self.solver.mass_tol,
            },
            "options": dict(self.options),
        }

    def with_override(self, dotted_key: str, value) -> "ExperimentConfig":
        """Copy with one dotted key, e.g. 'params.d1', replaced."""
        raw = self.to_mapping()
        node = raw
        parts = dotted_key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
        return ExperimentConfig.from_mapping(raw)


def dump_config(cfg: ExperimentConfig, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_mapping(), sort_keys=True))
