"""JSON run configuration.

A run is reproducible from its configuration and seed alone. The file carries
a ``schema_version`` field; unknown keys are rejected so that typos do not
silently fall back to defaults.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .crossval import CvPlan
from .detection import DetectorSpec
from .errors import ConfigError, DataError
from .kernels import get_kernel
from .simulation import ScenarioParams, error_model_from_dict

SCHEMA_VERSION = 1

MEAN_FAMILIES = ("constant", "linear", "sine")

BLOCK_KEYS = {
    "detector": {"direction", "control_limit", "start_index", "start_cap", "start_from", "pilot",
                 "bandwidth", "target_arl", "replications", "bracket", "reference_limit"},
    "scenario": {"mu0", "delta1", "jump", "q1", "q2", "horizon"},
    "experiment": {"deltas", "delta_units", "sigma", "replications"},
    "limit": {"xis", "ss", "modes", "tol", "mean_function"},
}


@dataclass
class Config:
    schema_version: int = SCHEMA_VERSION
    kernel: str = "gaussian"
    xi_max: float = 20.0
    xi_grid_size: int = 61
    s0: float = 0.1
    checkpoints: Optional[list] = None
    checkpoint_indices: Optional[list] = None
    checkpoint_count: Optional[int] = None
    xi: Optional[float] = None
    bandwidth: Optional[float] = None
    horizon: Optional[int] = None
    detector: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)
    errors: dict = field(default_factory=lambda: {"kind": "iid_gaussian", "sigma": 2.15})
    experiment: dict = field(default_factory=dict)
    limit: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    output_dir: str = "out"
    base_dir: Optional[str] = field(default=None, repr=False)

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "Config":
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(extra))}")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
        cfg = cls(**d)
        cfg.base_dir = None if base_dir is None else str(base_dir)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "Config":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{p}: top level must be an object")
        return cls.from_dict(d, base_dir=p.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def validate(self):
        get_kernel(self.kernel)
        if not self.xi_max > 1:
            raise ConfigError("xi_max must exceed 1")
        if self.xi_grid_size < 1:
            raise ConfigError("xi_grid_size must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        given = [x for x in (self.checkpoints, self.checkpoint_indices, self.checkpoint_count)
                 if x is not None]
        if len(given) > 1:
            raise ConfigError("give only one of checkpoints, checkpoint_indices, checkpoint_count")
        if self.bandwidth is not None and self.xi is not None:
            raise ConfigError("give either bandwidth or xi, not both")
        for name, allowed in BLOCK_KEYS.items():
            block = getattr(self, name)
            if not isinstance(block, dict):
                raise ConfigError(f"{name} must be an object")
            extra = set(block) - allowed
            if extra:
                raise ConfigError(f"unknown keys in {name}: {', '.join(sorted(extra))}")
        if self.experiment.get("delta_units", "sigma") not in ("sigma", "absolute"):
            raise ConfigError("experiment.delta_units must be 'sigma' or 'absolute'")

    # derived objects

    @property
    def kernel_obj(self):
        return get_kernel(self.kernel)

    @property
    def xi_grid(self) -> np.ndarray:
        return np.linspace(1.0, self.xi_max, self.xi_grid_size)

    def checkpoint_fractions(self, horizon: int) -> list:
        if self.checkpoints is not None:
            return [float(s) for s in self.checkpoints]
        if self.checkpoint_indices is not None:
            return [int(n) / horizon for n in self.checkpoint_indices]
        n = self.checkpoint_count or 1
        return [self.s0 + k * (1.0 - self.s0) / n for k in range(1, n + 1)]

    def plan(self, horizon: int) -> CvPlan:
        return CvPlan(self.xi_grid, self.s0, tuple(self.checkpoint_fractions(horizon)))

    def fixed_bandwidth(self, horizon: int) -> Optional[float]:
        if self.bandwidth is not None:
            return float(self.bandwidth)
        if self.xi is not None:
            return horizon / float(self.xi)
        return None

    def scenario_params(self) -> ScenarioParams:
        d = dict(self.scenario)
        horizon = int(d.get("horizon", self.horizon or 386))
        base = ScenarioParams.pv_module(horizon=horizon)
        try:
            return ScenarioParams(
                mu0=float(d.get("mu0", base.mu0)),
                delta1=float(d.get("delta1", base.delta1)),
                jump=float(d.get("jump", 0.0)),
                q1=int(d.get("q1", base.q1)),
                q2=int(d.get("q2", base.q2)),
                horizon=horizon,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid scenario block: {exc}") from None

    def error_model(self):
        base = Path(self.base_dir) if self.base_dir else None
        try:
            return error_model_from_dict(self.errors, base_dir=base)
        except DataError as exc:
            raise ConfigError(str(exc)) from None

    def detector_spec(self, horizon: int) -> DetectorSpec:
        d = self.detector
        h = d.get("bandwidth", self.fixed_bandwidth(horizon))
        return DetectorSpec(
            direction=d.get("direction", "lower_crossing"),
            kernel=self.kernel_obj,
            bandwidth=float(h) if h is not None else self.plan(horizon),
            control_limit=d.get("control_limit"),
            start_index=d.get("start_index"),
            start_cap=int(d.get("start_cap", 25)),
            pilot=d.get("pilot"),
            start_from=d.get("start_from", "pilot"),
        )

    def mean_function(self):
        d = dict(self.limit.get("mean_function", {"kind": "linear", "intercept": 1.0, "slope": 1.0}))
        kind = d.get("kind")
        if kind == "constant":
            v = float(d["value"])
            return lambda u: v + 0.0 * np.asarray(u, dtype=float)
        if kind == "linear":
            a, b = float(d.get("intercept", 1.0)), float(d.get("slope", 1.0))
            return lambda u: a + b * np.asarray(u, dtype=float)
        if kind == "sine":
            lv = float(d.get("level", 1.0))
            amp = float(d.get("amplitude", 0.5))
            fr = float(d.get("frequency", 1.0))
            return lambda u: lv + amp * np.sin(2.0 * math.pi * fr * np.asarray(u, dtype=float))
        raise ConfigError(f"limit.mean_function.kind must be one of {MEAN_FAMILIES}")

