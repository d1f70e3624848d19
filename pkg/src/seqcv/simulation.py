"""Scenario means, error processes and replicated data generation.

The scenario mean is constant at ``mu0`` until ``q1``, drifts linearly by
``delta1`` per step until ``q2`` and then stays at the level reached plus a
jump ``jump``. Errors are i.i.d. or weakly dependent (AR(1), finite moving
average, truncated two-sided linear process).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ArgumentDomainError, ConfigError, DataError
from .rng import stream
from .smoothing import Series

__all__ = [
    "ScenarioParams",
    "mean_path",
    "mean_vector",
    "ErrorModel",
    "IIDGaussian",
    "IIDResample",
    "AR1",
    "MovingAverage",
    "LinearProcess",
    "error_model_from_dict",
    "read_residuals",
    "generate_errors",
    "simulate_scenario",
    "simulate_batch",
]


@dataclass(frozen=True)
class ScenarioParams:
    mu0: float = 200.0
    delta1: float = -0.1
    jump: float = 0.0
    q1: int = 96
    q2: int = 193
    horizon: int = 386

    def __post_init__(self):
        if not 1 <= self.q1 < self.q2 <= self.horizon:
            raise ConfigError(
                f"need 1 <= q1 < q2 <= T; got q1={self.q1}, q2={self.q2}, T={self.horizon}"
            )

    @classmethod
    def pv_module(cls, jump: float = 0.0, horizon: int = 386) -> "ScenarioParams":
        """Power-output drift scenario: target 200, slope -0.1 between T/4 and T/2."""
        return cls(mu0=200.0, delta1=-0.1, jump=jump, q1=horizon // 4, q2=horizon // 2,
                   horizon=horizon)

    def with_jump(self, jump: float) -> "ScenarioParams":
        return ScenarioParams(self.mu0, self.delta1, jump, self.q1, self.q2, self.horizon)

    def to_dict(self) -> dict:
        return {"mu0": self.mu0, "delta1": self.delta1, "jump": self.jump,
                "q1": self.q1, "q2": self.q2, "horizon": self.horizon}


def mean_path(params: ScenarioParams, t: int) -> float:
    if not 1 <= t <= params.horizon:
        raise ArgumentDomainError(f"t={t} outside [1, {params.horizon}]")
    if t < params.q1:
        return params.mu0
    if t < params.q2:
        return params.mu0 + (t - params.q1) * params.delta1
    return params.mu0 + (params.q2 - params.q1) * params.delta1 + params.jump


def mean_vector(params: ScenarioParams) -> np.ndarray:
    t = np.arange(1, params.horizon + 1)
    drift = np.clip(t, params.q1, params.q2) - params.q1
    out = params.mu0 + drift * params.delta1
    out[t >= params.q2] += params.jump
    return out


class ErrorModel:
    """Base class; subclasses draw ``length`` values from a generator."""

    kind = "abstract"

    def draw(self, length: int, seed: int, replication: int = 0) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class IIDGaussian(ErrorModel):
    sigma: float = 1.0
    kind = "iid_gaussian"

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")

    def draw(self, length, seed, replication=0):
        if self.sigma == 0:
            return np.zeros(length)
        return self.sigma * stream(seed, replication, "errors").standard_normal(length)

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma}


@dataclass(frozen=True)
class IIDResample(ErrorModel):
    """Bootstrap from a pool of residuals, centered to mean zero."""

    values: tuple = field(repr=False)
    source: str = ""
    kind = "iid_resample"

    def __post_init__(self):
        if len(self.values) == 0:
            raise ConfigError("residual pool is empty")

    def draw(self, length, seed, replication=0):
        pool = np.asarray(self.values, dtype=float)
        pool = pool - pool.mean()
        idx = stream(seed, replication, "resample").integers(0, len(pool), size=length)
        return pool[idx]

    def to_dict(self):
        return {"kind": self.kind, "file": self.source}


@dataclass(frozen=True)
class AR1(ErrorModel):
    """Stationary AR(1): ``e_t = phi e_{t-1} + sigma u_t``, started from its stationary law."""

    phi: float = 0.0
    sigma: float = 1.0
    kind = "ar1"

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise ConfigError(f"ar1 needs |phi| < 1, got {self.phi}")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")

    @property
    def stationary_variance(self) -> float:
        return self.sigma ** 2 / (1.0 - self.phi ** 2)

    def autocovariance(self, k: int) -> float:
        return self.stationary_variance * self.phi ** abs(k)

    def draw(self, length, seed, replication=0):
        u = stream(seed, replication, "errors").standard_normal(length)
        x0 = math.sqrt(self.stationary_variance) * u[0]
        if length == 1:
            return np.array([x0])
        rest, _ = lfilter([1.0], [1.0, -self.phi], self.sigma * u[1:], zi=[self.phi * x0])
        return np.concatenate([[x0], rest])

    def to_dict(self):
        return {"kind": self.kind, "phi": self.phi, "sigma": self.sigma}


@dataclass(frozen=True)
class MovingAverage(ErrorModel):
    """``e_t = sum_k b_k u_{t-k}`` with i.i.d. standard normal ``u`` scaled by ``sigma``."""

    coefficients: tuple = (1.0,)
    sigma: float = 1.0
    kind = "ma"

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise ConfigError("ma needs at least one coefficient")

    def draw(self, length, seed, replication=0):
        b = np.asarray(self.coefficients, dtype=float)
        u = self.sigma * stream(seed, replication, "innovations").standard_normal(length + len(b) - 1)
        return np.convolve(u, b, mode="valid")

    def to_dict(self):
        return {"kind": self.kind, "coefficients": list(self.coefficients), "sigma": self.sigma}


@dataclass(frozen=True)
class LinearProcess(ErrorModel):
    """Two-sided linear process ``sum_{|i| <= L} theta_i u_{t-i}``.

    ``theta`` maps an integer lag to its coefficient. The neglected mass
    ``sum_{|i| > L} |theta_i|`` is computed numerically out to
    ``tail_horizon`` lags; a tail above ``max_tail`` is rejected as a
    truncation that does not approximate the infinite filter.
    """

    theta: Callable[[int], float] = field(compare=False, repr=False)
    truncation: int = 30
    sigma: float = 1.0
    max_tail: float = 1e-2
    tail_horizon: int = 100_000
    label: str = "custom"
    kind = "linear_process"

    def __post_init__(self):
        if self.truncation < 0:
            raise ConfigError("truncation must be nonnegative")
        tail = self.tail_bound
        if not math.isfinite(tail) or tail > self.max_tail:
            raise ConfigError(
                f"linear process coefficients beyond L={self.truncation} sum to {tail:.3g} "
                f"> {self.max_tail}; increase the truncation or check summability"
            )

    @classmethod
    def geometric(cls, rho: float, truncation: int = 30, sigma: float = 1.0, **kw) -> "LinearProcess":
        if not 0 <= abs(rho) < 1:
            raise ConfigError(f"geometric coefficients need |rho| < 1, got {rho}")
        return cls(lambda i: rho ** abs(i), truncation, sigma, label=f"geometric({rho})", **kw)

    @property
    def coefficients(self) -> np.ndarray:
        lags = range(-self.truncation, self.truncation + 1)
        return np.array([self.theta(i) for i in lags], dtype=float)

    @property
    def tail_bound(self) -> float:
        lags = np.arange(self.truncation + 1, self.truncation + 1 + self.tail_horizon)
        vals = np.array([abs(self.theta(int(i))) + abs(self.theta(-int(i))) for i in lags])
        return float(vals.sum())

    @property
    def ned_error(self) -> float:
        """L2 approximation error ``2 * tail * ||u||_2`` of the truncated filter."""
        return 2.0 * self.tail_bound * self.sigma

    def draw(self, length, seed, replication=0):
        theta = self.coefficients
        u = self.sigma * stream(seed, replication, "innovations").standard_normal(
            length + 2 * self.truncation)
        return np.convolve(u, theta, mode="valid")

    def to_dict(self):
        return {"kind": self.kind, "label": self.label, "truncation": self.truncation,
                "sigma": self.sigma, "tail_bound": self.tail_bound}


def read_residuals(path) -> tuple:
    """One residual per line; a non-numeric first line is taken as a header."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"residual file not found: {p}")
    values = []
    with p.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if lineno == 1:
                    continue
                raise DataError(f"{p}:{lineno}: not a number: {row[0]!r}") from None
    if not values:
        raise DataError(f"{p}: no residuals found")
    return tuple(values)


def error_model_from_dict(d: dict, base_dir: Optional[Path] = None) -> ErrorModel:
    kind = d.get("kind", "iid_gaussian")
    try:
        if kind == "iid_gaussian":
            return IIDGaussian(float(d.get("sigma", 1.0)))
        if kind == "iid_resample":
            path = Path(d["file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return IIDResample(read_residuals(path), source=str(path))
        if kind == "ar1":
            return AR1(float(d["phi"]), float(d.get("sigma", 1.0)))
        if kind == "ma":
            return MovingAverage(tuple(float(b) for b in d["coefficients"]), float(d.get("sigma", 1.0)))
        if kind == "linear_process":
            L = int(d.get("truncation", 30))
            sigma = float(d.get("sigma", 1.0))
            if "rho" in d:
                return LinearProcess.geometric(float(d["rho"]), L, sigma)
            coef = [float(c) for c in d["coefficients"]]
            if len(coef) != 2 * L + 1:
                raise ConfigError("explicit linear-process coefficients need length 2L+1")
            return LinearProcess(lambda i: coef[i + L] if abs(i) <= L else 0.0, L, sigma,
                                 tail_horizon=1, label="explicit")
    except KeyError as exc:
        raise ConfigError(f"error model {kind!r} is missing field {exc.args[0]!r}") from None
    raise ConfigError(f"unknown error model kind {kind!r}")


def generate_errors(model: ErrorModel, length: int, seed: int, replication: int = 0) -> np.ndarray:
    if length < 1:
        raise ArgumentDomainError("length must be positive")
    return model.draw(length, seed, replication)


def simulate_scenario(params: ScenarioParams, model: ErrorModel, seed: int,
                      replication: int = 0) -> Series:
    """``Y_t = mean(t) + e_t`` for ``t = 1..T``."""
    y = mean_vector(params) + generate_errors(model, params.horizon, seed, replication)
    return Series(y, params.horizon)


def simulate_batch(params: ScenarioParams, model: ErrorModel, seed: int, replications: int,
                   first: int = 0, threads: int = 1, mean: Optional[np.ndarray] = None) -> np.ndarray:
    """Stack replications ``first .. first + replications - 1`` row by row.

    ``mean`` overrides the scenario mean (any vector of length T).
    """
    mu = mean_vector(params) if mean is None else np.asarray(mean, dtype=float)
    T = len(mu)
    reps = range(first, first + replications)

    def one(r):
        return model.draw(T, seed, r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, reps))
    else:
        rows = [one(r) for r in reps]
    return mu + np.array(rows).reshape(replications, T)
