"""Sequential leave-one-out cross-validation over the localization parameter.

The bandwidth is tied to the horizon through ``h = T / xi``, so a grid of
``xi`` values in ``[1, Xi]`` is a grid of bandwidths between ``T / Xi`` and
``T``. At each checkpoint ``s`` only ``Y_1..Y_{floor(T s)}`` are used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentDomainError, ConfigError
from .kernels import Kernel
from .smoothing import Series, loo_predictions

__all__ = [
    "CvPlan",
    "CvResult",
    "BandwidthPath",
    "Schedule",
    "checkpoint_index",
    "cv_criterion",
    "cv_objective",
    "objective_surface",
    "select_xi",
    "run_schedule",
    "golden_section",
]

TIE_RTOL = 1e-12


def checkpoint_index(horizon: int, s: float) -> int:
    """``floor(T s)``, robust to ``s`` being stored as ``n / T`` in floating point."""
    return int(math.floor(horizon * s + 1e-9))


def _as_series(series) -> Series:
    return series if isinstance(series, Series) else Series.of(series)


@dataclass(frozen=True)
class CvPlan:
    xi_grid: np.ndarray
    s0: float
    checkpoints: tuple

    def __post_init__(self):
        grid = np.asarray(self.xi_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ConfigError("xi grid must be a non-empty 1-D sequence")
        if grid[0] < 1.0:
            raise ConfigError(f"xi grid must lie in [1, Xi]; got minimum {grid[0]}")
        if np.any(np.diff(grid) <= 0):
            raise ConfigError("xi grid must be strictly increasing")
        if not 0.0 < self.s0 < 1.0:
            raise ConfigError(f"s0 must lie in (0, 1), got {self.s0}")
        cps = tuple(float(s) for s in self.checkpoints)
        if not cps:
            raise ConfigError("at least one checkpoint is required")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigError("checkpoints must be strictly increasing")
        if cps[0] <= self.s0:
            raise ConfigError(f"checkpoint {cps[0]} is not after s0={self.s0}")
        if cps[-1] > 1.0:
            raise ConfigError(f"checkpoint {cps[-1]} exceeds 1")
        object.__setattr__(self, "xi_grid", grid)
        object.__setattr__(self, "checkpoints", cps)

    @classmethod
    def default(cls, xi_max: float = 20.0, n_grid: int = 61, s0: float = 0.1,
                checkpoints: Sequence[float] = (1.0,)) -> "CvPlan":
        if not xi_max > 1.0:
            raise ConfigError("Xi must exceed 1")
        return cls(np.linspace(1.0, xi_max, n_grid), s0, tuple(checkpoints))

    @classmethod
    def from_indices(cls, indices: Sequence[int], horizon: int, xi_grid=None,
                     s0: Optional[float] = None) -> "CvPlan":
        """Checkpoints given as observation counts ``n`` rather than fractions ``n / T``."""
        cps = tuple(n / horizon for n in indices)
        if s0 is None:
            s0 = min(0.1, cps[0] / 2)
        grid = np.linspace(1.0, 20.0, 61) if xi_grid is None else xi_grid
        return cls(grid, s0, cps)

    @property
    def xi_min(self) -> float:
        return float(self.xi_grid[0])

    @property
    def xi_max(self) -> float:
        return float(self.xi_grid[-1])


@dataclass(frozen=True)
class CvResult:
    checkpoint: float
    index: int
    xi_grid: np.ndarray = field(repr=False)
    objective: np.ndarray = field(repr=False)
    xi_star: float
    h_star: float
    tie: bool = False

    def to_dict(self) -> dict:
        return {
            "s": self.checkpoint,
            "n": self.index,
            "xi_star": self.xi_star,
            "h_star": self.h_star,
            "tie": self.tie,
            "objective_min": float(np.min(self.objective)),
        }


@dataclass(frozen=True)
class BandwidthPath:
    """Right-continuous piecewise-constant bandwidth over observation indices.

    ``bandwidths[k]`` is used for ``indices[k] <= i < indices[k + 1]``;
    ``pilot`` covers indices before the first checkpoint.
    """

    indices: tuple
    bandwidths: tuple
    pilot: float

    def at(self, i: int) -> float:
        h = self.pilot
        for n, hk in zip(self.indices, self.bandwidths):
            if i >= n:
                h = hk
            else:
                break
        return h

    def as_array(self, length: int) -> np.ndarray:
        """Bandwidth for indices ``1..length`` (0-based storage)."""
        out = np.full(length, float(self.pilot))
        for n, hk in zip(self.indices, self.bandwidths):
            out[n - 1:] = hk
        return out


@dataclass(frozen=True)
class Schedule:
    results: list
    path: BandwidthPath


def _loo_terms(y: np.ndarray, kernel: Kernel, h: float) -> np.ndarray:
    """Leave-one-out predictions for ``i = 2..n`` (the last axis starts at ``i = 2``)."""
    m = loo_predictions(y, kernel, h)
    return m[..., 1:]


def cv_criterion(series, kernel: Kernel, h: float, s: float) -> float:
    """Average squared one-step prediction error up to ``floor(T s)``, divided by T."""
    ser = _as_series(series)
    T = ser.horizon
    n = checkpoint_index(T, s)
    if n < 2:
        raise ArgumentDomainError(f"floor(T s) = {n} < 2")
    if n > len(ser):
        raise ArgumentDomainError(f"floor(T s) = {n} exceeds the {len(ser)} observations")
    y = ser.values[:n]
    m = _loo_terms(y, kernel, h)
    return float(np.sum((y[1:] - m) ** 2) / T)


def cv_objective(series, kernel: Kernel, xi: float, s: float) -> float:
    """The cross-validation criterion with the bandwidth-free term dropped, at ``h = T / xi``.

    Equals ``cv_criterion`` minus ``T^-1 sum_{i=2}^{floor(Ts)} Y_i^2``.
    """
    ser = _as_series(series)
    T = ser.horizon
    if not xi > 0:
        raise ArgumentDomainError(f"xi must be positive, got {xi}")
    n = checkpoint_index(T, s)
    if n < 2:
        raise ArgumentDomainError(f"floor(T s) = {n} < 2")
    if n > len(ser):
        raise ArgumentDomainError(f"floor(T s) = {n} exceeds the {len(ser)} observations")
    y = ser.values[:n]
    m = _loo_terms(y, kernel, T / xi)
    return float(np.sum(m * m - 2.0 * y[1:] * m) / T)


def objective_surface(y, kernel: Kernel, xi_grid, checkpoints: Sequence[float],
                      horizon: Optional[int] = None, threads: int = 1) -> np.ndarray:
    """Objective values for every checkpoint and grid point.

    ``y`` may be a single series or a 2-D batch ``(replications, T)``. The
    result has shape ``(..., len(checkpoints), len(xi_grid))``. Sums are
    accumulated once up to the last checkpoint and read off at each one.
    """
    y = np.asarray(y, dtype=float)
    T = y.shape[-1] if horizon is None else horizon
    idx = np.array([checkpoint_index(T, s) for s in checkpoints])
    if idx.min() < 2:
        raise ArgumentDomainError("every checkpoint needs floor(T s) >= 2")
    nmax = int(idx.max())
    if nmax > y.shape[-1]:
        raise ArgumentDomainError(f"checkpoint index {nmax} exceeds the series length")
    y = y[..., :nmax]
    grid = np.asarray(xi_grid, dtype=float)

    def one(xi):
        m = _loo_terms(y, kernel, T / xi)
        c = np.cumsum(m * m - 2.0 * y[..., 1:] * m, axis=-1)
        return c[..., idx - 2] / T

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(one, grid))
    else:
        cols = [one(xi) for xi in grid]
    return np.stack(cols, axis=-1)


def _argmin_with_ties(values: np.ndarray):
    values = np.asarray(values, dtype=float)
    best = float(np.min(values))
    tol = TIE_RTOL * max(1.0, abs(best))
    tied = np.flatnonzero(values <= best + tol)
    return int(tied[0]), len(tied) > 1


def golden_section(f, a: float, b: float, tol: float = 1e-6, max_iter: int = 200) -> float:
    """Minimize a unimodal ``f`` on ``[a, b]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def select_xi(series, kernel: Kernel, plan: CvPlan, s: float,
              objective: Optional[Sequence[float]] = None, refine: bool = False) -> CvResult:
    """Grid minimizer of the objective at checkpoint ``s``.

    Ties (values equal up to a relative ``1e-12``) go to the smallest ``xi``,
    i.e. the largest bandwidth. ``objective`` injects precomputed values.
    With ``refine=True`` a golden-section search runs inside the cells
    adjacent to the grid minimizer.
    """
    if plan.xi_grid.size == 0:
        raise ConfigError("empty xi grid")
    if not any(math.isclose(s, c) for c in plan.checkpoints):
        raise ConfigError(f"{s} is not a checkpoint of the plan")
    ser = _as_series(series)
    T = ser.horizon
    if objective is None:
        objective = objective_surface(ser.values, kernel, plan.xi_grid, [s], horizon=T)[0]
    objective = np.asarray(objective, dtype=float)
    if objective.shape != plan.xi_grid.shape:
        raise ConfigError("objective values do not match the xi grid")
    k, tie = _argmin_with_ties(objective)
    xi_star = float(plan.xi_grid[k])
    if refine and plan.xi_grid.size > 1:
        lo = plan.xi_grid[max(k - 1, 0)]
        hi = plan.xi_grid[min(k + 1, plan.xi_grid.size - 1)]
        cand = golden_section(lambda x: cv_objective(ser, kernel, x, s), lo, hi)
        if cv_objective(ser, kernel, cand, s) < objective[k]:
            xi_star = float(cand)
    return CvResult(
        checkpoint=float(s),
        index=checkpoint_index(T, s),
        xi_grid=plan.xi_grid,
        objective=objective,
        xi_star=xi_star,
        h_star=T / xi_star,
        tie=tie,
    )


def run_schedule(series, kernel: Kernel, plan: CvPlan, threads: int = 1,
                 pilot: Optional[float] = None) -> Schedule:
    """Select ``xi`` at every checkpoint and assemble the bandwidth path.

    ``pilot`` is the bandwidth used before the first checkpoint; it defaults
    to the largest bandwidth on the grid, ``T / xi_min``.
    """
    ser = _as_series(series)
    T = ser.horizon
    surface = objective_surface(ser.values, kernel, plan.xi_grid, plan.checkpoints,
                                horizon=T, threads=threads)
    results = [
        select_xi(ser, kernel, plan, s, objective=surface[k])
        for k, s in enumerate(plan.checkpoints)
    ]
    path = BandwidthPath(
        indices=tuple(r.index for r in results),
        bandwidths=tuple(r.h_star for r in results),
        pilot=T / plan.xi_min if pilot is None else float(pilot),
    )
    return Schedule(results, path)
