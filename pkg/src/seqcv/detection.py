"""One-sided stopping rules on the normalized smoother and their calibration.

A detector watches ``mhat_i`` (the kernel-weighted average of ``Y_1..Y_i``)
from a start index on and stops at the first crossing of the control limit.
The bandwidth is either fixed or driven by sequential cross-validation, in
which case the bandwidth chosen at a checkpoint is used until the next one.

Run lengths of runs without a signal are censored at the horizon ``T`` and
counted as ``T``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .crossval import (
    TIE_RTOL,
    BandwidthPath,
    CvPlan,
    checkpoint_index,
    objective_surface,
    run_schedule,
)
from .errors import CalibrationBracketError, ConfigError
from .kernels import Kernel
from .simulation import ErrorModel, ScenarioParams, simulate_batch
from .smoothing import Series, normed_path

__all__ = [
    "DIRECTIONS",
    "DetectorSpec",
    "RunResult",
    "PathBatch",
    "start_index_rule",
    "compute_paths",
    "first_crossing",
    "run_detector",
    "Calibration",
    "calibrate_control_limit",
    "DelayEstimate",
    "mean_delay",
    "DelayRow",
    "run_experiment",
]

DIRECTIONS = ("lower_crossing", "upper_crossing")
START_FROM = ("pilot", "first_checkpoint")


def start_index_rule(h_first: float, cap: int = 25) -> int:
    """Start monitoring at ``floor(min(cap, h))`` with ``h`` the first selected bandwidth."""
    return max(2, int(math.floor(min(cap, h_first))))


@dataclass(frozen=True)
class DetectorSpec:
    """Detector configuration.

    ``bandwidth`` is a fixed ``h`` or a :class:`CvPlan`. ``start_index=None``
    applies :func:`start_index_rule` to a bandwidth chosen by ``start_from``:
    ``"pilot"`` uses the bandwidth in force from the first observation, which
    keeps the detector a stopping time; ``"first_checkpoint"`` uses the
    bandwidth selected at the first checkpoint, which is only known once that
    checkpoint has been reached. ``pilot`` is the bandwidth before the first
    checkpoint of a plan; by default the largest grid bandwidth ``T / xi_min``.
    """

    direction: str
    kernel: Kernel
    bandwidth: Union[float, CvPlan]
    control_limit: Optional[float] = None
    start_index: Optional[int] = None
    start_cap: int = 25
    pilot: Optional[float] = None
    start_from: str = "pilot"

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.start_from not in START_FROM:
            raise ConfigError(f"start_from must be one of {START_FROM}, got {self.start_from!r}")
        if self.start_index is not None and self.start_index < 2:
            raise ConfigError("start_index must be at least 2")
        if not isinstance(self.bandwidth, CvPlan) and not float(self.bandwidth) > 0:
            raise ConfigError("fixed bandwidth must be positive")

    def with_limit(self, c: float) -> "DetectorSpec":
        return replace(self, control_limit=float(c))


@dataclass
class PathBatch:
    """Detector statistics for a batch of series, independent of the control limit."""

    stat: np.ndarray  # (R, T)
    start: np.ndarray  # (R,)
    bandwidth: np.ndarray  # (R, T)
    xi_selected: Optional[np.ndarray] = None  # (R, N)


def _select(surface: np.ndarray) -> np.ndarray:
    best = surface.min(axis=-1)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(best))
    return np.argmax(surface <= (best + tol)[..., None], axis=-1)


def _paths_chunk(y: np.ndarray, spec: DetectorSpec, T: int) -> PathBatch:
    R, n = y.shape
    K = spec.kernel
    if not isinstance(spec.bandwidth, CvPlan):
        h = float(spec.bandwidth)
        start = spec.start_index or start_index_rule(h, spec.start_cap)
        return PathBatch(normed_path(y, K, h), np.full(R, start), np.full((R, n), h))

    plan = spec.bandwidth
    grid = plan.xi_grid
    cps = [s for s in plan.checkpoints if checkpoint_index(T, s) <= n]
    pilot = T / grid[0] if spec.pilot is None else float(spec.pilot)
    stat = np.empty((R, n))
    bw = np.full((R, n), pilot)
    if not cps:
        stat[:] = normed_path(y, K, pilot)
        start = spec.start_index or start_index_rule(pilot, spec.start_cap)
        return PathBatch(stat, np.full(R, start), bw, np.empty((R, 0), dtype=float))

    idx = [checkpoint_index(T, s) for s in cps]
    sel = _select(objective_surface(y, K, grid, cps, horizon=T))  # (R, N)
    # -1 marks the pilot bandwidth, used before the first checkpoint
    choice = np.full((R, n), -1)
    for k, nk in enumerate(idx):
        choice[:, nk - 1:] = sel[:, k][:, None]
    for g in np.unique(choice):
        h = pilot if g < 0 else T / grid[g]
        rows = np.flatnonzero(np.any(choice == g, axis=1))
        path = normed_path(y[rows], K, h)
        mask = choice[rows] == g
        sub = stat[rows]
        sub[mask] = path[mask]
        stat[rows] = sub
        bsub = bw[rows]
        bsub[mask] = h
        bw[rows] = bsub
    if spec.start_index is not None:
        start = np.full(R, spec.start_index)
    elif spec.start_from == "pilot":
        start = np.full(R, start_index_rule(pilot, spec.start_cap))
    else:
        start = np.array([start_index_rule(T / grid[g], spec.start_cap) for g in sel[:, 0]])
    return PathBatch(stat, start, bw, grid[sel])


def compute_paths(y, spec: DetectorSpec, horizon: Optional[int] = None, threads: int = 1,
                  chunk: int = 250) -> PathBatch:
    """Detector statistics for one series or a 2-D batch of series."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    T = y.shape[1] if horizon is None else horizon
    starts = list(range(0, y.shape[0], chunk))

    def one(a):
        return _paths_chunk(y[a:a + chunk], spec, T)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, starts))
    else:
        parts = [one(a) for a in starts]
    xs = [p.xi_selected for p in parts]
    return PathBatch(
        stat=np.concatenate([p.stat for p in parts]),
        start=np.concatenate([p.start for p in parts]),
        bandwidth=np.concatenate([p.bandwidth for p in parts]),
        xi_selected=None if xs[0] is None else np.concatenate(xs),
    )


def first_crossing(stat: np.ndarray, start, c: float, direction: str) -> np.ndarray:
    """1-based index of the first crossing at or after ``start``; 0 when there is none."""
    stat = np.atleast_2d(stat)
    i = np.arange(1, stat.shape[1] + 1)
    cross = stat < c if direction == "lower_crossing" else stat > c
    cross &= i[None, :] >= np.asarray(start).reshape(-1, 1)
    hit = cross.any(axis=1)
    return np.where(hit, np.argmax(cross, axis=1) + 1, 0)


@dataclass(frozen=True)
class RunResult:
    signal_index: Optional[int]
    path: np.ndarray = field(repr=False)
    bandwidth_path: np.ndarray = field(repr=False)
    start_index: int = 2

    def run_length(self, horizon: int) -> int:
        return horizon if self.signal_index is None else self.signal_index


def run_detector(series, spec: DetectorSpec) -> RunResult:
    if spec.control_limit is None:
        raise ConfigError("detector has no control limit")
    ser = series if isinstance(series, Series) else Series.of(series)
    batch = compute_paths(ser.values[None, :], spec, horizon=ser.horizon)
    start = int(batch.start[0])
    if len(ser) < start:
        raise ConfigError(f"series of length {len(ser)} ends before the start index {start}")
    sig = int(first_crossing(batch.stat, batch.start, spec.control_limit, spec.direction)[0])
    return RunResult(sig or None, batch.stat[0], batch.bandwidth[0], start)


def schedule_path(series, spec: DetectorSpec) -> BandwidthPath:
    """Bandwidth path that ``run_detector`` uses on ``series``."""
    ser = series if isinstance(series, Series) else Series.of(series)
    if not isinstance(spec.bandwidth, CvPlan):
        h = float(spec.bandwidth)
        return BandwidthPath((), (), h)
    return run_schedule(ser, spec.kernel, spec.bandwidth, pilot=spec.pilot).path


@dataclass(frozen=True)
class Calibration:
    control_limit: float
    achieved_arl: float
    standard_error: float
    target_arl: float
    censored_fraction: float
    iterations: int
    bracket: tuple
    replications: int

    def to_dict(self) -> dict:
        return {
            "control_limit": self.control_limit,
            "achieved_arl": self.achieved_arl,
            "standard_error": self.standard_error,
            "target_arl": self.target_arl,
            "censored_fraction": self.censored_fraction,
            "iterations": self.iterations,
            "bracket": list(self.bracket),
            "replications": self.replications,
        }


def _arl(batch, c, direction, T):
    sig = first_crossing(batch.stat, batch.start, c, direction)
    rl = np.where(sig > 0, sig, T)
    se = rl.std(ddof=1) / math.sqrt(len(rl)) if len(rl) > 1 else 0.0
    return float(rl.mean()), float(se), float(np.mean(sig == 0))


def calibrate_control_limit(params: ScenarioParams, model: ErrorModel, spec: DetectorSpec,
                            target_arl0: float, replications: int, seed: int,
                            bracket: Optional[Sequence[float]] = None, tol: float = 1e-3,
                            threads: int = 1, max_iter: int = 200) -> Calibration:
    """Bisection on the control limit for a target in-control average run length.

    The detector statistics of all replications are simulated once; every
    bisection step re-evaluates the same replications, so the estimated ARL
    is an exactly monotone step function of ``c``. Bisection stops when the
    estimate is within two standard errors of the target or the bracket is
    narrower than ``tol``.
    """
    if not target_arl0 > 0:
        raise ConfigError("target ARL must be positive")
    T = params.horizon
    y = simulate_batch(params, model, seed, replications, threads=threads)
    batch = compute_paths(y, spec, horizon=T, threads=threads)
    lower = spec.direction == "lower_crossing"

    if bracket is None:
        i = np.arange(1, T + 1)
        watched = batch.stat[i[None, :] >= batch.start[:, None]]
        lo, hi = float(watched.min()) - 1.0, float(watched.max()) + 1.0
    else:
        lo, hi = (float(b) for b in bracket)
        if not lo < hi:
            raise ConfigError("bracket must satisfy lo < hi")
    # the ARL decreases in c for lower crossings and increases for upper crossings
    arl_lo, _, _ = _arl(batch, lo, spec.direction, T)
    arl_hi, _, _ = _arl(batch, hi, spec.direction, T)
    small, large = (arl_hi, arl_lo) if lower else (arl_lo, arl_hi)
    if not small <= target_arl0 <= large:
        raise CalibrationBracketError(
            f"target ARL {target_arl0} outside the attainable range [{small:.4g}, {large:.4g}] "
            f"for c in [{lo:.6g}, {hi:.6g}]",
            diagnostics={"c_bracket": [lo, hi], "arl_at_lo": arl_lo, "arl_at_hi": arl_hi,
                         "horizon": T},
        )

    a, b = lo, hi
    it = 0
    c = 0.5 * (a + b)
    arl, se, cens = _arl(batch, c, spec.direction, T)
    while it < max_iter:
        it += 1
        c = 0.5 * (a + b)
        arl, se, cens = _arl(batch, c, spec.direction, T)
        if abs(arl - target_arl0) <= 2.0 * se or b - a < tol:
            break
        too_long = arl > target_arl0
        # lower crossing: raising c shortens runs
        if too_long == lower:
            a = c
        else:
            b = c
    return Calibration(c, arl, se, float(target_arl0), cens, it, (lo, hi), replications)


@dataclass(frozen=True)
class DelayEstimate:
    mean: float
    standard_error: float
    censored_fraction: float


def _delay_from_batch(batch, spec, q2, T) -> DelayEstimate:
    sig = first_crossing(batch.stat, batch.start, spec.control_limit, spec.direction)
    rl = np.where(sig > 0, sig, T)
    d = np.maximum(0, rl - q2).astype(float)
    se = d.std(ddof=1) / math.sqrt(len(d)) if len(d) > 1 else 0.0
    return DelayEstimate(float(d.mean()), float(se), float(np.mean(sig == 0)))


def mean_delay(params: ScenarioParams, model: ErrorModel, spec: DetectorSpec,
               replications: int, seed: int, threads: int = 1) -> DelayEstimate:
    """Estimate ``E max(0, S - q2)``; runs without a signal count as ``S = T``."""
    if spec.control_limit is None:
        raise ConfigError("mean delay needs a calibrated control limit")
    y = simulate_batch(params, model, seed, replications, threads=threads)
    batch = compute_paths(y, spec, horizon=params.horizon, threads=threads)
    return _delay_from_batch(batch, spec, params.q2, params.horizon)


@dataclass(frozen=True)
class DelayRow:
    delta: float
    jump: float
    mean_delay: float
    se: float
    censored_frac: float

    def as_row(self) -> dict:
        return {"delta": self.delta, "mean_delay": self.mean_delay, "se": self.se,
                "censored_frac": self.censored_frac}


def run_experiment(deltas: Sequence[float], params: ScenarioParams, model: ErrorModel,
                   spec: DetectorSpec, replications: int, seed: int, threads: int = 1,
                   toward_limit: bool = True) -> list:
    """Mean delay for each jump size, in the order given.

    With ``toward_limit`` the jump is applied in the direction the detector
    watches (downwards for lower crossings); otherwise ``delta`` is added as
    is. All rows share the same error draws.
    """
    sign = -1.0 if (toward_limit and spec.direction == "lower_crossing") else 1.0
    rows = []
    for delta in deltas:
        p = params.with_jump(sign * float(delta))
        est = mean_delay(p, model, spec, replications, seed, threads=threads)
        rows.append(DelayRow(float(delta), p.jump, est.mean, est.standard_error,
                             est.censored_fraction))
    return rows
