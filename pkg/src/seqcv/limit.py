"""Deterministic large-sample limit of the cross-validation objective.

With ``h = T / xi`` the leave-one-out prediction at time ``r = i / T``
converges to the kernel-weighted average of the mean function over the past,

    Mbar(r) = A(r) / N(r),
    A(r) = xi * int_0^r K(xi (r - u)) m(u) du,
    N(r) = xi * int_0^r K(xi (r - u)) du,

and the expected objective converges to ``int_0^s (Mbar^2 - 2 m Mbar) dr``
(mode ``self_consistent``). Mode ``as_printed`` evaluates the alternative
closed form with a single normalization ``N(s)`` and no ``m(r)`` factor in
the cross term; it is kept for comparison against Monte Carlo.

Inner integrals are taken in the variable ``z = xi (r - u)`` and rescaled to
``[0, 1]`` so that one vectorized adaptive Simpson pass handles a whole batch
of ``r`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .crossval import objective_surface
from .errors import ArgumentDomainError, ConfigError, DegenerateNormalizationError
from .kernels import Kernel
from .quadrature import adaptive_simpson
from .simulation import IIDGaussian, ErrorModel

__all__ = [
    "LimitSpec",
    "SeparationReport",
    "MonteCarloComparison",
    "norming",
    "limit_objective",
    "limit_objective_with_error",
    "bias_integral",
    "limit_argmin",
    "montecarlo_objective",
    "limit_vs_montecarlo",
    "SEPARATION_EPS",
]

MODES = ("self_consistent", "as_printed")
SEPARATION_EPS = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class LimitSpec:
    kernel: Kernel
    mean_function: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    mode: str = "self_consistent"
    tol: float = 1e-8

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.tol > 0:
            raise ConfigError("quadrature tolerance must be positive")
        u = np.linspace(0.0, 1.0, 1000)
        mu = np.asarray(self.mean_function(u), dtype=float) * np.ones_like(u)
        if not (np.all(mu > 0) or np.all(mu < 0)):
            raise ConfigError("mean function must be strictly one-signed on [0, 1]")

    def m(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.asarray(self.mean_function(u), dtype=float) * np.ones_like(u)

    def with_mode(self, mode: str) -> "LimitSpec":
        return LimitSpec(self.kernel, self.mean_function, mode, self.tol)


def _reach(kernel: Kernel, xi: float, r: np.ndarray) -> np.ndarray:
    z = xi * r
    return np.minimum(z, kernel.support_bound) if kernel.compact else z


def _inner(spec: LimitSpec, xi: float, r: np.ndarray, tol: float):
    """``(A(r), N(r), errA, errN)`` for a batch of positive ``r``."""
    zmax = _reach(spec.kernel, xi, r)
    K = spec.kernel._eval_unchecked

    def integrand(t):
        z = t[:, None] * zmax[None, :]
        k = K(z)
        return np.stack([k * spec.m(r[None, :] - z / xi), k], axis=-1)

    val, err = adaptive_simpson(integrand, 0.0, 1.0, tol)
    val = val * zmax[:, None]
    err = err * zmax[:, None]
    return val[:, 0], val[:, 1], err[:, 0], err[:, 1]


def norming(spec: LimitSpec, xi: float, r: float) -> float:
    """``N(r) = xi * int_0^r K(xi (r - u)) du``."""
    if not r > 0:
        raise ArgumentDomainError(f"r must be positive, got {r}")
    _, n, _, _ = _inner(spec, xi, np.array([float(r)]), spec.tol)
    if n[0] <= spec.tol:
        raise DegenerateNormalizationError(f"N(r) = {n[0]:.3g} at xi={xi}, r={r}")
    return float(n[0])


def _prediction(spec: LimitSpec, xi: float, r: np.ndarray, tol: float):
    """Limiting normalized prediction ``Mbar(r)`` and an error bound for it."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    err = np.zeros_like(r)
    zero = r <= 0.0
    # the window shrinks to the point itself, so Mbar -> m(0)
    out[zero] = spec.m(r[zero])
    pos = ~zero
    if np.any(pos):
        a, n, ea, en = _inner(spec, xi, r[pos], tol)
        if np.any(n <= tol):
            bad = r[pos][n <= tol][0]
            raise DegenerateNormalizationError(f"N(r) vanishes at xi={xi}, r={bad:.3g}")
        out[pos] = a / n
        err[pos] = (ea + np.abs(a / n) * en) / n
    return out, err


def limit_objective_with_error(spec: LimitSpec, xi: float, s: float):
    """Limit objective at ``(xi, s)`` and an estimate of its quadrature error."""
    if not 0 < s <= 1:
        raise ArgumentDomainError(f"s must lie in (0, 1], got {s}")
    if not xi > 0:
        raise ArgumentDomainError(f"xi must be positive, got {xi}")
    tol = spec.tol / 2.0  # split across the two nested layers
    worst = [0.0]

    if spec.mode == "self_consistent":
        def g(r):
            mb, e = _prediction(spec, xi, r, tol)
            m = spec.m(r)
            worst[0] = max(worst[0], float(np.max(2.0 * np.abs(mb - m) * e + e * e)))
            return mb * mb - 2.0 * m * mb

        val, err = adaptive_simpson(g, 0.0, s, tol)
        return val, err + s * worst[0]

    def g2(r):
        r = np.asarray(r, dtype=float)
        a = np.zeros_like(r)
        pos = r > 0
        if np.any(pos):
            a[pos], _, ea, _ = _inner(spec, xi, r[pos], tol)
            worst[0] = max(worst[0], float(np.max(ea * (2.0 + 2.0 * np.abs(a[pos])))))
        return np.stack([a, a * a], axis=-1)

    (ia, ia2), (ea, ea2) = adaptive_simpson(g2, 0.0, s, tol)
    ns = norming(spec, xi, s)
    val = (-2.0 * ia + ia2) / ns
    return float(val), float((2 * ea + ea2 + s * worst[0]) / ns)


def limit_objective(spec: LimitSpec, xi: float, s: float) -> float:
    return float(limit_objective_with_error(spec, xi, s)[0])


def bias_integral(spec: LimitSpec, xi: float, s: float) -> float:
    """``int_0^s (Mbar(r) - m(r))^2 dr``, the nonnegative part of the limit."""
    tol = spec.tol / 2.0

    def g(r):
        mb, _ = _prediction(spec, xi, r, tol)
        return (mb - spec.m(r)) ** 2

    return float(adaptive_simpson(g, 0.0, s, tol)[0])


def mean_square(spec: LimitSpec, s: float) -> float:
    """``int_0^s m(r)^2 dr``."""
    return float(adaptive_simpson(lambda r: spec.m(r) ** 2, 0.0, s, spec.tol)[0])


@dataclass(frozen=True)
class SeparationReport:
    xi_star: float
    value: float
    margins: dict
    tol: float

    @property
    def well_separated(self) -> bool:
        return all(m > self.tol for m in self.margins.values())


def limit_argmin(spec: LimitSpec, xi_grid: Sequence[float], s: float,
                 values: Optional[Sequence[float]] = None, eps: Sequence[float] = SEPARATION_EPS):
    """Grid minimizer of the limit objective with well-separation margins.

    The margin for ``eps`` is ``min_{|xi - xi*| >= eps} C(xi) - C(xi*)`` over
    the grid; it is ``inf`` when no grid point is that far from ``xi*``.
    """
    grid = np.asarray(xi_grid, dtype=float)
    if grid.size == 0:
        raise ConfigError("empty xi grid")
    if values is None:
        values = np.array([limit_objective(spec, xi, s) for xi in grid])
    values = np.asarray(values, dtype=float)
    k = int(np.argmin(values))
    xi_star = float(grid[k])
    margins = {}
    for e in eps:
        far = np.abs(grid - xi_star) >= e
        margins[e] = float(values[far].min() - values[k]) if np.any(far) else math.inf
    return xi_star, SeparationReport(xi_star, float(values[k]), margins, spec.tol)


def montecarlo_objective(spec: LimitSpec, xis: Sequence[float], ss: Sequence[float], T: int,
                         replications: int, seed: int, errors: Optional[ErrorModel] = None,
                         sigma: float = 1.0, chunk: int = 100):
    """Monte Carlo mean and standard error of the finite-sample objective.

    Data are ``m(i / T) + e_i``. Returns ``(mean, se)``, each of shape
    ``(len(ss), len(xis))``.
    """
    model = IIDGaussian(sigma) if errors is None else errors
    mu = spec.m(np.arange(1, T + 1) / T)
    total = np.zeros((len(ss), len(xis)))
    total2 = np.zeros_like(total)
    shift = None  # first replicate, subtracted to avoid cancellation in the variance
    for start in range(0, replications, chunk):
        n = min(chunk, replications - start)
        y = mu + np.array([model.draw(T, seed, r) for r in range(start, start + n)])
        surf = objective_surface(y, spec.kernel, xis, ss, horizon=T)
        if shift is None:
            shift = surf[0].copy()
        d = surf - shift
        total += d.sum(axis=0)
        total2 += (d ** 2).sum(axis=0)
    dmean = total / replications
    var = np.maximum(total2 / replications - dmean ** 2, 0.0) * replications / max(replications - 1, 1)
    return shift + dmean, np.sqrt(var / replications)


@dataclass(frozen=True)
class MonteCarloComparison:
    xi: float
    s: float
    T: int
    replications: int
    mc_mean: float
    mc_se: float
    self_consistent: float
    as_printed: float

    @property
    def gap_self_consistent(self) -> float:
        return abs(self.mc_mean - self.self_consistent)

    @property
    def gap_as_printed(self) -> float:
        return abs(self.mc_mean - self.as_printed)

    def to_dict(self) -> dict:
        return {
            "xi": self.xi, "s": self.s, "T": self.T, "replications": self.replications,
            "mc_mean": self.mc_mean, "mc_se": self.mc_se,
            "self_consistent": self.self_consistent, "as_printed": self.as_printed,
            "gap_self_consistent": self.gap_self_consistent,
            "gap_as_printed": self.gap_as_printed,
        }


def limit_vs_montecarlo(spec: LimitSpec, xi: float, s: float, T: int, replications: int,
                        seed: int, sigma: float = 1.0,
                        errors: Optional[ErrorModel] = None) -> MonteCarloComparison:
    if T < 100 or replications < 50:
        raise ConfigError("need T >= 100 and at least 50 replications")
    mean, se = montecarlo_objective(spec, [xi], [s], T, replications, seed, errors, sigma)
    return MonteCarloComparison(
        xi=float(xi), s=float(s), T=T, replications=replications,
        mc_mean=float(mean[0, 0]), mc_se=float(se[0, 0]),
        self_consistent=limit_objective(spec.with_mode("self_consistent"), xi, s),
        as_printed=limit_objective(spec.with_mode("as_printed"), xi, s),
    )
