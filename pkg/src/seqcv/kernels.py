"""Smoothing kernels on the half line ``[0, inf)``.

Every kernel is evaluated at the nonnegative lag ``(i - j) / h`` of a past
observation ``j`` relative to the current index ``i``. Negative arguments are
rejected rather than reflected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentDomainError, ConfigError

__all__ = [
    "Kernel",
    "KernelReport",
    "uniform",
    "epanechnikov",
    "gaussian",
    "exponential",
    "flat",
    "get_kernel",
    "KERNEL_NAMES",
    "kernel_eval",
    "validate_assumptions",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Finite-difference audit settings for the sampled Lipschitz check.
LIPSCHITZ_STEP = 1e-4
LIPSCHITZ_FACTOR = 10.0


@dataclass(frozen=True)
class Kernel:
    """A named nonnegative weight function on ``[0, inf)``.

    ``support_bound`` is ``math.inf`` for kernels without compact support.
    When finite, the kernel is exactly zero beyond it regardless of what
    ``func`` returns there. ``decay_rate`` is set for pure exponentials
    ``K(z) = K(0) exp(-rate z)``, which admit an exact streaming recursion.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    support_bound: float = math.inf
    lipschitz: bool = True
    sup_norm: float = 1.0
    decay_rate: Optional[float] = None

    @property
    def compact(self) -> bool:
        return math.isfinite(self.support_bound)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < 0) or np.any(np.isnan(z)):
            raise ArgumentDomainError(
                f"kernel {self.name!r} is defined on [0, inf); got a negative argument"
            )
        return self._eval_unchecked(z)

    def _eval_unchecked(self, z: np.ndarray) -> np.ndarray:
        w = np.asarray(self.func(z), dtype=float)
        if self.compact:
            w = np.where(z <= self.support_bound, w, 0.0)
        return w

    def weights(self, h: float, n: int) -> np.ndarray:
        """Return ``K(d / h)`` for lags ``d = 0, ..., n - 1``."""
        if not h > 0:
            raise ArgumentDomainError(f"bandwidth must be positive, got {h}")
        return self._eval_unchecked(np.arange(n, dtype=float) / h)

    def scaled(self, c: float) -> "Kernel":
        """Return the kernel ``c * K`` for ``c > 0``."""
        if not c > 0:
            raise ArgumentDomainError("kernel scale must be positive")
        f = self.func
        return Kernel(
            name=f"{c:g}*{self.name}",
            func=lambda z: c * f(z),
            support_bound=self.support_bound,
            lipschitz=self.lipschitz,
            sup_norm=c * self.sup_norm,
            decay_rate=self.decay_rate,
        )


def _uniform(z):
    return np.ones_like(z)


def _epanechnikov(z):
    return 0.75 * (1.0 - z * z)


def _gaussian(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def _exponential(z):
    return np.exp(-z)


uniform = Kernel("uniform", _uniform, support_bound=1.0, lipschitz=False, sup_norm=1.0)
epanechnikov = Kernel("epanechnikov", _epanechnikov, support_bound=1.0, sup_norm=0.75)
gaussian = Kernel("gaussian", _gaussian, sup_norm=1.0 / _SQRT_2PI)
exponential = Kernel("exponential", _exponential, sup_norm=1.0, decay_rate=1.0)
# K = 1 everywhere: turns the raw smoother into a CUSUM partial sum.
flat = Kernel("flat", _uniform, sup_norm=1.0, decay_rate=0.0)

_REGISTRY = {k.name: k for k in (uniform, epanechnikov, gaussian, exponential, flat)}
KERNEL_NAMES = ("uniform", "epanechnikov", "gaussian", "exponential")


def get_kernel(name: str) -> Kernel:
    try:
        return _REGISTRY[name.lower()]
    except KeyError:
        raise ConfigError(
            f"unknown kernel {name!r}; expected one of {', '.join(KERNEL_NAMES)}"
        ) from None


def kernel_eval(k: Kernel, z: float) -> float:
    """Evaluate ``k`` at a single nonnegative point."""
    return float(k(z))


@dataclass(frozen=True)
class KernelReport:
    kernel: str
    nonnegative: bool
    compact_support: bool
    positive_on_unit_interval: bool
    bounded: bool
    lipschitz_declared: bool
    lipschitz_audit: bool
    max_difference_quotient: float

    @property
    def lipschitz(self) -> bool:
        return self.lipschitz_declared and self.lipschitz_audit

    @property
    def standard_assumptions(self) -> bool:
        """Lipschitz, bounded, supported in [0, 1] and positive on (0, 1)."""
        return (
            self.nonnegative
            and self.lipschitz
            and self.bounded
            and self.compact_support
            and self.positive_on_unit_interval
        )

    @property
    def bounded_kernel(self) -> bool:
        """The weaker condition used for dependent errors: K bounded."""
        return self.nonnegative and self.bounded


def validate_assumptions(k: Kernel) -> KernelReport:
    """Audit ``k`` against the standard kernel assumptions.

    The checks are sampled on a grid of step ``LIPSCHITZ_STEP``; Lipschitz
    continuity requires both the declared flag and a difference quotient no
    larger than ``LIPSCHITZ_FACTOR * sup_norm``.
    """
    zmax = k.support_bound + 1.0 if k.compact else 20.0
    z = np.arange(0.0, zmax + LIPSCHITZ_STEP / 2, LIPSCHITZ_STEP)
    w = k(z)

    nonneg = bool(np.all(w >= 0))
    bounded = math.isfinite(k.sup_norm) and bool(np.all(w <= k.sup_norm * (1 + 1e-12)))

    beyond = z > 1.0
    compact = k.compact and k.support_bound <= 1.0 and bool(np.all(w[beyond] == 0.0))

    inner = (z > 0.0) & (z < 1.0)
    positive = bool(np.all(w[inner] > 0.0))

    quotient = float(np.max(np.abs(np.diff(w))) / LIPSCHITZ_STEP)
    audit = quotient <= LIPSCHITZ_FACTOR * k.sup_norm

    return KernelReport(
        kernel=k.name,
        nonnegative=nonneg,
        compact_support=compact,
        positive_on_unit_interval=positive,
        bounded=bounded,
        lipschitz_declared=k.lipschitz,
        lipschitz_audit=audit,
        max_difference_quotient=quotient,
    )
