"""Sequential kernel smoothers and leave-one-out predictors.

Indices in the public functions are 1-based, as in the usual notation
``Y_1, ..., Y_T``; arrays are stored 0-based. The weight attached to a past
observation ``Y_j`` when smoothing at index ``i >= j`` is ``K((i - j) / h)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import toeplitz

from .errors import ArgumentDomainError, DegenerateWindowError
from .kernels import Kernel

__all__ = [
    "Series",
    "smoother_raw",
    "smoother_normed",
    "loo_predict",
    "raw_path",
    "normed_path",
    "loo_predictions",
    "SmootherState",
    "loo_predict_stream",
]


@dataclass(frozen=True)
class Series:
    """Observations ``Y_1..Y_n`` on the design ``i / T`` with horizon ``T >= n``."""

    values: np.ndarray
    horizon: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ArgumentDomainError("series values must be one-dimensional")
        if self.horizon < 1 or len(v) > self.horizon:
            raise ArgumentDomainError(
                f"series of length {len(v)} does not fit horizon {self.horizon}"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def of(cls, values, horizon: Optional[int] = None) -> "Series":
        v = np.asarray(values, dtype=float)
        return cls(v, len(v) if horizon is None else horizon)

    def __len__(self):
        return len(self.values)


SeriesLike = Union[Series, Sequence[float], np.ndarray]


def _values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, Series):
        return series.values
    return np.asarray(series, dtype=float)


def _check_index(i: int, n: int, lowest: int = 1):
    if not lowest <= i <= n:
        raise IndexError(f"index {i} outside [{lowest}, {n}]")


def _check_h(h: float):
    if not h > 0:
        raise ArgumentDomainError(f"bandwidth must be positive, got {h}")


def _past_weights(kernel: Kernel, h: float, i: int, include_current: bool) -> np.ndarray:
    # weights for j = 1..i (or 1..i-1), ordered by j
    lags = np.arange(i - 1, -1 if include_current else 0, -1, dtype=float)
    return kernel._eval_unchecked(lags / h)


def smoother_raw(series: SeriesLike, kernel: Kernel, h: float, i: int) -> float:
    """Unnormalized smoother ``h^-1 sum_{j<=i} K((i-j)/h) Y_j``."""
    y = _values(series)
    _check_index(i, len(y))
    _check_h(h)
    w = _past_weights(kernel, h, i, include_current=True)
    return float(np.dot(w, y[:i]) / h)


def smoother_normed(series: SeriesLike, kernel: Kernel, h: float, i: int) -> float:
    """Kernel-weighted average of ``Y_1..Y_i``."""
    y = _values(series)
    _check_index(i, len(y))
    _check_h(h)
    w = _past_weights(kernel, h, i, include_current=True)
    total = w.sum()
    if total <= 0.0:
        raise DegenerateWindowError(f"zero kernel weight sum at i={i} (h={h})", index=i)
    return float(np.dot(w, y[:i]) / total)


def loo_predict(series: SeriesLike, kernel: Kernel, h: float, i: int) -> float:
    """Predict ``Y_i`` from ``Y_1..Y_{i-1}`` only."""
    y = _values(series)
    _check_index(i, len(y), lowest=2)
    _check_h(h)
    w = _past_weights(kernel, h, i, include_current=False)
    total = w.sum()
    if total <= 0.0:
        raise DegenerateWindowError(f"zero kernel weight sum at i={i} (h={h})", index=i)
    return float(np.dot(w, y[: i - 1]) / total)


def _lag_weights(kernel: Kernel, h: float, n: int, include_current: bool) -> np.ndarray:
    k = kernel.weights(h, n)
    if not include_current:
        k = k.copy()
        k[0] = 0.0
    return k


def _weighted_sums(y: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``out[..., t] = sum_{d=0}^{t} k[d] * y[..., t-d]`` along the last axis."""
    n = y.shape[-1]
    if y.ndim == 1:
        return np.convolve(y, k)[:n]
    lower = toeplitz(k, np.zeros(n))
    return y @ lower.T


def raw_path(series, kernel: Kernel, h: float) -> np.ndarray:
    """``smoother_raw`` at every index. Accepts a batch of series as a 2-D array."""
    y = series.values if isinstance(series, Series) else np.asarray(series, dtype=float)
    _check_h(h)
    return _weighted_sums(y, _lag_weights(kernel, h, y.shape[-1], True)) / h


def _normalize(num: np.ndarray, den: np.ndarray, first: int) -> np.ndarray:
    bad = den[first:] <= 0.0
    if np.any(bad):
        i = int(np.argmax(bad)) + first + 1
        raise DegenerateWindowError(f"zero kernel weight sum at i={i}", index=i)
    out = np.full(num.shape, np.nan)
    out[..., first:] = num[..., first:] / den[first:]
    return out


def normed_path(series, kernel: Kernel, h: float) -> np.ndarray:
    """``smoother_normed`` at every index (0-based position ``i - 1``)."""
    y = series.values if isinstance(series, Series) else np.asarray(series, dtype=float)
    _check_h(h)
    k = _lag_weights(kernel, h, y.shape[-1], True)
    return _normalize(_weighted_sums(y, k), np.cumsum(k), 0)


def loo_predictions(series, kernel: Kernel, h: float) -> np.ndarray:
    """Leave-one-out predictions for every index.

    Position ``i - 1`` holds the prediction of ``Y_i``; position 0 is NaN
    because nothing precedes ``Y_1``. A 2-D input is treated as a batch of
    independent series along the first axis.
    """
    y = series.values if isinstance(series, Series) else np.asarray(series, dtype=float)
    _check_h(h)
    k = _lag_weights(kernel, h, y.shape[-1], False)
    return _normalize(_weighted_sums(y, k), np.cumsum(k), 1)


class SmootherState:
    """Streaming leave-one-out predictor.

    ``update(y)`` returns the prediction for the index that ``y`` occupies,
    computed before ``y`` is absorbed. Compactly supported kernels keep a
    window of the last ``floor(h * support)`` observations, exponential
    kernels use the exact one-multiply recursion and every other kernel
    re-weights the full history.
    """

    def __init__(self, kernel: Kernel, h: float, history: Sequence[float] = ()):
        _check_h(h)
        self.kernel = kernel
        self.h = float(h)
        self.index = 0  # number of observations absorbed so far
        if kernel.decay_rate is not None:
            self._mode = "recursive"
            self._q = math.exp(-kernel.decay_rate / self.h)
            self._num = 0.0
            self._den = 0.0
        elif kernel.compact:
            self._mode = "window"
            width = int(math.floor(self.h * kernel.support_bound))
            self._w = kernel.weights(self.h, width + 1)[1:][::-1].copy()  # oldest lag first
            self._window = deque(maxlen=width)
        else:
            self._mode = "full"
            self._history: list[float] = []
            self._w = kernel.weights(self.h, 64)
        for v in history:
            self.update(v)

    def predict(self) -> Optional[float]:
        """Prediction for the next index, or None before any data arrived."""
        i = self.index + 1
        if i == 1:
            return None
        if self._mode == "recursive":
            num, den = self._num, self._den
        elif self._mode == "window":
            n = len(self._window)
            w = self._w[len(self._w) - n:]
            num, den = float(np.dot(w, self._window)) if n else 0.0, float(w.sum())
        else:
            n = len(self._history)
            if len(self._w) <= n:
                self._w = self.kernel.weights(self.h, 2 * (n + 1))
            w = self._w[n:0:-1]
            num, den = float(np.dot(w, self._history)), float(w.sum())
        if den <= 0.0:
            raise DegenerateWindowError(f"zero kernel weight sum at i={i} (h={self.h})", index=i)
        return num / den

    def update(self, y: float) -> Optional[float]:
        pred = self.predict()
        y = float(y)
        if self._mode == "recursive":
            # sums over lags d >= 1 with weights q^(d-1); the common factor q cancels
            self._num = self._q * self._num + y
            self._den = self._q * self._den + 1.0
        elif self._mode == "window":
            self._window.append(y)
        else:
            self._history.append(y)
        self.index += 1
        return pred


def loo_predict_stream(state: SmootherState, next_observation: float):
    """Functional form of ``SmootherState.update``: returns ``(state, prediction)``."""
    pred = state.update(next_observation)
    return state, pred
