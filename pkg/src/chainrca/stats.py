"""Numerical primitives shared by detection and ranking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InvalidInput(ValueError):
    """Raised when an operation's preconditions are violated."""


@dataclass(frozen=True)
class Series:
    """Gap-free per-minute values; ``values[i]`` belongs to ``start_minute + i``."""

    values: np.ndarray
    start_minute: int

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidInput("series must be a non-empty 1-D sequence")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def end_minute(self) -> int:
        return self.start_minute + len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        return self.start_minute == other.start_minute and np.array_equal(self.values, other.values)

    __hash__ = None


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of two equal-length vectors.

    Returns 0.0 when either vector has zero variance so that callers never
    have to special-case flat series.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInput(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise InvalidInput("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    r = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    # rounding can push |r| a hair past 1
    return float(min(1.0, max(-1.0, r)))


def three_sigma_outliers(reference: Sequence[float], probe: Sequence[float]) -> list[tuple[int, float]]:
    """Entries of ``probe`` lying more than three population standard
    deviations from the mean of ``reference``.

    A flat reference (sigma == 0) flags every probe value that differs from
    its mean.
    """
    ref = np.asarray(reference, dtype=float)
    if ref.size < 2:
        raise InvalidInput("reference needs at least two values")
    mu = float(ref.mean())
    sigma = float(ref.std())
    out = []
    for i, v in enumerate(np.asarray(probe, dtype=float)):
        dev = abs(float(v) - mu)
        if (sigma == 0.0 and dev > 0.0) or (sigma > 0.0 and dev > 3.0 * sigma):
            out.append((i, float(v)))
    return out


def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Trailing means over every full window: ``len(values) - window + 1`` outputs."""
    arr = np.asarray(values, dtype=float)
    if window < 1:
        raise InvalidInput("window must be positive")
    if window > arr.size:
        raise InvalidInput(f"window {window} longer than series of {arr.size}")
    # mean of offsets from the window minimum is exact on flat windows
    view = np.lib.stride_tricks.sliding_window_view(arr, window)
    lo = view.min(axis=1)
    return lo + (view - lo[:, None]).mean(axis=1)
