"""Log-log convergence-rate fitting shared by the coordinate, approximation
and groupoid checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class RateError(ValueError):
    """Not enough usable residuals to fit a rate."""


def rate_fit(ts, residuals, zero_floor: float = 1e-13) -> float:
    """Least-squares slope of log residual against log t.

    Residuals at or below `zero_floor` are treated as exactly zero; when all
    of them vanish the decay is reported as exact (slope = +inf).  At least
    four positive residuals are required otherwise.
    """
    ts = np.asarray(ts, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    if ts.shape != residuals.shape or ts.ndim != 1:
        raise RateError("need matching 1-d arrays of t values and residuals")
    if np.any(ts <= 0) or np.any(residuals < 0):
        raise RateError("t values must be positive and residuals nonnegative")
    keep = residuals > zero_floor
    if not np.any(keep):
        return math.inf
    if keep.sum() < 4:
        raise RateError(f"only {int(keep.sum())} residuals above the zero floor; need >= 4")
    slope, _ = np.polyfit(np.log(ts[keep]), np.log(residuals[keep]), 1)
    return float(slope)


@dataclass(frozen=True)
class RateReport:
    """Residual trace with the fitted decay rate and a pass/fail verdict."""

    ts: tuple
    residuals: tuple
    slope: float
    slope_min: float

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        if np.any(np.diff(ts) >= 0):
            raise RateError("t grid must be strictly decreasing")
        if np.any(np.asarray(self.residuals) < 0):
            raise RateError("negative residual")

    @property
    def exact(self) -> bool:
        return math.isinf(self.slope)

    @property
    def passed(self) -> bool:
        return self.slope >= self.slope_min

    @property
    def max_residual(self) -> float:
        return float(max(self.residuals))


def fit_report(ts, residuals, slope_min: float, zero_floor: float = 1e-13) -> RateReport:
    slope = rate_fit(ts, residuals, zero_floor=zero_floor)
    return RateReport(tuple(float(t) for t in ts), tuple(float(r) for r in residuals), slope, slope_min)


def default_t_grid(kmin: int = 2, kmax: int = 12) -> np.ndarray:
    """Decreasing geometric grid t = 2^-k, k = kmin..kmax."""
    return 2.0 ** (-np.arange(kmin, kmax + 1, dtype=float))
