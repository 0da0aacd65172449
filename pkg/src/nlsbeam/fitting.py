"""Least-squares slopes in log-log coordinates."""

from dataclasses import dataclass
import math
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class SlopeFit:
    xs: Tuple[float, ...]     # log h
    ys: Tuple[float, ...]     # log value
    slope: float
    intercept: float
    max_abs_residual: float

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "max_abs_residual": self.max_abs_residual,
                "log_h": list(self.xs), "log_value": list(self.ys)}


def fit_slope(pairs):
    """Fit log(value) = slope * log(h) + intercept through (h, value) pairs."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 points, got {len(pairs)}")
    h = np.array([float(a) for a, _ in pairs])
    v = np.array([float(b) for _, b in pairs])
    if np.any(~np.isfinite(h)) or np.any(~np.isfinite(v)):
        raise ValueError("non-finite pair")
    if np.any(h <= 0) or np.any(v <= 0):
        raise ValueError("h and values must be positive")
    xs, ys = np.log(h), np.log(v)
    if np.ptp(xs) == 0:
        raise ValueError("all h values coincide")
    design = np.column_stack([xs, np.ones_like(xs)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = ys - (slope * xs + intercept)
    return SlopeFit(tuple(float(x) for x in xs), tuple(float(y) for y in ys),
                    float(slope), float(intercept), float(np.max(np.abs(resid))))


def log2_ratio(a, b):
    """log2(a / b); the per-doubling decay of a quantity that drops from a to b."""
    if a <= 0 or b <= 0:
        return math.inf if b <= 0 < a else math.nan
    return math.log2(a / b)
