"""Design-matrix construction for the supported model scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ScenarioSpec:
    """What the postulated linear model regresses on.

    ``kind`` is one of ``piecewise_constant`` (a single intercept column),
    ``piecewise_polynomial`` (columns ``(t/T)^i`` for ``i = 0..degree``) or
    ``custom_regression`` (a user-supplied matrix). ``ar_order`` lags of the
    response can be appended to any of them, which drops the first
    ``ar_order`` rows of the data.
    """

    kind: str
    degree: int = 0
    ar_order: int = 0

    def __post_init__(self):
        if self.kind not in ("piecewise_constant", "piecewise_polynomial",
                             "custom_regression"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.degree < 0:
            raise ValueError("polynomial degree must be nonnegative")
        if self.ar_order < 0:
            raise ValueError("autoregressive order must be nonnegative")

    @property
    def base_columns(self) -> Optional[int]:
        if self.kind == "piecewise_constant":
            return 1
        if self.kind == "piecewise_polynomial":
            return self.degree + 1
        return None  # custom: determined by the supplied matrix


def build_design(spec: ScenarioSpec, T: int, custom_x=None) -> np.ndarray:
    """Design matrix (before any autoregressive augmentation)."""
    if T < 1:
        raise ValueError("series length must be positive")
    if spec.kind == "custom_regression":
        if custom_x is None:
            raise ValueError("custom_regression needs a design matrix")
        x = np.asarray(custom_x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != T:
            raise ValueError(f"design has {x.shape[0]} rows, expected {T}")
        return x
    if custom_x is not None:
        raise ValueError("custom design only allowed with custom_regression")
    if spec.kind == "piecewise_constant":
        return np.ones((T, 1))
    t = np.arange(1, T + 1, dtype=np.float64) / T
    return np.column_stack([t ** i for i in range(spec.degree + 1)])


def augment_ar(y, x, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Append ``r`` response lags as extra regressors and drop the first ``r`` rows.

    Row ``t`` of the returned design holds the original regressors at time
    ``t + r`` followed by the lagged responses ``y[t+r-1], ..., y[t]``.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    T, p = x.shape
    if y.size != T:
        raise ValueError("response and design must have the same number of rows")
    if r < 1:
        raise ValueError("autoregressive order must be at least 1")
    if T <= r + p:
        raise ValueError(f"series of length {T} too short for {r} lags and {p} columns")
    lags = np.column_stack([y[r - k:T - k] for k in range(1, r + 1)])
    return y[r:].copy(), np.column_stack([x[r:], lags])
