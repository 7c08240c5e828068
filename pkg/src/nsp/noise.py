"""Noise-scale estimators and the global residual sum of squares."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

#: Gaussian consistency factor for the median absolute deviation
MAD_CONST = 1.4826


@dataclass(frozen=True)
class ScaleEstimate:
    method: str
    sigma_hat: float
    window: Optional[int] = None


def _first_diffs(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.size < 2:
        raise ValueError("need at least two observations")
    return np.diff(y)


def sigma_rice(y) -> ScaleEstimate:
    """Scale from mean squared first differences."""
    d = _first_diffs(y)
    var = float(np.sum(d * d)) / (2.0 * d.size)
    return ScaleEstimate(method="rice", sigma_hat=math.sqrt(var))


def sigma_mad(y) -> ScaleEstimate:
    """Median absolute deviation of scaled first differences.

    More robust than the squared-difference estimator when level shifts are
    present, at the cost of extra sensitivity to non-Gaussian noise.
    """
    d = _first_diffs(y) / math.sqrt(2.0)
    med = np.median(d)
    return ScaleEstimate(method="mad", sigma_hat=MAD_CONST * float(np.median(np.abs(d - med))))


def mols_window(T: int) -> int:
    return min(T, max(math.ceil(math.sqrt(T)), 20))


def _rolling_ols_vars(y, x) -> tuple[np.ndarray, int, int]:
    """Per-window OLS residual variances (divisor w - p) over all windows.

    Rank-deficient windows yield NaN and are excluded by the callers with a
    warning.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    T, p = x.shape
    if y.size != T:
        raise ValueError("response and design must have the same number of rows")
    w = mols_window(T)
    if w <= p:
        raise ValueError(f"window {w} must exceed the column count {p}")

    # prefix Gram matrices give O(1) per window after an O(T p^2) pass
    gram = np.concatenate([np.zeros((1, p, p)), np.cumsum(x[:, :, None] * x[:, None, :], axis=0)])
    xty = np.concatenate([np.zeros((1, p)), np.cumsum(x * y[:, None], axis=0)])
    yty = np.concatenate([[0.0], np.cumsum(y * y)])

    n_win = T - w + 1
    g = gram[w:] - gram[:-w]
    v = xty[w:] - xty[:-w]
    q = yty[w:] - yty[:-w]
    # spectral rank check: drop windows whose Gram matrix is (near-)singular
    eigs = np.linalg.eigvalsh(g)
    ok = eigs[:, 0] > 1e-10 * np.maximum(eigs[:, -1], 1e-300)
    variances = np.full(n_win, np.nan)
    if np.any(ok):
        beta = np.linalg.solve(g[ok], v[ok][..., None])[..., 0]
        rss = q[ok] - np.einsum("ij,ij->i", v[ok], beta)
        variances[ok] = np.maximum(rss, 0.0) / (w - p)
    return variances, w, p


def sigma_mols(y, x) -> ScaleEstimate:
    """Median of rolling-window OLS residual standard deviations."""
    variances, w, _ = _rolling_ols_vars(y, x)
    ok = np.isfinite(variances)
    if not np.all(ok):
        warnings.warn(f"skipped {int((~ok).sum())} rank-deficient windows", RuntimeWarning)
    if not np.any(ok):
        raise ValueError("every rolling window was rank-deficient")
    return ScaleEstimate(method="mols",
                         sigma_hat=float(np.median(np.sqrt(variances[ok]))),
                         window=w)


def vt_estimate(y, x) -> float:
    """Rough estimate of the global residual sum of squares.

    Sums the rolling-window residual variances and rescales them to the full
    series length; over-estimation is harmless where this quantity is used.
    """
    variances, w, _ = _rolling_ols_vars(y, x)
    ok = np.isfinite(variances)
    if not np.all(ok):
        warnings.warn(f"skipped {int((~ok).sum())} rank-deficient windows", RuntimeWarning)
    T = np.asarray(y).size
    return float(T / (T - w + 1.0) * np.nansum(variances))
