"""Calibration of the global significance threshold.

Four routes are provided: the closed-form Gaussian asymptotic threshold, its
light-tailed generalisation, Monte-Carlo simulation of the scan norm of pure
noise, and the sample-size-free quantile of the self-normalised Wiener
functional used by the distribution-agnostic mode.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from .sequences import dyadic_family, multiresolution_norm, norm_all_intervals

#: constant in the extreme-value location term of the Gaussian scan-norm law
H_CONST = 0.82


@dataclass(frozen=True)
class ThresholdSpec:
    """A calibrated threshold and the provenance needed to reproduce it."""

    method: str
    alpha: float
    lam: float
    gamma: float
    T: Optional[int] = None
    sigma: Optional[float] = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdSpec":
        d = dict(d)
        d["lam"] = d.pop("lambda")
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "ThresholdSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def gamma_from_alpha(alpha: float) -> float:
    """Invert ``alpha = 1 - exp(-2 exp(-gamma))`` for the two-sided maximum."""
    _check_alpha(alpha)
    return -math.log(-math.log(1.0 - alpha) / 2.0)


def extreme_value_coeffs(T: int) -> tuple[float, float]:
    """Location/scale pair (a_T, b_T) of the Gaussian scan-norm limit law."""
    if T < 3:
        raise ValueError(f"need log log T > 0, so T >= 3; got {T}")
    log_t = math.log(T)
    root = math.sqrt(2.0 * log_t)
    a = root + (0.5 * math.log(log_t) + math.log(H_CONST / (2.0 * math.sqrt(math.pi)))) / root
    return a, 1.0 / root


def gaussian_threshold(T: int, alpha: float, sigma: float) -> ThresholdSpec:
    """Asymptotic threshold for i.i.d. Gaussian noise with scale ``sigma``."""
    _check_alpha(alpha)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a, b = extreme_value_coeffs(T)
    g = gamma_from_alpha(alpha)
    return ThresholdSpec(
        method="gaussian_asymptotic", alpha=alpha, T=T, sigma=sigma,
        gamma=g, lam=sigma * (a + b * g), params={"H": H_CONST},
    )


def light_tailed_constant(d: int, kappa: float) -> float:
    """Tail constant of the scan-norm law for sub-Gaussian-dominated noise."""
    if d < 3:
        raise ValueError("cumulant order d must be an integer >= 3")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return gamma_fn(d / (d - 2.0)) * (2.0 * kappa) ** (2.0 / (d - 2.0)) / math.sqrt(math.pi)


def light_tailed_threshold(T: int, alpha: float, d: int, kappa: float) -> ThresholdSpec:
    """Threshold for standardised noise dominated by the Gaussian.

    The one-sided limit law is doubled with the same max/min independence
    convention as the Gaussian case to obtain a two-sided level.
    """
    _check_alpha(alpha)
    if T < 3:
        raise ValueError(f"need log log T > 0, so T >= 3; got {T}")
    lam_const = light_tailed_constant(d, kappa)
    g = -math.log(-math.log(1.0 - alpha) / (2.0 * lam_const))
    expo = (d - 6.0) / (2.0 * (d - 2.0))
    arg = math.log(T * math.log(T) ** expo) + g
    if arg <= 0:
        raise ValueError("threshold undefined: alpha too large for this T")
    return ThresholdSpec(
        method="light_tailed", alpha=alpha, T=T, gamma=g,
        lam=math.sqrt(2.0 * arg), params={"d": d, "kappa": kappa},
    )


def standard_normal_sampler(rng: np.random.Generator, T: int) -> np.ndarray:
    return rng.standard_normal(T)


def _order_stat_quantile(values: np.ndarray, q: float) -> float:
    """Linear interpolation between order statistics (midpoint convention)."""
    return float(np.quantile(np.sort(values), q, method="linear"))


def monte_carlo_threshold(
    T: int,
    alpha: float,
    noise_sampler: Callable[[np.random.Generator, int], np.ndarray] = standard_normal_sampler,
    family_kind: str = "dyadic",
    n_rep: int = 1000,
    seed: int = 0,
) -> ThresholdSpec:
    """Empirical (1 - alpha) quantile of the scan norm of simulated noise."""
    _check_alpha(alpha)
    if n_rep < 100:
        raise ValueError("need at least 100 replicates")
    if family_kind not in ("dyadic", "all"):
        raise ValueError(f"unknown family kind {family_kind!r}")
    norms = simulate_scan_norms(T, noise_sampler, family_kind, n_rep, seed)
    lam = _order_stat_quantile(norms, 1.0 - alpha)
    return ThresholdSpec(
        method="monte_carlo", alpha=alpha, T=T, gamma=math.nan, lam=lam,
        params={"family": family_kind, "n_rep": n_rep, "seed": seed},
    )


def simulate_scan_norms(
    T: int,
    noise_sampler: Callable[[np.random.Generator, int], np.ndarray],
    family_kind: str,
    n_rep: int,
    seed: int,
) -> np.ndarray:
    """Scan norms of ``n_rep`` independent noise draws, reproducible by seed."""
    children = np.random.SeedSequence(seed).spawn(n_rep)
    fam = dyadic_family(1, T)
    norms = np.empty(n_rep)
    for i, ss in enumerate(children):
        try:
            z = np.asarray(noise_sampler(np.random.default_rng(ss), T), dtype=np.float64)
        except Exception as exc:
            raise RuntimeError(f"noise sampler failed at replicate {i}") from exc
        if z.shape != (T,):
            raise RuntimeError(f"noise sampler returned wrong shape at replicate {i}")
        if family_kind == "dyadic":
            norms[i], _ = multiresolution_norm(z, fam)
        else:
            norms[i] = norm_all_intervals(z, 1, T)
    return norms


def wiener_holder_sup(path: np.ndarray, epsilon: float) -> float:
    """Sup over grid pairs u < v of |W(v)-W(u)| / (sqrt(v-u) log^{1/2+eps}(c/(v-u))).

    ``path`` holds W on the uniform grid 0, 1/G, ..., 1 (G+1 points) and
    ``c = exp(1 + 2 eps)``; pairs are separated by at least one grid step.
    """
    grid = path.size - 1
    denom = _pair_denominators(grid, epsilon)
    best = 0.0
    for lag in range(1, grid + 1):
        diff = np.abs(path[lag:] - path[:-lag])
        best = max(best, float(diff.max()) / denom[lag - 1])
    return best


def _pair_denominators(grid: int, epsilon: float) -> np.ndarray:
    c = math.exp(1.0 + 2.0 * epsilon)
    gaps = np.arange(1, grid + 1) / grid
    return np.sqrt(gaps) * np.log(c / gaps) ** (0.5 + epsilon)


def self_normalised_quantile(
    alpha: float,
    epsilon: float = 0.03,
    n_rep: int = 5000,
    grid_size: int = 1024,
    seed: int = 0,
) -> ThresholdSpec:
    """Quantile of the self-normalised Wiener sup-functional.

    The quantile does not depend on the sample size, so one simulation serves
    every series length.
    """
    _check_alpha(alpha)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    denom = _pair_denominators(grid_size, epsilon)
    sups = np.zeros(n_rep)
    # chunk replicates to keep the per-lag slices cache-sized
    chunk = max(1, min(n_rep, 256))
    pos = 0
    while pos < n_rep:
        k = min(chunk, n_rep - pos)
        incr = rng.standard_normal((k, grid_size)) / math.sqrt(grid_size)
        paths = np.concatenate([np.zeros((k, 1)), np.cumsum(incr, axis=1)], axis=1)
        best = np.zeros(k)
        for lag in range(1, grid_size + 1):
            diff = np.abs(paths[:, lag:] - paths[:, :-lag]).max(axis=1)
            np.maximum(best, diff / denom[lag - 1], out=best)
        sups[pos:pos + k] = best
        pos += k
    q = _order_stat_quantile(sups, 1.0 - alpha)
    return ThresholdSpec(
        method="self_normalised", alpha=alpha, gamma=q, lam=q,
        params={"epsilon": epsilon, "n_rep": n_rep, "grid_size": grid_size,
                "seed": seed},
    )


def pvalue_upper_bound(dev: float, T: int, sigma: float) -> float:
    """Upper bound on the p-value of a deviation, from the Gaussian limit law."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if dev < 0:
        raise ValueError("deviation must be nonnegative")
    a, b = extreme_value_coeffs(T)
    g = (dev / sigma - a) / b
    with np.errstate(over="ignore"):
        p = -np.expm1(-2.0 * np.exp(-g))
    return float(min(1.0, max(0.0, p)))
