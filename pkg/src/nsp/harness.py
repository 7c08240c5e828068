"""Signal and noise generators plus replicated coverage experiments.

A coverage experiment repeatedly simulates a series with known change
locations, runs the search, and records whether every returned location set
(detected interval minus its last point) contains a true change. Replicates
are seeded independently from the master seed so runs are reproducible and
may execute in parallel.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import NspConfig, nsp_run
from .noise import sigma_mad, sigma_mols, sigma_rice
from .scenarios import ScenarioSpec, augment_ar, build_design
from .thresholds import (ThresholdSpec, extreme_value_coeffs, gamma_from_alpha,
                         self_normalised_quantile)


@dataclass(frozen=True)
class PiecewiseSignal:
    """Segment boundaries and one coefficient vector per segment.

    ``change_points`` holds the last index of each segment but the final one,
    so segment j covers ``change_points[j-1]+1 .. change_points[j]``. When
    ``ar_coefs`` is given (one tuple per segment), the series is generated
    recursively with those lag coefficients on top of the regression part.
    """

    T: int
    change_points: tuple[int, ...]
    betas: tuple[tuple[float, ...], ...]
    ar_coefs: Optional[tuple[tuple[float, ...], ...]] = None

    def __post_init__(self):
        cps = self.change_points
        if any(b <= a for a, b in zip((0,) + cps, cps + (self.T,))):
            raise ValueError("change points must satisfy 0 < eta_1 < ... < eta_N < T")
        if len(self.betas) != len(cps) + 1:
            raise ValueError("need one coefficient vector per segment")
        if self.ar_coefs is not None and len(self.ar_coefs) != len(cps) + 1:
            raise ValueError("need one lag-coefficient tuple per segment")

    @property
    def n_changes(self) -> int:
        return len(self.change_points)


def squarewave() -> PiecewiseSignal:
    """Level 0/10/0/10 over four stretches of 200 points."""
    return PiecewiseSignal(T=800, change_points=(200, 400, 600),
                           betas=((0.0,), (10.0,), (0.0,), (10.0,)))


def five_change_signal(height: float = 3.0) -> PiecewiseSignal:
    """Stand-in for the lag-one study: five alternating level shifts."""
    return PiecewiseSignal(
        T=1000, change_points=(150, 350, 500, 700, 850),
        betas=((0.0,), (height,), (0.0,), (height,), (0.0,), (height,)))


def gen_signal(signal: PiecewiseSignal, x) -> np.ndarray:
    """Deterministic mean path: row t of ``x`` times its segment's coefficients."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != signal.T:
        raise ValueError("design must have one row per time point")
    f = np.empty(signal.T)
    bounds = (0,) + signal.change_points + (signal.T,)
    for j, beta in enumerate(signal.betas):
        beta = np.asarray(beta, dtype=np.float64)
        if beta.size != x.shape[1]:
            raise ValueError("coefficient vector does not match design columns")
        f[bounds[j]:bounds[j + 1]] = x[bounds[j]:bounds[j + 1]] @ beta
    return f


@dataclass(frozen=True)
class NoiseSpec:
    """Noise generator description.

    ``kind`` is ``gaussian_iid`` (scale ``sigma``), ``student_t`` (``df``
    degrees of freedom, standard deviation moving linearly from
    ``sd_start`` to ``sd_end``) or ``ar1_gaussian`` (lag coefficient ``coef``
    and innovation scale ``sigma``, started from its stationary law).
    """

    kind: str
    sigma: float = 1.0
    df: float = 4.0
    sd_start: float = 1.0
    sd_end: float = 1.0
    coef: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian_iid", "student_t", "ar1_gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "student_t" and self.df <= 2:
            raise ValueError("need df > 2 so the scale profile is meaningful")
        if self.kind == "ar1_gaussian" and not abs(self.coef) < 1:
            raise ValueError("AR(1) coefficient must lie in (-1, 1)")


def gen_noise(spec: NoiseSpec, T: int, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "gaussian_iid":
        return spec.sigma * rng.standard_normal(T)
    if spec.kind == "student_t":
        sd = np.linspace(spec.sd_start, spec.sd_end, T)
        t_sd = math.sqrt(spec.df / (spec.df - 2.0))
        return rng.standard_t(spec.df, size=T) * (sd / t_sd)
    a = spec.coef
    z = np.empty(T)
    innov = rng.standard_normal(T)
    z[0] = innov[0] * spec.sigma / math.sqrt(1.0 - a * a)
    for t in range(1, T):
        z[t] = a * z[t - 1] + spec.sigma * innov[t]
    return z


def ar1_stationary_sd(coef: float, sigma: float) -> float:
    return sigma / math.sqrt(1.0 - coef * coef)


def gen_series(signal: PiecewiseSignal, x, noise: NoiseSpec,
               rng: np.random.Generator) -> np.ndarray:
    """Simulated response: regression part, optional lag recursion, noise.

    With per-segment lag coefficients the recursion treats pre-sample values
    as zero.
    """
    f = gen_signal(signal, x)
    z = gen_noise(noise, signal.T, rng)
    if signal.ar_coefs is None:
        return f + z
    y = np.empty(signal.T)
    bounds = (0,) + signal.change_points + (signal.T,)
    for j, coefs in enumerate(signal.ar_coefs):
        for t in range(bounds[j], bounds[j + 1]):
            acc = f[t] + z[t]
            for k, a in enumerate(coefs, start=1):
                if t - k >= 0:
                    acc += a * y[t - k]
            y[t] = acc
    return y


@dataclass
class ExperimentSpec:
    """A replicated coverage experiment.

    ``scenario`` is the postulated model handed to the search;
    ``signal_scenario`` (defaulting to it) is the design the truth's
    per-segment coefficients refer to, so a misspecified analysis can be
    studied by letting the two differ.
    """

    signal: PiecewiseSignal
    noise: NoiseSpec
    scenario: ScenarioSpec
    signal_scenario: Optional[ScenarioSpec] = None
    n_rep: int = 100
    seed: int = 0
    alpha: float = 0.1
    M: int = 1000
    sampling: str = "grid"
    overlap: str = "none"
    deviation_mode: str = "plain"
    epsilon: float = 0.03
    sigma_method: str = "mad"     # rice | mad | mols | a positive number as str
    custom_design: Optional[np.ndarray] = None
    sn_quantile: Optional[float] = None   # cached self-normalised quantile
    sn_rep: int = 5000
    sn_grid: int = 1024

    def __post_init__(self):
        if self.n_rep < 1:
            raise ValueError("need at least one replicate")


@dataclass
class CoverageResult:
    """Replicate-level records and their reduction.

    The mean total interval length is carried as metadata: comparing it
    across postulated polynomial degrees indicates which degree describes
    the data over the smallest portion of its domain.
    """

    spec_summary: dict
    coverage: float
    count_distribution: dict[int, int]
    records: list[dict] = field(default_factory=list)

    @property
    def mean_total_interval_length(self) -> float:
        if not self.records:
            return 0.0
        return sum(r["total_interval_length"] for r in self.records) / len(self.records)

    def summary_dict(self) -> dict:
        return {
            "spec": self.spec_summary,
            "coverage": self.coverage,
            "count_distribution": {str(k): v for k, v in
                                   sorted(self.count_distribution.items())},
            "mean_total_interval_length": self.mean_total_interval_length,
            "n_rep": len(self.records),
        }


def _estimate_sigma(method: str, y, x) -> float:
    if method == "rice":
        return sigma_rice(y).sigma_hat
    if method == "mad":
        return sigma_mad(y).sigma_hat
    if method == "mols":
        return sigma_mols(y, x).sigma_hat
    value = float(method)
    if value <= 0:
        raise ValueError("fixed sigma must be positive")
    return value


def _threshold_for(spec: ExperimentSpec, run_len: int, sigma: float) -> ThresholdSpec:
    if spec.deviation_mode == "self_normalised":
        if spec.sn_quantile is None:
            raise ValueError("self-normalised runs need a precomputed quantile")
        return ThresholdSpec(
            method="self_normalised", alpha=spec.alpha, gamma=spec.sn_quantile,
            lam=spec.sn_quantile,
            params={"epsilon": spec.epsilon, "n_rep": spec.sn_rep,
                    "grid_size": spec.sn_grid})
    a, b = extreme_value_coeffs(run_len)
    g = gamma_from_alpha(spec.alpha)
    return ThresholdSpec(method="gaussian_asymptotic", alpha=spec.alpha,
                         T=run_len, sigma=sigma, gamma=g,
                         lam=sigma * (a + b * g))


def run_replicate(spec: ExperimentSpec, index: int,
                  seed_seq: np.random.SeedSequence) -> dict:
    """One simulated path: generate, search, and score coverage."""
    rng = np.random.default_rng(seed_seq)
    base_x = build_design(spec.scenario, spec.signal.T, spec.custom_design)
    if spec.signal_scenario is not None:
        gen_x = build_design(spec.signal_scenario, spec.signal.T)
    else:
        gen_x = base_x
    y = gen_series(spec.signal, gen_x, spec.noise, rng)
    r = spec.scenario.ar_order
    if r >= 1:
        y_run, x_run = augment_ar(y, base_x, r)
    else:
        y_run, x_run = y, base_x
    sigma = _estimate_sigma(spec.sigma_method, y_run, x_run)
    threshold = _threshold_for(spec, y_run.size, sigma)
    cfg = NspConfig(threshold=threshold, M=spec.M, sampling=spec.sampling,
                    overlap=spec.overlap, deviation_mode=spec.deviation_mode,
                    epsilon=spec.epsilon, ar_order=r,
                    seed=int(rng.integers(2 ** 62)))
    result = nsp_run(y_run, x_run, cfg)
    # report in the original series' coordinates (AR mode drops r rows)
    intervals = [(s + r, e + r) for s, e in result.intervals()]
    covered = score_coverage(intervals, true_change_set(spec.signal, r))
    return {
        "replicate": index,
        "n_intervals": len(intervals),
        "covered": covered,
        "intervals": intervals,
        "total_interval_length": sum(e - s for s, e in intervals),
        "sigma_hat": sigma,
        "threshold": threshold.lam,
    }


def score_coverage(intervals, change_points) -> bool:
    """True when every interval's location set holds at least one true change."""
    cps = np.asarray(change_points)
    for s, e in intervals:
        if not np.any((cps >= s) & (cps <= e - 1)):
            return False
    return True


def true_change_set(signal: PiecewiseSignal, ar_order: int) -> tuple[int, ...]:
    """Indices at which the (possibly lag-augmented) model parameters change.

    With ``ar_order`` r > 0, the r rows after a segment boundary regress on
    lagged values from the previous regime, so each boundary eta also makes
    rows eta+1, ..., eta+r parameter changes of the augmented model.
    """
    out = set()
    for cp in signal.change_points:
        for k in range(ar_order + 1):
            if cp + k < signal.T:
                out.add(cp + k)
    return tuple(sorted(out))


def run_coverage(spec: ExperimentSpec, threads: int = 1) -> CoverageResult:
    """Replicated experiment; the reduction does not depend on ``threads``."""
    if spec.deviation_mode == "self_normalised" and spec.sn_quantile is None:
        spec.sn_quantile = self_normalised_quantile(
            spec.alpha, spec.epsilon, n_rep=spec.sn_rep,
            grid_size=spec.sn_grid, seed=spec.seed).lam
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_rep)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_replicate, [spec] * spec.n_rep,
                                    range(spec.n_rep), seeds, chunksize=1))
    else:
        records = [run_replicate(spec, i, ss) for i, ss in enumerate(seeds)]
    records.sort(key=lambda r: r["replicate"])
    counts: dict[int, int] = {}
    for rec in records:
        counts[rec["n_intervals"]] = counts.get(rec["n_intervals"], 0) + 1
    coverage = sum(rec["covered"] for rec in records) / len(records)
    return CoverageResult(
        spec_summary=summarise_spec(spec), coverage=coverage,
        count_distribution=counts, records=records,
    )


def summarise_spec(spec: ExperimentSpec) -> dict:
    return {
        "T": spec.signal.T,
        "change_points": list(spec.signal.change_points),
        "noise": vars(spec.noise).copy(),
        "scenario": vars(spec.scenario).copy(),
        "signal_scenario": (vars(spec.signal_scenario).copy()
                            if spec.signal_scenario is not None else None),
        "n_rep": spec.n_rep,
        "seed": spec.seed,
        "alpha": spec.alpha,
        "M": spec.M,
        "sampling": spec.sampling,
        "overlap": spec.overlap,
        "deviation_mode": spec.deviation_mode,
        "sigma_method": spec.sigma_method,
    }


def write_replicates_csv(result: CoverageResult, path) -> None:
    """One row per replicate; intervals serialised as ``s-e`` pairs."""
    with open(path, "w") as fh:
        fh.write("replicate,n_intervals,covered,total_interval_length,"
                 "sigma_hat,threshold,intervals\n")
        for rec in result.records:
            ivs = ";".join(f"{s}-{e}" for s, e in rec["intervals"])
            fh.write(f"{rec['replicate']},{rec['n_intervals']},"
                     f"{int(rec['covered'])},{rec['total_interval_length']},"
                     f"{rec['sigma_hat']!r},{rec['threshold']!r},{ivs}\n")


def write_summary_json(result: CoverageResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.summary_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def experiment_from_dict(d: dict) -> ExperimentSpec:
    """Build an experiment from a plain dict (parsed JSON or TOML)."""
    try:
        sig = d["signal"]
        signal = PiecewiseSignal(
            T=int(sig["T"]),
            change_points=tuple(int(v) for v in sig.get("change_points", ())),
            betas=tuple(tuple(float(b) for b in row) for row in sig["betas"]),
            ar_coefs=(tuple(tuple(float(a) for a in row)
                            for row in sig["ar_coefs"])
                      if sig.get("ar_coefs") else None),
        )
        noise = NoiseSpec(**d["noise"])
        scenario = ScenarioSpec(**d.get("scenario", {"kind": "piecewise_constant"}))
    except KeyError as exc:
        raise ValueError(f"experiment spec missing key: {exc}") from exc
    extra = {k: d[k] for k in
             ("n_rep", "seed", "alpha", "M", "sampling", "overlap",
              "deviation_mode", "epsilon", "sigma_method", "sn_quantile",
              "sn_rep", "sn_grid") if k in d}
    if d.get("signal_scenario"):
        extra["signal_scenario"] = ScenarioSpec(**d["signal_scenario"])
    if "custom_design" in d and d["custom_design"] is not None:
        extra["custom_design"] = np.asarray(d["custom_design"], dtype=np.float64)
    return ExperimentSpec(signal=signal, noise=noise, scenario=scenario, **extra)
