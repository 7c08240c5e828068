"""Recursive search for the narrowest intervals of significant non-linearity.

Each recursion level draws candidate sub-intervals of the current search
interval, measures how far the response departs from the postulated linear
model on each of them, and keeps the shortest candidate whose deviation
exceeds the calibrated threshold. That candidate is then searched once more
for its own shortest significant sub-interval before being recorded, and the
recursion continues to the left and right of the detection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .minimax import _solve_lp, fit_minimax
from .noise import vt_estimate
from .sequences import (_compensated_cumsum, dyadic_family, dyadic_lengths,
                        multiresolution_norm)
from .thresholds import ThresholdSpec

_SAMPLING = ("grid", "random")
_OVERLAP = ("none", "half", "in_inference")
_MODES = ("plain", "self_normalised")


@dataclass
class NspConfig:
    """Tuning knobs of one search run.

    ``threshold`` must be calibrated for the full series length. The
    self-normalised deviation mode requires a self-normalised threshold and
    vice versa; mixing the two is a configuration error.
    """

    threshold: ThresholdSpec
    M: int = 1000
    sampling: str = "grid"
    overlap: str = "none"
    deviation_mode: str = "plain"
    epsilon: float = 0.03
    ar_order: int = 0
    seed: int = 0
    rank_aware: bool = True
    two_stage: bool = True
    locator: Optional[Callable] = None
    vt2: Optional[float] = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.sampling not in _SAMPLING:
            raise ValueError(f"sampling must be one of {_SAMPLING}")
        if self.overlap not in _OVERLAP:
            raise ValueError(f"overlap must be one of {_OVERLAP}")
        if self.deviation_mode not in _MODES:
            raise ValueError(f"deviation_mode must be one of {_MODES}")
        if self.ar_order < 0:
            raise ValueError("ar_order must be nonnegative")
        want_sn = self.deviation_mode == "self_normalised"
        have_sn = self.threshold.method == "self_normalised"
        if want_sn != have_sn:
            raise ValueError(
                "deviation mode and threshold method must match: "
                f"{self.deviation_mode!r} vs {self.threshold.method!r}"
            )

    @property
    def alpha(self) -> float:
        return self.threshold.alpha


@dataclass(frozen=True)
class DeviationResult:
    """Deviation from linearity on one interval."""

    interval: tuple[int, int]
    deviation: float
    beta: np.ndarray
    argmax_interval: tuple[int, int]


@dataclass(frozen=True)
class Detection:
    start: int
    end: int
    deviation: float
    threshold: float
    order: int
    parent: tuple[int, int]

    @property
    def location_set(self) -> tuple[int, int]:
        """Indices that can carry the change responsible for this detection."""
        return (self.start, self.end - 1)


@dataclass
class SignificanceSet:
    """Ordered detections of one run, with the threshold they were tested at."""

    detections: list[Detection]
    threshold: ThresholdSpec
    n: int
    deviation_mode: str = "plain"

    def __len__(self):
        return len(self.detections)

    def __iter__(self):
        return iter(self.detections)

    def intervals(self) -> list[tuple[int, int]]:
        return [(d.start, d.end) for d in self.detections]

    def location_sets(self) -> list[tuple[int, int]]:
        return [d.location_set for d in self.detections]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "deviation_mode": self.deviation_mode,
            "threshold": self.threshold.to_dict(),
            "intervals": [
                {
                    "start": d.start,
                    "end": d.end,
                    "deviation": d.deviation,
                    "threshold": d.threshold,
                    "order": d.order,
                    "parent": list(d.parent),
                }
                for d in self.detections
            ],
        }


def draw_intervals(s: int, e: int, M: int, sampling: str,
                   rng: np.random.Generator, min_span: int = 1) -> np.ndarray:
    """Candidate sub-intervals of ``[s, e]`` with span at least ``min_span``.

    When ``M`` covers every admissible sub-interval, all of them are
    returned. The grid scheme returns all pairs from the smallest equispaced
    grid with at least ``M`` pairs; the random scheme draws exactly ``M``
    endpoint pairs uniformly with replacement.
    """
    span = e - s
    if span < min_span:
        return np.empty((0, 2), dtype=np.int64)
    total = (span - min_span + 1) * (span - min_span + 2) // 2
    if M >= total:
        rows = [
            np.stack([st, st + v], axis=1)
            for v in range(min_span, span + 1)
            for st in (np.arange(s, e - v + 1, dtype=np.int64),)
        ]
        return np.concatenate(rows, axis=0)
    if sampling == "grid":
        k = math.ceil((1.0 + math.sqrt(1.0 + 8.0 * M)) / 2.0)
        k = min(k, span + 1)
        pts = np.unique(np.rint(np.linspace(s, e, k)).astype(np.int64))
        a, b = np.meshgrid(pts, pts, indexing="ij")
        keep = (b - a) >= min_span
        return np.stack([a[keep], b[keep]], axis=1)
    out = np.empty((0, 2), dtype=np.int64)
    while out.shape[0] < M:
        need = M - out.shape[0]
        cand = rng.integers(s, e + 1, size=(2 * need + 8, 2))
        lo = cand.min(axis=1)
        hi = cand.max(axis=1)
        keep = (hi - lo) >= min_span
        out = np.concatenate([out, np.stack([lo[keep], hi[keep]], axis=1)])
    return out[:M]


def deviation_plain(s: int, e: int, y, x) -> DeviationResult:
    """Minimax-fit residual scan norm on ``[s, e]`` (dyadic family)."""
    y = np.asarray(y, dtype=np.float64)
    x = _as_matrix(x)
    fit = fit_minimax(y[s - 1:e], x[s - 1:e], dyadic_family(1, e - s + 1))
    return DeviationResult(
        interval=(s, e), deviation=fit.deviation, beta=fit.beta,
        argmax_interval=(fit.binding_interval[0] + s - 1,
                         fit.binding_interval[1] + s - 1),
    )


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def sn_min_length(p: int, epsilon: float) -> int:
    """Shortest usable window length in self-normalised mode.

    Local least squares on a window of n points removes p degrees of freedom
    from the residual energy, so the inflated energy only dominates the true
    noise energy once (1+eps)^2 (n-p)/n >= 1. Windows below that length make
    the weights too small and the statistic anti-conservative, so they are
    excluded; the bound is rounded up to a power of two (dyadic windows).
    """
    infl = (1.0 + epsilon) ** 2
    need = max(p + 2, math.ceil(p * infl / (infl - 1.0)))
    return 1 << (need - 1).bit_length()


def _window_rss(ys: np.ndarray, xs: np.ndarray, lengths: list[int]) -> dict[int, np.ndarray]:
    """Least-squares residual sum of squares for every window of each length."""
    n, p = xs.shape
    gram = np.concatenate(
        [np.zeros((1, p, p)), np.cumsum(xs[:, :, None] * xs[:, None, :], axis=0)])
    xty = np.concatenate([np.zeros((1, p)), np.cumsum(xs * ys[:, None], axis=0)])
    yty = np.concatenate([[0.0], np.cumsum(ys * ys)])
    out = {}
    for length in lengths:
        g = gram[length:] - gram[:-length]
        v = xty[length:] - xty[:-length]
        q = yty[length:] - yty[:-length]
        try:
            beta = np.linalg.solve(g, v[..., None])[..., 0]
            rss = q - np.einsum("ij,ij->i", v, beta)
        except np.linalg.LinAlgError:
            rss = np.empty(q.size)
            for i in range(q.size):
                sol, *_ = np.linalg.lstsq(g[i], v[i], rcond=None)
                rss[i] = q[i] - v[i] @ sol
        out[length] = np.maximum(rss, 0.0)
    return out


class _SelfNormWeights:
    """Retained dyadic sub-intervals of one anchor and their weights.

    Intervals are stored in local coordinates of the anchor slice. Raw
    partial sums of any vector over the retained intervals can then be formed
    from one prefix-sum pass.
    """

    def __init__(self, ys, xs, vt2, epsilon):
        n, p = xs.shape
        lmin = sn_min_length(p, epsilon)
        lengths = [L for L in dyadic_lengths(n) if L >= lmin]
        if not lengths:
            raise ValueError(
                f"anchor of {n} points too short for self-normalised "
                f"evaluation with {p} columns")
        c = math.exp(1.0 + 2.0 * epsilon)
        rss = _window_rss(ys, xs, lengths)
        starts, stops, weights = [], [], []
        dropped = 0
        for length in lengths:
            r = rss[length]
            log_arg = np.full(r.size, np.inf)
            ok = r > 0.0
            log_arg[ok] = c * vt2 / r[ok]
            keep = ok & (log_arg > 1.0)
            dropped += int(np.count_nonzero(ok & ~keep))
            idx = np.flatnonzero(keep)
            starts.append(idx)
            stops.append(idx + length)
            weights.append(
                (1.0 + epsilon) * np.sqrt(r[idx]) *
                np.log(log_arg[idx]) ** (0.5 + epsilon))
        if dropped:
            warnings.warn(
                f"dropped {dropped} sub-intervals with residual energy above "
                "the global scale", RuntimeWarning)
        self.starts = np.concatenate(starts)   # 0-based, inclusive
        self.stops = np.concatenate(stops)     # 0-based, exclusive
        self.weights = np.concatenate(weights)

    @property
    def size(self) -> int:
        return self.weights.size

    def raw_sums(self, values: np.ndarray) -> np.ndarray:
        pref = _compensated_cumsum(values)
        return pref[self.stops] - pref[self.starts]

    def raw_sums_matrix(self, mat: np.ndarray) -> np.ndarray:
        return np.stack([self.raw_sums(mat[:, k]) for k in range(mat.shape[1])], axis=1)

    def statistic(self, residuals: np.ndarray) -> tuple[float, int]:
        vals = np.abs(self.raw_sums(residuals)) / self.weights
        i = int(np.argmax(vals))
        ties = np.flatnonzero(vals == vals[i])
        j = ties[np.lexsort((self.stops[ties], self.starts[ties]))[0]]
        return float(vals[j]), int(j)


def deviation_selfnorm(s: int, e: int, y, x, vt2: float,
                       epsilon: float = 0.03) -> DeviationResult:
    """Self-normalised deviation from linearity on ``[s, e]``.

    Every retained dyadic sub-interval contributes the absolute raw residual
    sum divided by its weight: the square root of the inflated local
    least-squares residual energy times a logarithmic fine-scale penalty in
    the ratio of the global to the local residual energy. The returned value
    is the minimum over coefficient vectors of the largest such ratio.
    """
    y = np.asarray(y, dtype=np.float64)
    x = _as_matrix(x)
    ys = y[s - 1:e]
    xs = x[s - 1:e]
    sn = _SelfNormWeights(ys, xs, vt2, epsilon)
    if sn.size == 0:
        beta, *_ = np.linalg.lstsq(xs, ys, rcond=None)
        return DeviationResult(interval=(s, e), deviation=0.0, beta=beta,
                               argmax_interval=(s, e))
    rows_x = sn.raw_sums_matrix(xs)
    rows_y = sn.raw_sums(ys)
    beta = _solve_lp(rows_x, rows_y, sn.weights, interval=(s, e))
    dev, j = sn.statistic(ys - xs @ beta)
    return DeviationResult(
        interval=(s, e), deviation=dev, beta=beta,
        argmax_interval=(s + int(sn.starts[j]), s + int(sn.stops[j]) - 1),
    )


class _NotSignificant:
    __slots__ = ()


_NOT_SIG = _NotSignificant()


class _Evaluator:
    """Deviation evaluation with caching and a cheap insignificance prune.

    The exact deviation minimises the scan norm over coefficients, so the
    norm of the least-squares residuals bounds it from above; candidates
    whose bound already sits below the threshold are discarded without
    solving the linear programme.
    """

    def __init__(self, y, x, cfg: NspConfig, lam: float, vt2: Optional[float]):
        self.y = y
        self.x = x
        self.cfg = cfg
        self.lam = lam
        self.vt2 = vt2
        self.p = x.shape[1]
        self._cache: dict[tuple[int, int], object] = {}

    def significant(self, s: int, e: int) -> Optional[DeviationResult]:
        """The exact deviation result if it exceeds the threshold, else None."""
        key = (s, e)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._evaluate(s, e)
            self._cache[key] = hit
        if hit is _NOT_SIG:
            return None
        return hit if hit.deviation > self.lam else None

    def _evaluate(self, s: int, e: int):
        ys = self.y[s - 1:e]
        xs = self.x[s - 1:e]
        if self.cfg.deviation_mode == "plain":
            if ys.size > self.p:
                beta, *_ = np.linalg.lstsq(xs, ys, rcond=None)
                bound, _ = multiresolution_norm(
                    ys - xs @ beta, dyadic_family(1, ys.size))
                if bound <= self.lam:
                    return _NOT_SIG
            return deviation_plain(s, e, self.y, self.x)
        # self-normalised mode
        sn = _SelfNormWeights(ys, xs, self.vt2, self.cfg.epsilon)
        if sn.size == 0:
            return _NOT_SIG
        beta, *_ = np.linalg.lstsq(xs, ys, rcond=None)
        bound, _ = sn.statistic(ys - xs @ beta)
        if bound <= self.lam:
            return _NOT_SIG
        rows_x = sn.raw_sums_matrix(xs)
        rows_y = sn.raw_sums(ys)
        beta = _solve_lp(rows_x, rows_y, sn.weights, interval=(s, e))
        dev, j = sn.statistic(ys - xs @ beta)
        return DeviationResult(
            interval=(s, e), deviation=dev, beta=beta,
            argmax_interval=(s + int(sn.starts[j]), s + int(sn.stops[j]) - 1),
        )


def _shortest_significant(ev: _Evaluator, s: int, e: int, min_span: int,
                          rng: np.random.Generator) -> Optional[DeviationResult]:
    """Shortest sampled sub-interval with a significant deviation.

    Among equally short significant candidates the one with the largest
    deviation wins, ties resolved by smallest start then smallest end.
    Candidates are processed by increasing span, so evaluation stops at the
    first span that produced a significant interval.
    """
    cand = draw_intervals(s, e, ev.cfg.M, ev.cfg.sampling, rng, min_span)
    if cand.shape[0] == 0:
        return None
    cand = np.unique(cand, axis=0)
    order = np.lexsort((cand[:, 1], cand[:, 0], cand[:, 1] - cand[:, 0]))
    best: Optional[DeviationResult] = None
    best_span = -1
    for i in order:
        cs, ce = int(cand[i, 0]), int(cand[i, 1])
        if best is not None and (ce - cs) > best_span:
            break
        res = ev.significant(cs, ce)
        if res is None:
            continue
        if best is None or res.deviation > best.deviation:
            best = res
            best_span = ce - cs
    return best


def shortest_significant_subinterval(
        s: int, e: int, y, x, cfg: NspConfig,
        rng: Optional[np.random.Generator] = None,
        vt2: Optional[float] = None) -> tuple[int, int]:
    """Second-stage refinement of a significant interval ``[s, e]``.

    Searches the interval for its shortest significant sub-interval with the
    same sampling scheme; falls back to ``[s, e]`` itself when sampling finds
    no significant strict sub-interval (the enclosing interval is already
    known to be significant, so the guarantee is unaffected).
    """
    y = np.asarray(y, dtype=np.float64)
    x = _as_matrix(x)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if cfg.deviation_mode == "self_normalised" and vt2 is None:
        vt2 = cfg.vt2 if cfg.vt2 is not None else vt_estimate(y, x)
    ev = _Evaluator(y, x, cfg, cfg.threshold.lam, vt2)
    res = _shortest_significant(ev, s, e, _min_span(cfg, x.shape[1]), rng)
    return res.interval if res is not None else (s, e)


def _min_span(cfg: NspConfig, p: int) -> int:
    if cfg.deviation_mode == "self_normalised":
        return sn_min_length(p, cfg.epsilon) - 1
    return p if cfg.rank_aware else 1


def nsp_run(y, x, cfg: NspConfig) -> SignificanceSet:
    """Full recursive search over ``[1, T]``.

    Returns the ordered set of significant intervals; an empty set is a
    valid outcome. With ``ar_order`` r > 0 the recursion re-enters the data
    r positions away from each detection so that no change is processed by
    both a parent and a child call.
    """
    y = np.asarray(y, dtype=np.float64)
    x = _as_matrix(x)
    if y.ndim != 1 or x.shape[0] != y.size:
        raise ValueError("response and design must have the same number of rows")
    t_len = y.size
    p = x.shape[1]
    vt2 = None
    if cfg.deviation_mode == "self_normalised":
        vt2 = cfg.vt2 if cfg.vt2 is not None else vt_estimate(y, x)
    lam = cfg.threshold.lam
    ev = _Evaluator(y, x, cfg, lam, vt2)
    min_span = _min_span(cfg, p)
    locator = cfg.locator
    if cfg.overlap == "in_inference" and locator is None:
        from .selection import cusum_locate
        locator = cusum_locate

    detections: list[Detection] = []
    stack = [(1, t_len, np.random.SeedSequence(cfg.seed))]
    while stack:
        s, e, ss = stack.pop()
        if e - s < min_span:
            continue
        # deviations are monotone under interval inclusion, so a search
        # interval whose own deviation sits below the threshold cannot
        # contain a significant sub-interval
        if ev.significant(s, e) is None:
            continue
        ss_stage1, ss_stage2, ss_left, ss_right = ss.spawn(4)
        first = _shortest_significant(ev, s, e, min_span,
                                      np.random.default_rng(ss_stage1))
        if first is None:
            continue
        s0, e0 = first.interval
        chosen = first
        if cfg.two_stage:
            inner = _shortest_significant(ev, s0, e0, min_span,
                                          np.random.default_rng(ss_stage2))
            if inner is not None:
                chosen = inner
        st, en = chosen.interval
        detections.append(Detection(
            start=st, end=en, deviation=chosen.deviation, threshold=lam,
            order=len(detections) + 1, parent=(s, e)))
        if cfg.overlap == "none":
            left_end, right_start = st, en
        elif cfg.overlap == "half":
            mid = (st + en) // 2
            left_end, right_start = mid, mid + 1
        else:
            loc = int(locator(y, (st, en)))
            left_end, right_start = loc, loc + 1
        left_end -= cfg.ar_order
        right_start += cfg.ar_order
        # right pushed first so the left child is processed next (LIFO)
        stack.append((right_start, e, ss_right))
        stack.append((s, left_end, ss_left))
    return SignificanceSet(detections=detections, threshold=cfg.threshold,
                           n=t_len, deviation_mode=cfg.deviation_mode)
