"""Post-inference utilities: locating a change inside a certified interval,
ranking detections by prominence, and bounding p-values on the gaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import SignificanceSet, deviation_plain
from .thresholds import ThresholdSpec, pvalue_upper_bound


def cusum_locate(y, interval: tuple[int, int]) -> int:
    """Most likely single-change position inside ``[s, e]``.

    Returns the 1-based index b in ``[s, e-1]`` maximising the absolute
    contrast between the means of ``y[s..b]`` and ``y[b+1..e]``, weighted as
    in the piecewise-constant single-change likelihood; ties go to the
    smallest b.
    """
    s, e = interval
    y = np.asarray(y, dtype=np.float64)
    if not (1 <= s <= e <= y.size):
        raise ValueError(f"interval [{s}, {e}] out of range 1..{y.size}")
    if e - s + 1 < 2:
        raise ValueError("need at least two points to locate a change")
    seg = y[s - 1:e]
    n = seg.size
    cum = np.cumsum(seg)
    left_n = np.arange(1, n, dtype=np.float64)
    right_n = n - left_n
    left_mean = cum[:-1] / left_n
    right_mean = (cum[-1] - cum[:-1]) / right_n
    contrast = np.sqrt(left_n * right_n / n) * np.abs(left_mean - right_mean)
    return s + int(np.argmax(contrast))


@dataclass(frozen=True)
class ProminenceEntry:
    label: str
    start: int
    end: int
    length: int
    order: int


@dataclass(frozen=True)
class ProminenceReport:
    """Detected intervals from shortest (most prominent) to longest."""

    entries: tuple[ProminenceEntry, ...]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_dict(self) -> list[dict]:
        return [vars(e).copy() for e in self.entries]


def prominence_order(result: SignificanceSet) -> ProminenceReport:
    """Stable sort of the detections by interval length, shortest first."""
    entries = [
        ProminenceEntry(label=f"{d.start}-{d.end}", start=d.start, end=d.end,
                        length=d.end - d.start, order=d.order)
        for d in result.detections
    ]
    entries.sort(key=lambda e: e.length)
    return ProminenceReport(entries=tuple(entries))


@dataclass(frozen=True)
class GapReport:
    start: int
    end: int
    deviation: float
    pvalue_bound: float


def segment_pvalues(y, x, result: SignificanceSet,
                    threshold: ThresholdSpec) -> list[GapReport]:
    """Deviation and p-value bound on each section between detections.

    Sections run from one detection's end to the next detection's start
    (inclusive), plus the two flanks; ``threshold`` supplies the series
    length and noise scale the bound is computed at. Sections too short to
    fit the model get deviation 0 and a bound clamped to 1.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    p = x.shape[1]
    if threshold.T is None or threshold.sigma is None:
        raise ValueError("need a threshold carrying the series length and noise scale")
    bounds_list = sorted(result.intervals())
    edges = [1] + [v for s, e in bounds_list for v in (s, e)] + [y.size]
    gaps = [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]
    out = []
    for gs, ge in gaps:
        if ge < gs:  # possible when detections overlap the recursion re-entry
            continue
        if ge - gs >= p:
            dev = deviation_plain(gs, ge, y, x).deviation
        else:
            dev = 0.0
        out.append(GapReport(
            start=gs, end=ge, deviation=dev,
            pvalue_bound=pvalue_upper_bound(dev, threshold.T, threshold.sigma),
        ))
    return out
