"""Scaled partial sums, interval families and multiresolution sup-norms.

All intervals are closed, 1-based pairs ``[s, e]`` with ``1 <= s <= e <= T``.
Norms of a vector restricted to an anchor ``[s, e]`` are always computed from
prefix sums of the restricted slice, so values do not depend on data outside
the anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_BLOCK = 1024


def _compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Prefix sums with blockwise compensation.

    Plain ``np.cumsum`` is used within blocks of 1024 entries; block totals
    are carried with Neumaier compensation, so rounding drift stays bounded
    by the block length rather than growing with T (relevant up to T ~ 1e6).
    Returns an array of length ``T + 1`` with a leading zero.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    n = values.size
    out = np.empty(n + 1, dtype=np.float64)
    out[0] = 0.0
    base = 0.0
    carry = 0.0
    for lo in range(0, n, _BLOCK):
        seg = values[lo:lo + _BLOCK]
        local = np.cumsum(seg)
        out[lo + 1:lo + 1 + seg.size] = base + local
        total = float(local[-1])
        # Neumaier update of the running block total
        t = base + total
        if abs(base) >= abs(total):
            carry += (base - t) + total
        else:
            carry += (total - t) + base
        base = t + carry
        carry += t - base  # re-absorb what the addition dropped
    return out


@dataclass(frozen=True)
class PrefixSums:
    """Cumulative sums of a sequence, ``cumsum[0] = 0`` and length ``n``."""

    cumsum: np.ndarray
    n: int

    @classmethod
    def from_values(cls, values) -> "PrefixSums":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("expected a one-dimensional sequence")
        return cls(cumsum=_compensated_cumsum(values), n=values.size)

    def range_sum(self, s: int, e: int) -> float:
        """Sum over the closed 1-based range ``[s, e]``."""
        if not (1 <= s <= e <= self.n):
            raise IndexError(f"interval [{s}, {e}] out of range 1..{self.n}")
        return float(self.cumsum[e] - self.cumsum[s - 1])


def scaled_partial_sum(prefix: PrefixSums, s: int, e: int) -> float:
    """Partial sum over ``[s, e]`` divided by the square root of its length."""
    return prefix.range_sum(s, e) / math.sqrt(e - s + 1)


def dyadic_lengths(n: int) -> list[int]:
    """Powers of two that fit inside an anchor of ``n`` points."""
    if n < 1:
        raise ValueError("anchor must contain at least one point")
    return [1 << j for j in range(n.bit_length()) if (1 << j) <= n]


@dataclass(frozen=True)
class IntervalFamily:
    """A family of sub-intervals of the anchor ``[start, end]``.

    ``kind`` is ``"dyadic"`` (all intervals whose length is a power of two,
    at every start position) or ``"all"`` (every sub-interval). Members are
    ordered by length ascending, then start ascending; weighted fits rely on
    this canonical order.
    """

    kind: str
    start: int
    end: int

    def __post_init__(self):
        if self.kind not in ("dyadic", "all"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if not (1 <= self.start <= self.end):
            raise ValueError(f"invalid anchor [{self.start}, {self.end}]")

    @property
    def n(self) -> int:
        return self.end - self.start + 1

    @property
    def lengths(self) -> list[int]:
        if self.kind == "dyadic":
            return dyadic_lengths(self.n)
        return list(range(1, self.n + 1))

    def level_starts(self, length: int) -> np.ndarray:
        return np.arange(self.start, self.end - length + 2, dtype=np.int64)

    def members(self) -> np.ndarray:
        """All member intervals as an ``(m, 2)`` array of ``(s, e)`` pairs."""
        rows = []
        for length in self.lengths:
            starts = self.level_starts(length)
            rows.append(np.stack([starts, starts + length - 1], axis=1))
        return np.concatenate(rows, axis=0)

    @property
    def size(self) -> int:
        return sum(self.n - length + 1 for length in self.lengths)


def dyadic_family(start: int, end: int) -> IntervalFamily:
    return IntervalFamily("dyadic", start, end)


def all_intervals_family(start: int, end: int) -> IntervalFamily:
    return IntervalFamily("all", start, end)


def _level_values(prefix_slice: np.ndarray, length: int) -> np.ndarray:
    """Scaled partial sums of every interval of one length, from slice prefixes."""
    return (prefix_slice[length:] - prefix_slice[:-length]) / math.sqrt(length)


def multiresolution_norm(y, family: IntervalFamily) -> tuple[float, tuple[int, int]]:
    """Maximum of |scaled partial sum| over the family, with a witnessing interval.

    The dyadic family of an anchor of n points is evaluated level by level in
    O(n log n); ties are broken by smallest start, then smallest end, so runs
    are reproducible.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("expected a one-dimensional sequence")
    if not (1 <= family.start <= family.end <= y.size):
        raise ValueError(
            f"family anchor [{family.start}, {family.end}] not within 1..{y.size}"
        )
    if family.size == 0:
        raise ValueError("empty interval family")
    prefix = _compensated_cumsum(y[family.start - 1:family.end])
    best = -1.0
    best_interval = (family.start, family.start)
    for length in family.lengths:
        vals = np.abs(_level_values(prefix, length))
        i = int(np.argmax(vals))  # first occurrence = smallest start
        v = float(vals[i])
        if v > best:
            best = v
            s = family.start + i
            best_interval = (s, s + length - 1)
        elif v == best:
            s = family.start + i
            cand = (s, s + length - 1)
            if cand < best_interval:
                best_interval = cand
    return best, best_interval


def norm_all_intervals(y, start: int, end: int) -> float:
    """Exact max of |scaled partial sum| over every sub-interval of the anchor.

    O(n^2); used as a reference value and for Monte-Carlo calibration of the
    all-intervals scan norm.
    """
    value, _ = multiresolution_norm(y, all_intervals_family(start, end))
    return value
