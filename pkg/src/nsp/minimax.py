"""Linear-model fits that minimise the multiresolution sup-norm of residuals.

The fit solves, over coefficient vectors beta,

    minimise  max_{[u,v] in family} |U_{u,v}(Y - X beta)| / weight_{u,v}

which is a small linear programme: one variable per coefficient (free),
one objective variable for the norm bound, and two inequality rows per
family interval. Weights default to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import NumericalError
from .sequences import IntervalFamily, _compensated_cumsum, _level_values

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


@dataclass(frozen=True)
class MinimaxFitResult:
    """Optimal coefficients, the achieved norm, and a norm-achieving interval."""

    beta: np.ndarray
    deviation: float
    binding_interval: tuple[int, int]


def _solve_lp(rows_x: np.ndarray, rows_y: np.ndarray, weights: np.ndarray,
              interval=None) -> np.ndarray:
    """Coefficients minimising ``max_i |rows_y[i] - rows_x[i] @ beta| / weights[i]``."""
    m, p = rows_x.shape
    a_ub = np.empty((2 * m, p + 1), dtype=np.float64)
    a_ub[:m, :p] = rows_x
    a_ub[m:, :p] = -rows_x
    a_ub[:m, p] = -weights
    a_ub[m:, p] = -weights
    b_ub = np.concatenate([rows_y, -rows_y])
    c = np.zeros(p + 1)
    c[p] = 1.0
    bounds = [(None, None)] * p + [(0.0, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs",
                  options=_LP_OPTIONS)
    if not res.success:
        raise NumericalError(
            f"minimax fit LP failed ({res.message})", interval=interval)
    return res.x[:p]


def _scaled_sums_matrix(values: np.ndarray, family: IntervalFamily) -> np.ndarray:
    """Scaled partial sums of each column over every family interval.

    ``values`` has the anchor's rows only (shape n or n x p); rows of the
    result follow the family's canonical member order.
    """
    if values.ndim == 1:
        values = values[:, None]
    n, p = values.shape
    if n != family.n:
        raise ValueError("values must cover exactly the family anchor")
    cols = [_compensated_cumsum(values[:, k]) for k in range(p)]
    out = np.empty((family.size, p), dtype=np.float64)
    row = 0
    for length in family.lengths:
        cnt = family.n - length + 1
        for k in range(p):
            out[row:row + cnt, k] = _level_values(cols[k], length)
        row += cnt
    return out


def _norm_over_family(
    sums_y: np.ndarray, sums_x: np.ndarray, beta: np.ndarray,
    weights: np.ndarray, family: IntervalFamily,
) -> tuple[float, tuple[int, int]]:
    vals = np.abs(sums_y - sums_x @ beta) / weights
    members = family.members()
    best = float(vals.max())
    ties = np.flatnonzero(vals == best)
    # member order is (length asc, start asc); prefer smallest start, then end
    j = ties[np.lexsort((members[ties, 1], members[ties, 0]))[0]]
    return best, (int(members[j, 0]), int(members[j, 1]))


def fit_minimax_weighted(y, x, family: IntervalFamily, weights) -> MinimaxFitResult:
    """Weighted multiresolution sup-norm fit of ``y`` on the columns of ``x``.

    ``y`` and ``x`` carry the anchor's rows only (the family must be anchored
    on ``[1, n]``), and ``weights`` holds one strictly positive value per
    family interval, in the family's canonical order.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    if y.size != n:
        raise ValueError("response and design must have the same number of rows")
    if family.start != 1 or family.end != n:
        raise ValueError("family must be anchored on [1, n]")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (family.size,):
        raise ValueError("need exactly one weight per family interval")
    if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and strictly positive")

    sums_y = _scaled_sums_matrix(y, family)[:, 0]
    sums_x = _scaled_sums_matrix(x, family)

    if n <= p:
        # anchor too short to constrain the model: any interpolating fit is exact
        beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    else:
        beta = _solve_lp(sums_x, sums_y, weights, interval=(family.start, family.end))
    dev, binding = _norm_over_family(sums_y, sums_x, beta, weights, family)
    return MinimaxFitResult(beta=beta, deviation=dev, binding_interval=binding)


def fit_minimax(y, x, family: IntervalFamily) -> MinimaxFitResult:
    """Unweighted multiresolution sup-norm fit (all interval weights one)."""
    return fit_minimax_weighted(y, x, family, np.ones(family.size))
