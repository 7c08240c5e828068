"""Independent reference implementations used to check the fast paths."""

import math

import numpy as np
from scipy.optimize import minimize

from nsp.sequences import PrefixSums, scaled_partial_sum


def naive_dyadic_norm(y, s, e):
    """Double-loop enumeration of the dyadic scan norm on an anchor.

    Ties resolve to the smallest start, then the smallest end.
    """
    prefix = PrefixSums.from_values(np.asarray(y, dtype=float)[s - 1:e])
    n = e - s + 1
    best, best_iv = -math.inf, None
    length = 1
    while length <= n:
        for a in range(1, n - length + 2):
            v = abs(scaled_partial_sum(prefix, a, a + length - 1))
            iv = (s + a - 1, s + a + length - 2)
            if v > best or (v == best and iv < best_iv):
                best = v
                best_iv = iv
        length *= 2
    return best, best_iv


def constraint_rows(y, x, family):
    """Scaled partial sums per family interval, built one value at a time."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    members = family.members()
    py = PrefixSums.from_values(y)
    pxs = [PrefixSums.from_values(x[:, k]) for k in range(x.shape[1])]
    rows_y = np.array([scaled_partial_sum(py, s, e) for s, e in members])
    rows_x = np.array([[scaled_partial_sum(pk, s, e) for pk in pxs]
                       for s, e in members])
    return rows_y, rows_x


def grid_min_deviation(y, x, family, weights=None, halfwidth=8.0):
    """Hierarchical grid minimisation of the (weighted) residual scan norm.

    Coarse step 0.1 over a box, a 1e-3 grid pass, then a simplex polish for
    the descent directions an axis-aligned grid misses; the objective is
    convex, so this brackets the optimum.
    """
    rows_y, rows_x = constraint_rows(y, x, family)
    w = np.ones(rows_y.size) if weights is None else np.asarray(weights, float)

    def objective(grid):  # grid: (G, p)
        return (np.abs(rows_y[:, None] - rows_x @ grid.T) / w[:, None]).max(axis=0)

    def scan(center, step, reach):
        best_val, best_pt = np.inf, center
        for _ in range(12):  # chase edge hits at this scale
            axes = [center[k] + np.arange(-reach, reach + 1) * step
                    for k in range(center.size)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"),
                            axis=-1).reshape(-1, center.size)
            vals = objective(grid)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_pt = float(vals[i]), grid[i]
            on_edge = np.any(np.abs(grid[i] - center) >= reach * step - step / 2)
            center = grid[i]
            if not on_edge:
                break
        return best_val, best_pt

    p = rows_x.shape[1]
    val, center = scan(np.zeros(p), 0.1, int(halfwidth / 0.1))
    val, center = scan(center, 1e-3, 120)
    polish = minimize(lambda b: objective(b[None, :])[0], center,
                      method="Nelder-Mead",
                      options={"xatol": 1e-12, "fatol": 1e-12,
                               "maxiter": 20000, "maxfev": 20000})
    if polish.fun < val:
        val, center = float(polish.fun), polish.x
    return val, center


def enumerate_min_deviation(y, x, family, weights=None):
    """Exact minimiser of the residual scan norm by active-set enumeration.

    The optimum of a min-max problem over p coefficients sits where p+1
    signed constraints are simultaneously tight, so trying every signed
    subset of that size and keeping the feasible candidates brackets the
    optimum exactly (up to arithmetic) on non-degenerate instances.
    """
    from itertools import combinations, product

    rows_y, rows_x = constraint_rows(y, x, family)
    m, p = rows_x.shape
    w = np.ones(m) if weights is None else np.asarray(weights, float)

    def max_ratio(beta):
        return float((np.abs(rows_y - rows_x @ beta) / w).max())

    best = max_ratio(np.zeros(p))
    k = p + 1
    for idx in combinations(range(m), k):
        idx = list(idx)
        a = rows_x[idx]
        c = rows_y[idx]
        ww = w[idx]
        for signs in product((1.0, -1.0), repeat=k):
            s = np.array(signs)
            # tight rows: sign * (c - a beta) = w * omega
            mat = np.column_stack([s[:, None] * a, ww])
            rhs = s * c
            if abs(np.linalg.det(mat)) < 1e-12:
                continue
            sol = np.linalg.solve(mat, rhs)
            beta, omega = sol[:p], sol[p]
            if omega < -1e-12:
                continue
            val = max_ratio(beta)
            if val <= omega + 1e-9 * max(1.0, omega):
                best = min(best, val)
    return best


def selfnorm_statistic_of(z, lengths, vt2, epsilon):
    """Self-normalised scan functional of a known noise vector.

    Evaluates, over every window of each length, the absolute raw sum divided
    by sqrt of the window's own energy times the logarithmic penalty in the
    global-to-local energy ratio.
    """
    z = np.asarray(z, dtype=float)
    c = math.exp(1.0 + 2.0 * epsilon)
    best = 0.0
    for length in lengths:
        for a in range(z.size - length + 1):
            win = z[a:a + length]
            energy = float(win @ win)
            if energy <= 0.0 or energy >= c * vt2:
                continue
            denom = math.sqrt(energy) * math.log(c * vt2 / energy) ** (0.5 + epsilon)
            best = max(best, abs(float(win.sum())) / denom)
    return best


def selfnorm_noise_bound(y, x, z, lengths, vt2, epsilon):
    """Known-noise numerator over empirically weighted windows.

    Weights are rebuilt per window from scratch (least-squares residual
    energy of the observed response, inflated and log-penalised); the
    numerator is the raw sum of the true noise. The weighted fit's deviation
    is bounded by this quantity on change-point-free data.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    c = math.exp(1.0 + 2.0 * epsilon)
    best = 0.0
    for length in lengths:
        for a in range(y.size - length + 1):
            yw = y[a:a + length]
            xw = x[a:a + length]
            beta, *_ = np.linalg.lstsq(xw, yw, rcond=None)
            resid = yw - xw @ beta
            rss = float(resid @ resid)
            if rss <= 0.0 or rss >= c * vt2:
                continue
            weight = (1.0 + epsilon) * math.sqrt(rss) * \
                math.log(c * vt2 / rss) ** (0.5 + epsilon)
            best = max(best, abs(float(z[a:a + length].sum())) / weight)
    return best
