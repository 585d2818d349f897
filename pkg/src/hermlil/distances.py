"""Kolmogorov and Wasserstein distances, Stein-based bounds and the comparison inequality."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np
from scipy import optimize, special

__all__ = [
    "CostGuardError",
    "DistanceReport",
    "kolmogorov_1d_vs_gaussian",
    "kolmogorov_multid",
    "wasserstein_sorted",
    "wasserstein_assignment",
    "wasserstein_bruteforce",
    "comparison_rhs",
    "theta_recursion_map",
    "theta_bound_sequence",
    "gaussian_abs_moment",
    "stein_wasserstein_constant",
    "stein_wasserstein_bound",
    "stein_kolmogorov_bound",
    "stein_w1_bound",
]

ASSIGNMENT_CAP = 2048
MAX_ANCHORS_APPROX = 64
# RMS of the limiting Kolmogorov statistic sqrt(m) * D_m under an exact fit.
_KS_NULL_RMS = math.pi / math.sqrt(12.0)


class CostGuardError(RuntimeError):
    pass


@dataclass(frozen=True)
class DistanceReport:
    """One empirical distance.

    ``std_error`` is the statistical noise scale of the estimate: for
    Kolmogorov distances the root mean square of the statistic under an exact
    fit, ``pi / sqrt(12 m_eff)``; for Wasserstein distances it is left ``None``
    unless the caller supplies one.  ``exact`` is False only when the supremum
    was taken over a subsampled anchor grid.
    """

    kind: str
    value: float
    d: int
    m: int
    std_error: Optional[float]
    exact: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _phi_cdf(x):
    return special.ndtr(x)


def kolmogorov_1d_vs_gaussian(sample) -> DistanceReport:
    """``sup_t |F_m(t) - Phi(t)|`` over both one-sided limits at every sample point."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise ValueError("empty sample")
    cdf = _phi_cdf(x)
    i = np.arange(1, m + 1)
    d_plus = np.max(i / m - cdf)
    d_minus = np.max(cdf - (i - 1) / m)
    val = float(min(max(d_plus, d_minus, 0.0), 1.0))
    return DistanceReport("kolmogorov_1d", val, 1, m, _KS_NULL_RMS / math.sqrt(m), True)


def _anchor_grid(coords: np.ndarray, max_anchors: Optional[int]) -> tuple[np.ndarray, bool]:
    u = np.unique(coords)
    if max_anchors is None or u.size <= max_anchors:
        return u, True
    pick = np.unique(np.round(np.linspace(0, u.size - 1, max_anchors)).astype(int))
    return u[pick], False


def kolmogorov_multid(
    sampleX,
    sampleG=None,
    anchors: Union[str, int] = "full",
) -> DistanceReport:
    """Sup over lower-left orthants of the difference of two distribution functions.

    ``sampleG=None`` compares the empirical law of ``sampleX`` with the
    standard Gaussian law on ``R^d`` exactly (the product of normal CDFs is
    evaluated at both corners of each grid cell).  Otherwise both arguments are
    samples and the pooled coordinates form the grid.

    ``anchors="full"`` uses every coordinate as an anchor, which gives the exact
    supremum for the empirical measures.  An integer caps the number of anchors
    per axis (at most 64) and flags the report as approximate.  For ``d > 4``
    a cap is mandatory.
    """
    X = np.asarray(sampleX, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    m, d = X.shape
    if m == 0:
        raise ValueError("empty sample")
    G = None
    if sampleG is not None:
        G = np.asarray(sampleG, dtype=float)
        if G.ndim == 1:
            G = G[:, None]
        if G.shape[1] != d:
            raise ValueError(f"dimension mismatch: {d} vs {G.shape[1]}")
    if anchors == "full":
        if d > 4:
            raise CostGuardError("d > 4 needs an explicit anchor cap")
        cap = None
    else:
        cap = int(anchors)
        if not 1 <= cap <= MAX_ANCHORS_APPROX:
            raise ValueError(f"anchor cap must lie in [1, {MAX_ANCHORS_APPROX}]")

    pooled = X if G is None else np.vstack([X, G])
    grids, exact = [], True
    for j in range(d):
        g, ex = _anchor_grid(pooled[:, j], cap)
        grids.append(g)
        exact &= ex

    if G is None:
        val = _sup_vs_gaussian(X, grids)
        m_eff = m
    else:
        val = _sup_two_sample(X, G, grids)
        m_eff = m * G.shape[0] / (m + G.shape[0])
    kind = "kolmogorov_1d" if d == 1 else "kolmogorov_multid"
    return DistanceReport(kind, float(min(val, 1.0)), d, m, _KS_NULL_RMS / math.sqrt(m_eff), exact)


def _cell_index(x: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # cell c holds points counted at anchors >= grid[c]; len(grid) means never counted
    return np.searchsorted(grid, x, side="left")


def _sup_two_sample(X, G, grids) -> float:
    d = X.shape[1]
    shape = tuple(len(g) for g in grids)
    best = 0.0
    ix = [_cell_index(X[:, j], grids[j]) for j in range(d)]
    ig = [_cell_index(G[:, j], grids[j]) for j in range(d)]
    wx, wg = 1.0 / X.shape[0], 1.0 / G.shape[0]
    order_x = np.argsort(ix[0], kind="stable")
    order_g = np.argsort(ig[0], kind="stable")
    hist = np.zeros(shape[1:]) if d > 1 else np.zeros(())
    px = pg = 0
    for a in range(shape[0]):
        while px < len(order_x) and ix[0][order_x[px]] <= a:
            k = order_x[px]
            idx = tuple(ix[j][k] for j in range(1, d))
            if all(i < s for i, s in zip(idx, shape[1:])):
                hist[idx] += wx
            px += 1
        while pg < len(order_g) and ig[0][order_g[pg]] <= a:
            k = order_g[pg]
            idx = tuple(ig[j][k] for j in range(1, d))
            if all(i < s for i, s in zip(idx, shape[1:])):
                hist[idx] -= wg
            pg += 1
        cum = hist
        for ax in range(d - 1):
            cum = np.cumsum(cum, axis=ax)
        best = max(best, float(np.max(np.abs(cum))))
    return best


def _ecdf_sweep(idx, shape, m):
    """Yield ``(c, F)`` where ``F`` counts points with ``idx <= cell`` along every axis."""
    d = len(idx)
    order = np.argsort(idx[0], kind="stable")
    hist = np.zeros(shape[1:]) if d > 1 else np.zeros(())
    w = 1.0 / m
    p = 0
    for c in range(shape[0]):
        while p < m and idx[0][order[p]] <= c:
            k = order[p]
            cell = tuple(idx[j][k] for j in range(1, d))
            if all(i < s for i, s in zip(cell, shape[1:])):
                hist[cell] += w
            p += 1
        F = hist
        for ax in range(d - 1):
            F = np.cumsum(F, axis=ax)
        yield c, F


def _sup_vs_gaussian(X, grids) -> float:
    """Exact sup of ``|F_m - prod Phi|`` over the cells of the anchor grid.

    Cells are indexed ``c = 0..K`` per axis with lower corner ``grid[c-1]``
    (``-inf`` for ``c = 0``) and upper corner ``grid[c]`` (``+inf`` for ``c = K``).
    On a cell the Gaussian CDF increases from its lower to its upper corner, so
    the sup compares ``F_m`` at the lower corner with ``Phi`` there, and the
    left limit ``F_m(upper-)`` with ``Phi`` at the upper corner.  When every
    sample coordinate is an anchor the two empirical values coincide.
    """
    m, d = X.shape
    lows = [np.concatenate(([0.0], _phi_cdf(g))) for g in grids]
    highs = [np.concatenate((_phi_cdf(g), [1.0])) for g in grids]
    shape = tuple(len(g) + 1 for g in grids)
    # x <= grid[c-1]  <=>  (#anchors < x) + 1 <= c
    at_lower = [np.searchsorted(grids[j], X[:, j], side="left") + 1 for j in range(d)]
    # x <  grid[c]    <=>  (#anchors <= x) <= c
    below_upper = [np.searchsorted(grids[j], X[:, j], side="right") for j in range(d)]
    P_low_rest = np.ones(()) if d == 1 else _outer(lows[1:])
    P_high_rest = np.ones(()) if d == 1 else _outer(highs[1:])
    best = 0.0
    for c, F in _ecdf_sweep(at_lower, shape, m):
        best = max(best, float(np.max(F - lows[0][c] * P_low_rest)))
    for c, F in _ecdf_sweep(below_upper, shape, m):
        best = max(best, float(np.max(highs[0][c] * P_high_rest - F)))
    return best


def _outer(vectors) -> np.ndarray:
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def wasserstein_sorted(sampleA, sampleB, theta: float = 1.0) -> DistanceReport:
    """``W_theta`` between two equal-size 1-D empirical measures via order statistics."""
    a = np.sort(np.asarray(sampleA, dtype=float).ravel())
    b = np.sort(np.asarray(sampleB, dtype=float).ravel())
    if a.size != b.size:
        raise ValueError(f"unequal sample sizes {a.size} and {b.size}")
    if a.size == 0:
        raise ValueError("empty sample")
    if theta < 1:
        raise ValueError("theta must be >= 1")
    val = float(np.mean(np.abs(a - b) ** theta) ** (1.0 / theta))
    return DistanceReport("wasserstein_sorted", val, 1, a.size, None, True)


def wasserstein_assignment(sampleA, sampleB, cap: int = ASSIGNMENT_CAP) -> DistanceReport:
    """Exact ``W_1`` between equal-size empirical measures in any dimension.

    Solved as a minimum-cost perfect matching on Euclidean costs
    (shortest augmenting paths, :func:`scipy.optimize.linear_sum_assignment`).
    """
    A = np.asarray(sampleA, dtype=float)
    B = np.asarray(sampleB, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"unequal sample sizes {A.shape[0]} and {B.shape[0]}")
    if A.shape[1] != B.shape[1]:
        raise ValueError("dimension mismatch")
    m = A.shape[0]
    if m > cap:
        raise CostGuardError(f"assignment size {m} exceeds cap {cap}")
    if A.shape[1] == 1:
        cost = np.abs(A[:, 0][:, None] - B[:, 0][None, :])
    else:
        cost = np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1))
    r, c = optimize.linear_sum_assignment(cost)
    val = float(np.sum(cost[r, c]) / m)
    return DistanceReport("wasserstein_assignment", val, A.shape[1], m, None, True)


def wasserstein_bruteforce(sampleA, sampleB, theta: float = 1.0) -> float:
    """Minimum over all ``m!`` pairings; only for tiny samples."""
    a = np.asarray(sampleA, dtype=float).ravel()
    b = np.asarray(sampleB, dtype=float).ravel()
    if a.size > 9:
        raise CostGuardError("brute force limited to m <= 9")
    best = min(np.mean(np.abs(a - b[list(p)]) ** theta) for p in itertools.permutations(range(b.size)))
    return float(best ** (1.0 / theta))


def comparison_rhs(d: int, w1: float) -> float:
    """``3 log(d+1)^{1/4} sqrt(W_1)``, the Kolmogorov bound implied by ``W_1``."""
    if d < 1 or w1 < 0:
        raise ValueError("need d >= 1 and w1 >= 0")
    return 3.0 * math.log(d + 1) ** 0.25 * math.sqrt(w1)


_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def theta_recursion_map(t: float) -> float:
    """``f(t) = phi(t) + t Phi(t)``."""
    return _INV_SQRT_2PI * math.exp(-0.5 * t * t) + t * 0.5 * math.erfc(-t / math.sqrt(2.0))


def theta_bound_sequence(dmax: int) -> np.ndarray:
    """Bounds ``b_1 = 1/sqrt(2 pi)``, ``b_{d+1} = f(b_d)`` on the Gaussian orthant density ``theta_d``."""
    if dmax < 1:
        raise ValueError("dmax must be >= 1")
    out = np.empty(dmax)
    b = _INV_SQRT_2PI
    exp, erfc, r2 = math.exp, math.erfc, math.sqrt(2.0)
    for i in range(dmax):
        out[i] = b
        b = _INV_SQRT_2PI * exp(-0.5 * b * b) + b * 0.5 * erfc(-b / r2)
    return out


def gaussian_abs_moment(theta: float) -> float:
    """``c_theta = (E|G|^theta)^{1/theta} = (2^{theta/2} Gamma((theta+1)/2) / sqrt(pi))^{1/theta}``."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    log_m = 0.5 * theta * math.log(2.0) + math.lgamma(0.5 * (theta + 1)) - 0.5 * math.log(math.pi)
    return math.exp(log_m / theta)


def stein_wasserstein_constant(d: int, theta: float) -> float:
    """``D(d, theta)``: ``c_theta d^{1-1/theta}`` on ``[1, 2)``, ``c_theta d^{1-2/theta}`` beyond."""
    if d < 1 or theta < 1:
        raise ValueError("need d >= 1 and theta >= 1")
    power = 1.0 - 1.0 / theta if theta < 2 else 1.0 - 2.0 / theta
    return gaussian_abs_moment(theta) * d**power


def stein_wasserstein_bound(d: int, theta: float, moment_sum: float) -> float:
    """``D(d, theta) (sum_ij E|tau_ij - delta_ij|^theta)^{1/theta}``."""
    if moment_sum < 0:
        raise ValueError("moment sum must be nonnegative")
    return stein_wasserstein_constant(d, theta) * moment_sum ** (1.0 / theta)


def stein_kolmogorov_bound(abs_dev: float) -> float:
    """One-dimensional Stein bound ``d_K(X, G) <= E|tau(X) - 1|``."""
    if abs_dev < 0:
        raise ValueError("abs_dev must be nonnegative")
    return float(abs_dev)


def stein_w1_bound(second_moment_sum: float) -> float:
    """``W_1 <= sqrt(sum_ij E[(tau_ij - delta_ij)^2])``."""
    if second_moment_sum < 0:
        raise ValueError("second moment sum must be nonnegative")
    return math.sqrt(second_moment_sum)
