"""Autocovariances of stationary Gaussian sequences and Hermite-variation variances.

Three covariance models are supported: unit increments of fractional Brownian
motion (fractional Gaussian noise), white noise, and an explicit list of
correlations with an optional power-law tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "RegimeError",
    "LagOutOfRangeError",
    "CovarianceModel",
    "FgnIncrements",
    "WhiteNoise",
    "Explicit",
    "fgn_autocovariance",
    "fgn_autocovariance_asymptotic",
    "subordinated_autocovariance",
    "partial_sum_variance",
    "partial_sum_variances",
    "breuer_major_sigma2",
    "critical_variance_constant",
    "critical_hurst",
    "limsup_candidates",
]

# Lags k >= 2 use the binomial expansion of the second difference;
# (first lag, terms) pairs keep the truncation error below 1e-17.
_SERIES_BANDS = ((2, 40), (64, 8))


class RegimeError(ValueError):
    """Raised when a quantity is requested outside the regime where it exists."""


class LagOutOfRangeError(IndexError):
    """Raised when an explicit model is asked for a lag it does not store."""


def _check_hurst(H: float) -> float:
    H = float(H)
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst parameter must lie in (0, 1), got {H}")
    return H


def _check_order(q: int) -> int:
    if int(q) != q or q < 1:
        raise ValueError(f"chaos order must be an integer >= 1, got {q}")
    return int(q)


def _binom_even_coeffs(a: float, terms: int) -> np.ndarray:
    """Generalised binomial coefficients C(a, 2j) for j = 1..terms."""
    out = np.empty(terms)
    c = 1.0
    for n in range(1, 2 * terms + 1):
        c *= (a - (n - 1)) / n
        if n % 2 == 0:
            out[n // 2 - 1] = c
    return out


def _fgn_rho(H: float, k: np.ndarray) -> np.ndarray:
    k = np.abs(np.asarray(k, dtype=np.int64))
    out = np.empty(k.shape, dtype=float)
    a = 2.0 * H
    out[k == 0] = 1.0
    # rho(1) = 2^{2H-1} - 1, cancels near H = 1/2
    out[k == 1] = math.expm1((a - 1.0) * math.log(2.0))
    edges = [lo for lo, _ in _SERIES_BANDS[1:]] + [np.inf]
    for (lo, terms), hi in zip(_SERIES_BANDS, edges):
        band = (k >= lo) & (k < hi)
        if not np.any(band):
            continue
        kb = k[band].astype(float)
        inv2 = kb**-2.0
        # Horner in 1/k^2; every C(a, 2j) shares one sign, so no cancellation.
        acc = np.zeros_like(kb)
        for c in _binom_even_coeffs(a, terms)[::-1]:
            acc = acc * inv2 + c
        out[band] = kb**a * inv2 * acc
    return out


@dataclass(frozen=True)
class CovarianceModel:
    """Base class; subclasses implement :meth:`rho`."""

    def rho(self, k):
        raise NotImplementedError

    @property
    def name(self) -> str:
        raise NotImplementedError

    def tail_exponent(self) -> Optional[float]:
        """Exponent ``b`` such that ``|rho(k)| * k**b`` is nonincreasing in the tail."""
        return None


@dataclass(frozen=True)
class FgnIncrements(CovarianceModel):
    """Unit increments ``Z_k = B_{k+1} - B_k`` of fractional Brownian motion."""

    H: float

    def __post_init__(self):
        _check_hurst(self.H)

    def rho(self, k):
        scalar = np.ndim(k) == 0
        out = _fgn_rho(self.H, np.atleast_1d(k))
        return float(out[0]) if scalar else out

    @property
    def name(self) -> str:
        return f"fgn(H={self.H:g})"

    def tail_exponent(self) -> Optional[float]:
        return None if self.H == 0.5 else 2.0 - 2.0 * self.H


@dataclass(frozen=True)
class WhiteNoise(CovarianceModel):
    def rho(self, k):
        k = np.asarray(k)
        out = np.where(k == 0, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def name(self) -> str:
        return "white"


@dataclass(frozen=True)
class Explicit(CovarianceModel):
    """Correlations ``values[k]`` for ``k < len(values)``.

    Beyond the stored lags the model either extrapolates
    ``rho(k) = values[-1] * (K / k) ** tail_exponent`` with ``K = len(values) - 1``,
    returns zero when ``zero_fill`` is set, or raises :class:`LagOutOfRangeError`.
    """

    values: tuple = field(default=(1.0,))
    tail: Optional[float] = None
    zero_fill: bool = False

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals or vals[0] != 1.0:
            raise ValueError("explicit correlations must start with rho(0) = 1")
        if any(abs(v) > 1.0 for v in vals):
            raise ValueError("explicit correlations must satisfy |rho(k)| <= 1")
        if self.tail is not None and self.tail <= 0:
            raise ValueError("tail exponent must be positive")
        if self.tail is not None and len(vals) < 2:
            raise ValueError("a tail law needs at least one nonzero lag")

    def rho(self, k):
        scalar = np.ndim(k) == 0
        k = np.abs(np.atleast_1d(np.asarray(k, dtype=np.int64)))
        K = len(self.values)
        vals = np.asarray(self.values)
        out = np.zeros(k.shape, dtype=float)
        inside = k < K
        out[inside] = vals[k[inside]]
        if np.any(~inside):
            if self.tail is not None:
                last = K - 1
                out[~inside] = vals[last] * (last / k[~inside].astype(float)) ** self.tail
            elif not self.zero_fill:
                raise LagOutOfRangeError(
                    f"lag {int(k[~inside].max())} beyond the {K} stored lags and no tail law"
                )
        return float(out[0]) if scalar else out

    @property
    def name(self) -> str:
        return f"explicit(len={len(self.values)})"

    def tail_exponent(self) -> Optional[float]:
        return self.tail


def fgn_autocovariance(H: float, k: int) -> float:
    """Autocovariance of unit-variance fractional Gaussian noise at lag ``k``.

    ``rho_H(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2``.  For ``|k| >= 2``
    the second difference is evaluated through its binomial series, which keeps
    full relative precision out to very large lags.
    """
    H = _check_hurst(H)
    return FgnIncrements(H).rho(int(k))


def fgn_autocovariance_asymptotic(q: int, k: int) -> float:
    """Leading term of ``rho_H(k)**q`` at the critical Hurst index ``1 - 1/(2q)``."""
    q = _check_order(q)
    if k < 1:
        raise ValueError("asymptotic form needs k >= 1")
    return ((1.0 - 1.0 / (2 * q)) * (1.0 - 1.0 / q)) ** q / k


def critical_hurst(q: int) -> float:
    return 1.0 - 1.0 / (2 * _check_order(q))


def subordinated_autocovariance(model: CovarianceModel, q: int, k: int) -> float:
    """``Cov(H_q(Z_0), H_q(Z_k)) = q! rho(k)^q``."""
    q = _check_order(q)
    return math.factorial(q) * model.rho(abs(int(k))) ** q


def partial_sum_variances(model: CovarianceModel, q: int, n_max: int) -> np.ndarray:
    """``E[X_n^2]`` for every ``n = 1..n_max`` (index ``n - 1``), in O(n_max)."""
    q = _check_order(q)
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n must be >= 1")
    r = np.arange(1, n_max)
    rq = model.rho(r) ** q if n_max > 1 else np.zeros(0)
    # V(n) = q! [n + 2 (n * A(n-1) - B(n-1))], A/B partial sums of rho^q and r*rho^q
    A = np.concatenate(([0.0], np.cumsum(rq)))
    B = np.concatenate(([0.0], np.cumsum(r * rq)))
    n = np.arange(1, n_max + 1, dtype=float)
    return math.factorial(q) * (n + 2.0 * (n * A - B))


def partial_sum_variance(model: CovarianceModel, q: int, n: int) -> float:
    """Exact ``E[X_n^2] = q! * sum_{|r|<n} (n - |r|) rho(r)^q``."""
    q = _check_order(q)
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return float(math.factorial(q))
    r = np.arange(1, n)
    rq = model.rho(r) ** q
    return float(math.factorial(q) * (n + 2.0 * np.sum((n - r) * rq)))


def _tail_sum_bound(model: CovarianceModel, q: int, K: int) -> float:
    """Upper bound for ``sum_{k>K} |rho(k)|^q``.

    Uses that ``|rho(k)| k^b`` is nonincreasing past ``K`` (``b`` the model's
    tail exponent), so the tail is dominated by an integral of ``k^{-qb}``.
    """
    if isinstance(model, WhiteNoise) or (isinstance(model, FgnIncrements) and model.H == 0.5):
        return 0.0
    if isinstance(model, Explicit) and model.tail is None:
        return 0.0  # zero-filled or out-of-range; rho evaluation raises in the latter case
    b = model.tail_exponent()
    exponent = q * b
    if exponent <= 1.0:
        return math.inf
    return abs(model.rho(K)) ** q * K / (exponent - 1.0)


def breuer_major_sigma2(model: CovarianceModel, q: int, tol: float = 1e-8) -> float:
    """Breuer-Major variance ``sigma_q^2 = q! * sum_{r in Z} rho(r)^q``.

    The series is truncated at the first power of two ``K`` whose analytic
    tail bound is below ``tol``; the truncation at ``2K`` must agree to ``tol``.

    Raises
    ------
    RegimeError
        If ``sum |rho|^q`` diverges (for fGn: ``H >= 1 - 1/(2q)``).
    """
    q = _check_order(q)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(model, FgnIncrements) and model.H >= critical_hurst(q) and model.H != 0.5:
        raise RegimeError(
            f"sum of rho^q diverges for H={model.H} >= 1 - 1/(2q) = {critical_hurst(q)}"
        )
    b = model.tail_exponent()
    if b is not None and q * b <= 1.0:
        raise RegimeError(f"tail exponent {b} too slow for order q={q}")
    if isinstance(model, Explicit) and model.tail is None:
        K = len(model.values) - 1
        if K == 0:
            return float(math.factorial(q))
        r = np.arange(1, K + 1)
        return float(math.factorial(q) * (1.0 + 2.0 * np.sum(model.rho(r) ** q)))

    fq = math.factorial(q)
    K = 64
    # tolerance applies to sigma^2, so scale the tail bound by 2 q!
    while 2 * fq * _tail_sum_bound(model, q, K) > tol:
        K *= 2
        if K > 2**40:
            raise RegimeError("tail decays too slowly to reach the requested tolerance")

    def truncated(K_):
        r = np.arange(1, K_ + 1)
        return fq * (1.0 + 2.0 * math.fsum(model.rho(r) ** q))

    v1, v2 = truncated(K), truncated(2 * K)
    if abs(v1 - v2) > tol:
        raise ArithmeticError(f"truncations at {K} and {2 * K} disagree by {abs(v1 - v2)}")
    return v2


def critical_variance_constant(q: int) -> float:
    """``c_q = 2 q! ((1 - 1/(2q))(1 - 1/q))^q``, with ``E[X_n^2] ~ c_q n log n``."""
    q = _check_order(q)
    if q == 1:
        raise RegimeError("q = 1 has no critical regime")
    return 2.0 * math.factorial(q) * ((1.0 - 1.0 / (2 * q)) * (1.0 - 1.0 / q)) ** q


def limsup_candidates(model: CovarianceModel, q: int) -> dict:
    """The two readings of the limsup constant for Hermite variations of fGn.

    One reading takes the variance constant itself as the limsup, the other
    its square root (the natural scale of ``X_n / sqrt(2 g(n)^2 log log n)``).
    Both are returned; neither is asserted anywhere.
    """
    q = _check_order(q)
    if isinstance(model, FgnIncrements) and q >= 2 and math.isclose(model.H, critical_hurst(q)):
        c = critical_variance_constant(q)
        return {"regime": "critical", "variance_constant": c, "stated": c, "natural": math.sqrt(c)}
    s2 = breuer_major_sigma2(model, q)
    return {"regime": "breuer_major", "variance_constant": s2, "stated": s2, "natural": math.sqrt(s2)}
