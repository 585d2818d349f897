"""Hermite variations, their normalizers, the carre du champ and blocking subsequences."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from typing import Union

import numpy as np
import scipy.fft

from .covariance import (
    CovarianceModel,
    FgnIncrements,
    RegimeError,
    breuer_major_sigma2,
    critical_hurst,
    critical_variance_constant,
    partial_sum_variance,
)
from .sampler import GaussianPath, PathEnsemble

__all__ = [
    "Regime",
    "VariationSpec",
    "BlockingSubsequence",
    "CostCapError",
    "DIRECT_CAP",
    "hermite_eval",
    "variation_statistic",
    "normalizer",
    "carre_du_champ",
    "carre_du_champ_direct",
    "block_stein_matrix",
    "blocking_subsequence",
    "increment_vector",
    "loglog_guard",
]

DIRECT_CAP = 4096


class CostCapError(RuntimeError):
    """A quadratic-cost computation was requested beyond its configured cap."""


class Regime(str, enum.Enum):
    BREUER_MAJOR = "breuer_major"
    CRITICAL = "critical"
    EXACT = "exact"


@dataclass(frozen=True)
class VariationSpec:
    """Model, Hermite rank and normalizer choice for ``X_n = sum H_q(Z_k)``.

    With ``strict`` set, a critical normalizer is only accepted for fGn at
    ``H = 1 - 1/(2q)`` and a Breuer-Major normalizer only where ``sigma_q^2`` is
    finite.  Audits that deliberately apply the wrong normalizer (negative
    controls) pass ``strict=False``.
    """

    model: CovarianceModel
    q: int
    regime: Regime = Regime.EXACT
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if not self.strict:
            return
        if self.regime is Regime.CRITICAL:
            if not (isinstance(self.model, FgnIncrements) and math.isclose(self.model.H, critical_hurst(self.q))):
                raise RegimeError("critical normalizer requires fGn with H = 1 - 1/(2q)")
        elif self.regime is Regime.BREUER_MAJOR:
            breuer_major_sigma2(self.model, self.q)

    def with_regime(self, regime) -> "VariationSpec":
        return VariationSpec(self.model, self.q, Regime(regime), self.strict)


PathLike = Union[GaussianPath, PathEnsemble, np.ndarray]


def _values(z: PathLike) -> np.ndarray:
    if isinstance(z, (GaussianPath, PathEnsemble)):
        return z.values
    return np.asarray(z, dtype=float)


def hermite_eval(q: int, x):
    """Probabilists' Hermite polynomial ``H_q(x)``.

    Evaluated by the three-term recurrence ``H_{k+1} = x H_k - k H_{k-1}``;
    ``x`` may be a scalar or an array.
    """
    if q < 0:
        raise ValueError("degree must be >= 0")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if q == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for k in range(1, q):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def _check_range(n_total: int, n1: int, n2: int) -> None:
    if not 0 <= n1 < n2 <= n_total:
        raise IndexError(f"need 0 <= n1 < n2 <= {n_total}, got n1={n1}, n2={n2}")


def variation_statistic(path: PathLike, q: int, n1: int, n2: int):
    """``sum_{k=n1}^{n2-1} H_q(Z_k)``; vectorised over rows for ensembles."""
    z = _values(path)
    _check_range(z.shape[-1], n1, n2)
    s = hermite_eval(q, z[..., n1:n2]).sum(axis=-1)
    return s if np.ndim(s) else float(s)


def loglog_guard(n) -> None:
    if np.min(n) < 16:
        raise ValueError("log log n is only used for n >= 16")


def normalizer(spec: VariationSpec, n: int) -> float:
    """``g(n)``: exact standard deviation, ``sqrt(sigma_q^2 n)`` or ``sqrt(c_q n log n)``."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.regime is Regime.EXACT:
        return math.sqrt(partial_sum_variance(spec.model, spec.q, n))
    if spec.regime is Regime.BREUER_MAJOR:
        return math.sqrt(breuer_major_sigma2(spec.model, spec.q) * n)
    if n < 2:
        raise ValueError("critical normalizer needs n >= 2")
    return math.sqrt(critical_variance_constant(spec.q) * n * math.log(n))


def _toeplitz_apply(model: CovarianceModel, v: np.ndarray, workers: int = 1) -> np.ndarray:
    """``(R v)_k = sum_l rho(k - l) v_l`` along the last axis, by circulant FFT."""
    L = v.shape[-1]
    m = 1 << (2 * L - 1).bit_length()
    half = model.rho(np.arange(L))
    col = np.zeros(m)
    col[:L] = half
    col[m - L + 1 :] = half[:0:-1]
    fc = scipy.fft.rfft(col)
    fv = scipy.fft.rfft(v, n=m, axis=-1, workers=workers)
    return scipy.fft.irfft(fc * fv, n=m, axis=-1, workers=workers)[..., :L]


def carre_du_champ(
    path: PathLike,
    q: int,
    n1: int,
    n2: int,
    model: CovarianceModel,
    g: float,
    workers: int = 1,
    chunk: int = 128,
):
    """Pathwise ``Gamma = (1/q) ||D X||^2 / g^2`` for the block ``[n1, n2)``.

    ``Gamma = q sum_{k,l} H_{q-1}(Z_k) H_{q-1}(Z_l) rho(k-l) / g^2``, computed
    exactly through a circulant-embedded Toeplitz product (O(L log L) per path).
    Its expectation is ``E[X^2] / g^2``.
    """
    if g <= 0:
        raise ValueError("normalizer must be positive")
    z = _values(path)
    _check_range(z.shape[-1], n1, n2)
    block = z[..., n1:n2]
    if q == 1:
        val = float(np.sum(_toeplitz_apply(model, np.ones(n2 - n1)))) / g**2
        return np.full(block.shape[:-1], val) if block.ndim > 1 else val
    flat = block.reshape(-1, n2 - n1)
    out = np.empty(flat.shape[0])
    for s in range(0, flat.shape[0], chunk):
        h = hermite_eval(q - 1, flat[s : s + chunk])
        rh = _toeplitz_apply(model, h, workers)
        out[s : s + chunk] = q * np.einsum("ij,ij->i", h, rh) / g**2
    out = out.reshape(block.shape[:-1])
    return out if out.ndim else float(out)


def carre_du_champ_direct(
    path: PathLike,
    q: int,
    n1: int,
    n2: int,
    model: CovarianceModel,
    g: float,
    cap: int = DIRECT_CAP,
    band: int | None = None,
):
    """Explicit double sum for ``Gamma``; optional band ``|k - l| <= band``.

    Returns ``(value, truncation_bound)``.  The bound is zero without a band and
    otherwise ``q max|H_{q-1}|^2 * sum_{|r|>band} (L - |r|)|rho(r)| / g^2``.

    Raises
    ------
    CostCapError
        If ``n2 - n1 > cap`` and no band is requested.
    """
    z = _values(path)
    _check_range(z.shape[-1], n1, n2)
    L = n2 - n1
    if band is None and L > cap:
        raise CostCapError(f"block length {L} exceeds the direct-sum cap {cap}; pass a band")
    lags = np.subtract.outer(np.arange(L), np.arange(L))
    R = model.rho(lags)
    bound = 0.0
    h = hermite_eval(q - 1, z[..., n1:n2])
    if band is not None:
        outside = np.abs(lags) > band
        r = np.arange(band + 1, L)
        hmax = np.max(np.abs(h)) if np.ndim(h) else abs(h)
        bound = q * hmax**2 * 2.0 * float(np.sum((L - r) * np.abs(model.rho(r)))) / g**2
        R = np.where(outside, 0.0, R)
    val = q * np.einsum("...i,ij,...j->...", h, R, h) / g**2
    return (val if np.ndim(val) else float(val)), bound


def block_stein_matrix(
    path: PathLike,
    q: int,
    blocks: list[tuple[int, int]],
    model: CovarianceModel,
    gs: list[float],
    workers: int = 1,
    chunk: int = 64,
) -> np.ndarray:
    """Integrands ``A_ij = q <h_i, R h_j> / (g_i g_j)`` for every pair of blocks.

    ``h_i`` is ``H_{q-1}(Z)`` restricted to block ``i`` and zero elsewhere;
    ``R`` is the Toeplitz covariance over the window spanning all blocks.
    Output shape is ``(..., d, d)``.
    """
    z = _values(path)
    lo = min(a for a, _ in blocks)
    hi = max(b for _, b in blocks)
    for a, b in blocks:
        _check_range(z.shape[-1], a, b)
    window = z[..., lo:hi].reshape(-1, hi - lo)
    d = len(blocks)
    gs = np.asarray(gs, dtype=float)
    out = np.empty((window.shape[0], d, d))
    for s in range(0, window.shape[0], chunk):
        w = window[s : s + chunk]
        h_all = hermite_eval(q - 1, w) if q > 1 else np.ones_like(w)
        V = np.zeros((w.shape[0], d, hi - lo))
        for i, (a, b) in enumerate(blocks):
            V[:, i, a - lo : b - lo] = h_all[:, a - lo : b - lo]
        RV = _toeplitz_apply(model, V, workers)
        out[s : s + chunk] = q * np.einsum("rik,rjk->rij", V, RV) / np.outer(gs, gs)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return out.reshape(z.shape[:-1] + (d, d))


@dataclass(frozen=True)
class BlockingSubsequence:
    """Indices ``n_i = floor(q_ratio ** ((m + i) ** (1 + alpha)))``, ``i = 1..2d``."""

    q_ratio: float
    alpha: float
    m: int
    d: int
    indices: tuple

    @property
    def blocks(self) -> list[tuple[int, int]]:
        ix = self.indices
        return [(ix[2 * i], ix[2 * i + 1]) for i in range(self.d)]

    @property
    def lengths(self) -> list[int]:
        return [b - a for a, b in self.blocks]


def blocking_subsequence(q_ratio: float, alpha: float, m: int, d: int) -> BlockingSubsequence:
    """Blocking indices, evaluated in 50-digit decimal arithmetic before flooring.

    Raises
    ------
    OverflowError
        If some ``(m+i)^{1+alpha} log(q_ratio)`` exceeds ``62 log 2``.
    ValueError
        On invalid parameters, or if flooring makes two indices coincide.
    """
    if not q_ratio > 1 or not alpha > 0 or m < 1 or d < 1:
        raise ValueError("need q_ratio > 1, alpha > 0, m >= 1, d >= 1")
    top = (m + 2 * d) ** (1 + alpha) * math.log(q_ratio)
    if top > 62 * math.log(2):
        raise OverflowError(f"index exponent {top:.3f} exceeds 62 log 2; largest index needs > 62 bits")
    with localcontext() as ctx:
        ctx.prec = 50
        base = Decimal(repr(float(q_ratio)))
        power = Decimal(1) + Decimal(repr(float(alpha)))
        idx = tuple(int((base ** (Decimal(m + i) ** power)).to_integral_value(rounding="ROUND_FLOOR"))
                    for i in range(1, 2 * d + 1))
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValueError(f"blocking indices {idx} are not strictly increasing; increase m or q_ratio")
    return BlockingSubsequence(float(q_ratio), float(alpha), int(m), int(d), idx)


def increment_vector(path: PathLike, sub: BlockingSubsequence, spec: VariationSpec) -> np.ndarray:
    """Normalised block increments ``Y_i = (X_{n_{2i}} - X_{n_{2i-1}}) / g(n_{2i} - n_{2i-1})``.

    Returns shape ``(d,)`` for one path and ``(M, d)`` for an ensemble.
    """
    z = _values(path)
    if z.shape[-1] < sub.indices[-1]:
        raise ValueError(f"path length {z.shape[-1]} shorter than n_2d = {sub.indices[-1]}")
    cols = [
        np.asarray(variation_statistic(z, spec.q, a, b)) / normalizer(spec, b - a)
        for a, b in sub.blocks
    ]
    return np.stack(cols, axis=-1)
