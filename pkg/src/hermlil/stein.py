"""Stein factors and Stein matrices.

Covers closed-form and quadrature Stein factors of densities, the i.i.d.
aggregate factor, Monte Carlo moments of Hermite-chaos Stein matrices, and a
generic check of the Stein identity ``E[F_i g(F)] = sum_j E[tau_ij d_j g(F)]``
against a fixed dictionary of polynomial test functions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .hermite import (
    BlockingSubsequence,
    VariationSpec,
    block_stein_matrix,
    normalizer,
)
from .sampler import PathEnsemble

__all__ = [
    "DensityError",
    "DensitySpec",
    "standard_normal_density",
    "uniform_density",
    "laplace_density",
    "stein_factor_density",
    "iid_stein_aggregate",
    "SteinMomentReport",
    "stein_matrix_moments_hermite",
    "TestFunction",
    "polynomial_dictionary",
    "stein_identity_residual",
    "theta_norm_estimate",
    "rademacher_smoothed",
]

_UNDERFLOW = 1e-300


class DensityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DensitySpec:
    """A centred, unit-variance density supported on the interval ``support``.

    ``stein_factor`` optionally supplies ``s(x)`` in closed form; it is used to
    vectorise aggregates and is checked against quadrature in the tests.
    """

    name: str
    pdf: Callable[[float], float]
    support: tuple[float, float]
    stein_factor: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def moments(self) -> tuple[float, float, float]:
        a, b = self.support
        m0 = integrate.quad(self.pdf, a, b, epsabs=1e-13, epsrel=1e-12)[0]
        m1 = integrate.quad(lambda y: y * self.pdf(y), a, b, epsabs=1e-13, epsrel=1e-12)[0]
        m2 = integrate.quad(lambda y: y * y * self.pdf(y), a, b, epsabs=1e-13, epsrel=1e-12)[0]
        return m0, m1, m2

    def validate(self, tol: float = 1e-8) -> None:
        m0, m1, m2 = self.moments()
        if abs(m0 - 1) > tol or abs(m1) > tol or abs(m2 - 1) > tol:
            raise DensityError(f"{self.name}: moments (1, 0, 1) violated: {m0}, {m1}, {m2}")

    def contains(self, x: float) -> bool:
        a, b = self.support
        return a <= x <= b


_SQ3 = math.sqrt(3.0)
_LAPLACE_B = 1 / math.sqrt(2.0)


def standard_normal_density() -> DensitySpec:
    return DensitySpec(
        "normal",
        lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi),
        (-math.inf, math.inf),
        lambda x: np.ones_like(np.asarray(x, dtype=float)),
    )


def uniform_density() -> DensitySpec:
    def s(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= _SQ3, (3.0 - x * x) / 2.0, 0.0)

    return DensitySpec("uniform", lambda x: 1 / (2 * _SQ3) if abs(x) <= _SQ3 else 0.0, (-_SQ3, _SQ3), s)


def laplace_density() -> DensitySpec:
    b = _LAPLACE_B

    def s(x):
        x = np.abs(np.asarray(x, dtype=float))
        return b * (x + b)

    return DensitySpec("laplace", lambda x: math.exp(-abs(x) / b) / (2 * b), (-math.inf, math.inf), s)


def _effective_support(density: DensitySpec) -> tuple[float, float]:
    """Finite integration range where ``|y| f(y)`` drops below 1e-16 of its peak."""
    a, b = density.support
    if math.isfinite(a) and math.isfinite(b):
        return a, b
    g = lambda y: abs(y) * density.pdf(y)
    peak = max(g(y) for y in np.linspace(max(a, -10), min(b, 10), 201))
    lo, hi = a, b
    if not math.isfinite(b):
        hi = 1.0
        while g(hi) > 1e-16 * peak:
            hi *= 1.5
    if not math.isfinite(a):
        lo = -1.0
        while g(lo) > 1e-16 * peak:
            lo *= 1.5
    return lo, hi


def stein_factor_density(density: DensitySpec, x: float) -> float:
    """``s(x) = int_x^inf y f(y) dy / f(x)`` inside the support, 0 outside.

    The shorter tail is integrated: for ``x < 0`` the centring of ``f`` gives
    ``int_x^inf y f = -int_-inf^x y f``.

    Raises
    ------
    DensityError
        If ``f(x)`` underflows at a point inside the support.
    """
    if not density.contains(x):
        return 0.0
    fx = density.pdf(x)
    if fx < _UNDERFLOW:
        raise DensityError(f"density underflows at x={x} inside the support")
    lo, hi = _effective_support(density)
    yf = lambda y: y * density.pdf(y)
    if x >= 0:
        num = integrate.quad(yf, x, max(hi, x), epsabs=0, epsrel=1e-11, limit=200)[0]
    else:
        num = -integrate.quad(yf, min(lo, x), x, epsabs=0, epsrel=1e-11, limit=200)[0]
    return max(num, 0.0) / fx


def _stein_values(density: DensitySpec, z: np.ndarray) -> np.ndarray:
    if density.stein_factor is not None:
        return np.asarray(density.stein_factor(z), dtype=float)
    return np.vectorize(lambda v: stein_factor_density(density, float(v)))(z)


def iid_stein_aggregate(draws, density: DensitySpec, n1: int, n2: int):
    """``tau = (n2 - n1)^{-1} sum_{k=n1}^{n2-1} s(Z_k)``; rows are replicates."""
    z = np.asarray(draws, dtype=float)
    if not 0 <= n1 < n2 <= z.shape[-1]:
        raise IndexError(f"need 0 <= n1 < n2 <= {z.shape[-1]}")
    tau = _stein_values(density, z[..., n1:n2]).mean(axis=-1)
    return tau if np.ndim(tau) else float(tau)


@dataclass
class SteinMomentReport:
    """Monte Carlo second moments of Stein-matrix integrands.

    ``second_moments[i, j]`` estimates ``E[(A_ij - delta_ij)^2]``; ``theta_norms``
    maps a moment order to the estimates of ``||A_ii - 1||_theta``.
    """

    d: int
    theta: float
    second_moments: np.ndarray
    std_errors: np.ndarray
    n_samples: int
    theta_norms: dict = field(default_factory=dict)
    block_lengths: tuple = ()

    @property
    def diag_second_moments(self) -> np.ndarray:
        return np.diag(self.second_moments).copy()

    @property
    def offdiag_second_moments(self) -> np.ndarray:
        return self.second_moments[~np.eye(self.d, dtype=bool)]

    def moment_sum(self) -> float:
        return float(self.second_moments.sum())

    def to_records(self) -> list[dict]:
        return [
            {
                "i": i,
                "j": j,
                "estimate": float(self.second_moments[i, j]),
                "std_error": float(self.std_errors[i, j]),
                "n_samples": int(self.n_samples),
            }
            for i in range(self.d)
            for j in range(self.d)
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_records(), indent=2)


def stein_matrix_moments_hermite(
    ensemble: PathEnsemble | np.ndarray,
    sub: BlockingSubsequence,
    spec: VariationSpec,
    thetas: tuple = (2.0,),
    workers: int = 1,
) -> SteinMomentReport:
    """Moments of ``A_ij = (1/q) <DY_i, DY_j>`` for the blocking increment vector.

    The Stein matrix of a chaos vector is ``E[A | Y]``; by Jensen, every second
    moment reported here bounds the corresponding Stein-matrix moment from
    above.  No conditional expectation is estimated.
    """
    z = ensemble.values if isinstance(ensemble, PathEnsemble) else np.asarray(ensemble)
    if z.ndim != 2:
        raise ValueError("expected an ensemble of shape (M, n)")
    if z.shape[1] < sub.indices[-1]:
        raise ValueError(f"paths of length {z.shape[1]} are shorter than n_2d = {sub.indices[-1]}")
    gs = [normalizer(spec, L) for L in sub.lengths]
    A = block_stein_matrix(z, spec.q, sub.blocks, spec.model, gs, workers=workers)
    dev = A - np.eye(sub.d)
    sq = dev**2
    M = z.shape[0]
    mean = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(M) if M > 1 else np.full_like(mean, np.inf)
    diag = np.diagonal(dev, axis1=-2, axis2=-1)
    norms = {float(t): [theta_norm_estimate(diag[:, i], t) for i in range(sub.d)] for t in thetas}
    return SteinMomentReport(sub.d, float(max(thetas)), mean, se, M, norms, tuple(sub.lengths))


@dataclass(frozen=True)
class TestFunction:
    """Polynomial test function: ``x_j``, ``x_j^2``, ``x_j x_k`` or ``x_j^3``."""

    __test__ = False  # not a pytest class

    kind: str
    j: int
    k: int = -1

    def __post_init__(self):
        if self.kind not in ("x", "x2", "xx", "x3"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.kind == "xx" and (self.k < 0 or self.k == self.j):
            raise ValueError("x_j x_k needs two distinct indices")

    def __str__(self) -> str:
        j, k = self.j + 1, self.k + 1
        return {"x": f"x{j}", "x2": f"x{j}^2", "xx": f"x{j}*x{k}", "x3": f"x{j}^3"}[self.kind]

    def value(self, F: np.ndarray) -> np.ndarray:
        xj = F[:, self.j]
        if self.kind == "x":
            return xj
        if self.kind == "x2":
            return xj**2
        if self.kind == "x3":
            return xj**3
        return xj * F[:, self.k]

    def gradient(self, F: np.ndarray) -> np.ndarray:
        out = np.zeros_like(F)
        xj = F[:, self.j]
        if self.kind == "x":
            out[:, self.j] = 1.0
        elif self.kind == "x2":
            out[:, self.j] = 2 * xj
        elif self.kind == "x3":
            out[:, self.j] = 3 * xj**2
        else:
            out[:, self.j] = F[:, self.k]
            out[:, self.k] = xj
        return out


def polynomial_dictionary(d: int) -> list[TestFunction]:
    """All dictionary functions in dimension ``d``."""
    out = []
    for j in range(d):
        out += [TestFunction("x", j), TestFunction("x2", j), TestFunction("x3", j)]
    out += [TestFunction("xx", j, k) for j in range(d) for k in range(j + 1, d)]
    return out



def stein_identity_residual(F, tau, testfn: TestFunction):
    """Monte Carlo ``E[F_i g(F)] - sum_j E[tau_ij d_j g(F)]`` for every ``i``.

    ``F`` has shape ``(N, d)`` (or ``(N,)``), ``tau`` shape ``(N, d, d)`` (or
    ``(N,)`` in one dimension).  Returns ``(residual, std_error)``, each of
    length ``d``.
    """
    F = np.asarray(F, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    N, d = F.shape
    if tau.ndim == 1:
        tau = tau[:, None, None]
    if tau.shape != (N, d, d):
        raise ValueError(f"tau shape {tau.shape} does not match samples {F.shape}")
    if N < 2:
        raise ValueError("need at least two samples")
    g = testfn.value(F)
    grad = testfn.gradient(F)
    terms = F * g[:, None] - np.einsum("nij,nj->ni", tau, grad)
    return terms.mean(axis=0), terms.std(axis=0, ddof=1) / math.sqrt(N)


def theta_norm_estimate(tau, theta: float) -> float:
    """Empirical ``(mean |tau - 1|^theta)^(1/theta)``."""
    if theta < 1:
        raise ValueError("theta must be >= 1")
    t = np.asarray(tau, dtype=float)
    if t.size == 0:
        raise ValueError("no samples")
    return float(np.mean(np.abs(t - 1.0) ** theta) ** (1.0 / theta))


def rademacher_smoothed(n: int, N: int, rng: np.random.Generator):
    """Samples of ``F = (S_n + U) / sqrt(n)`` and its Stein factor integrand.

    ``S_n`` is a Rademacher sum and ``U`` an independent uniform on ``[-1, 1]``;
    the integrand is ``(n - S_n U + (1 - U^2)/2) / n``.
    """
    S = 2.0 * rng.binomial(n, 0.5, size=N) - n
    U = rng.uniform(-1.0, 1.0, size=N)
    F = (S + U) / math.sqrt(n)
    tau = (n - S * U + (1.0 - U * U) / 2.0) / n
    return F, tau
