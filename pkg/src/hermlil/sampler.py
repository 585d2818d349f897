"""Exact simulation of stationary Gaussian sequences by circulant embedding.

Every replicate draws its normals from its own Philox stream keyed by
``(seed, replicate)``, so a path is a pure function of the plan, the seed and
the replicate index.  Replicates can be generated in any order, or in
parallel, and always give the same bits.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.fft

from .covariance import CovarianceModel

__all__ = [
    "EmbeddingError",
    "SamplerPlan",
    "GaussianPath",
    "PathEnsemble",
    "CLIP_TOL",
    "replicate_rng",
    "build_plan",
    "sample_path",
    "sample_ensemble",
    "write_paths_csv",
    "read_paths_csv",
]

CLIP_TOL = 1e-10
_U64 = (1 << 64) - 1

# Philox counter word 3 separates independent uses of one (seed, replicate) key.
STREAM_PATH = 0
STREAM_GAUSSIAN_REFERENCE = 1
STREAM_AUX = 2


class EmbeddingError(ArithmeticError):
    """The circulant embedding has a genuinely negative eigenvalue."""

    def __init__(self, min_eigenvalue: float, embedding_size: int):
        self.min_eigenvalue = min_eigenvalue
        self.embedding_size = embedding_size
        super().__init__(
            f"circulant embedding of size {embedding_size} is not nonnegative "
            f"(most negative eigenvalue {min_eigenvalue:.3e})"
        )


def replicate_rng(seed: int, replicate: int, stream: int = STREAM_PATH) -> np.random.Generator:
    """Counter-based generator for one ``(seed, replicate)`` pair."""
    key = [int(seed) & _U64, int(replicate) & _U64]
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, int(stream)]))


@dataclass(frozen=True)
class SamplerPlan:
    model: CovarianceModel
    n: int
    embedding_size: int
    eigenvalues: np.ndarray

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)


@dataclass(frozen=True)
class GaussianPath:
    values: np.ndarray
    model_name: str
    seed: int
    replicate: int

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PathEnsemble:
    """``M`` replicate paths stored row-wise in ``values`` (shape ``(M, n)``)."""

    values: np.ndarray
    model_name: str
    seed: int
    first_replicate: int = 0

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def path(self, i: int) -> GaussianPath:
        return GaussianPath(self.values[i], self.model_name, self.seed, self.first_replicate + i)

    def __iter__(self):
        return (self.path(i) for i in range(self.M))

    def __len__(self) -> int:
        return self.M


def _next_pow2(x: int) -> int:
    return 1 << max(int(x) - 1, 0).bit_length()


def _spectrum(model: CovarianceModel, m: int) -> np.ndarray:
    half = model.rho(np.arange(m // 2 + 1))
    row = np.concatenate([half, half[-2:0:-1]])
    return scipy.fft.rfft(row).real


def build_plan(model: CovarianceModel, n: int, embedding_size: Optional[int] = None) -> SamplerPlan:
    """Circulant embedding spectrum for paths of length ``n``.

    The embedding size defaults to the smallest power of two ``>= 2(n-1)``
    (at least 2) and is doubled once if that spectrum has a negative
    eigenvalue below ``-CLIP_TOL * max``.  Smaller negative eigenvalues are
    rounding noise and are set to zero.

    Raises
    ------
    EmbeddingError
        If the spectrum is still negative after the retry.
    """
    n = int(n)
    if n < 1:
        raise ValueError("path length must be >= 1")
    m = _next_pow2(max(2 * (n - 1), 2)) if embedding_size is None else int(embedding_size)
    if m < 2 * (n - 1) or m % 2:
        raise ValueError(f"embedding size {m} too small or odd for n={n}")
    attempts = 2 if embedding_size is None else 1
    for attempt in range(attempts):
        lam = _spectrum(model, m)
        lo, hi = lam.min(), lam.max()
        if lo >= -CLIP_TOL * hi:
            lam = np.where(lam < 0, 0.0, lam)
            return SamplerPlan(model, n, m, lam)
        if attempt + 1 < attempts:
            m *= 2
    raise EmbeddingError(float(lo), m)


def _draw_normals(plan: SamplerPlan, seed: int, replicates: Iterable[int]) -> np.ndarray:
    m = plan.embedding_size
    rows = [replicate_rng(seed, r).standard_normal(2 * m) for r in replicates]
    return np.asarray(rows).reshape(-1, 2, m)


def _transform(plan: SamplerPlan, xi: np.ndarray, workers: int) -> np.ndarray:
    m = plan.embedding_size
    # rfft gives eigenvalues for j = 0..m/2; mirror to the full circle
    lam = np.concatenate([plan.eigenvalues, plan.eigenvalues[-2:0:-1]])
    w = np.sqrt(lam / m) * (xi[:, 0, :] + 1j * xi[:, 1, :])
    return scipy.fft.fft(w, axis=-1, workers=workers).real[:, : plan.n]


def sample_path(plan: SamplerPlan, seed: int, replicate: int = 0) -> GaussianPath:
    """One stationary path; bit-identical for identical ``(seed, replicate)``."""
    z = _transform(plan, _draw_normals(plan, seed, [replicate]), workers=1)[0]
    return GaussianPath(z, plan.model.name, int(seed), int(replicate))


def sample_ensemble(
    plan: SamplerPlan,
    seed: int,
    M: int,
    first_replicate: int = 0,
    workers: int = 1,
    chunk: int = 256,
) -> PathEnsemble:
    """Replicates ``first_replicate .. first_replicate + M - 1``.

    Row ``i`` equals ``sample_path(plan, seed, first_replicate + i)`` bit for bit.
    """
    if M < 1:
        raise ValueError("ensemble size must be >= 1")
    out = np.empty((M, plan.n))
    for start in range(0, M, chunk):
        stop = min(start + chunk, M)
        reps = range(first_replicate + start, first_replicate + stop)
        out[start:stop] = _transform(plan, _draw_normals(plan, seed, reps), workers)
    return PathEnsemble(out, plan.model.name, int(seed), int(first_replicate))


def write_paths_csv(path, paths: Iterable[GaussianPath]) -> None:
    """One row per path: ``seed,replicate,n,Z_0,...,Z_{n-1}``; floats round-trip exactly.

    ``path`` is a filename or an open text stream.
    """
    paths = list(paths)
    n = paths[0].n if paths else 0
    if hasattr(path, "write"):
        _write_rows(path, paths, n)
    else:
        with open(path, "w", newline="") as fh:
            _write_rows(fh, paths, n)


def _write_rows(fh, paths, n: int) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["seed", "replicate", "n"] + [f"Z_{k}" for k in range(n)])
    for p in paths:
        w.writerow([p.seed, p.replicate, p.n] + [repr(float(v)) for v in p.values])


def read_paths_csv(path, model_name: str = "csv") -> list[GaussianPath]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    out = []
    for row in rows[1:]:
        seed, rep, n = int(row[0]), int(row[1]), int(row[2])
        vals = np.array([float(v) for v in row[3 : 3 + n]])
        out.append(GaussianPath(vals, model_name, seed, rep))
    return out
