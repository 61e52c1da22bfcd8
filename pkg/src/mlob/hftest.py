"""Bucketed test for the sign of the price/inventory covariation.

For increments Δp, ΔL on a bucket of M increments::

    C = Σ_{n=1}^{M}   Δ_n p Δ_n L
    V = N Σ_{n=1}^{M-1} [(Δ_n p Δ_{n+1} L)^2 + Δ_n p Δ_n L Δ_{n+1} p Δ_{n+1} L]
    Z = C / sqrt(V / N)

N is the number of observation points of the whole series (increments + 1);
it cancels in Z. The rejection probability of "covariation is positive
somewhere" in a bucket is Φ(-Z); buckets multiply.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import BucketTooSmall, DegenerateVariance, InputError, ZeroVariance
from .tape.trades import TradeTape
from .units import HALF_SCALE

MIN_BUCKET = 3


@dataclass(frozen=True)
class BucketStat:
    C: float
    V: float
    n_increments: int
    N: int


@dataclass(frozen=True)
class BucketTestResult:
    bucket: int
    C: float
    V: float
    Z: float | None
    pi: float | None

    @property
    def degenerate(self) -> bool:
        return self.pi is None


@dataclass(frozen=True)
class AdverseSelectionTest:
    buckets: tuple[BucketTestResult, ...]
    overall: float

    @property
    def excluded(self) -> tuple[int, ...]:
        return tuple(b.bucket for b in self.buckets if b.degenerate)


def tape_increments(tape: TradeTape) -> tuple[np.ndarray, np.ndarray]:
    """(Δp in currency, passive ΔL in shares) on the trade clock."""
    return tape.dp2 / HALF_SCALE, tape.dl_passive.astype(float)


def bucket_bounds(n: int, buckets: int) -> list[tuple[int, int]]:
    """Equal-count partition of n increments; the remainder joins the last bucket."""
    if buckets < 1:
        raise InputError("need at least one bucket")
    size = n // buckets
    bounds = [(k * size, (k + 1) * size) for k in range(buckets)]
    bounds[-1] = (bounds[-1][0], n)
    return bounds


def bucket_stats(dp, dl, buckets: int = 8, variant: str = "printed") -> list[BucketStat]:
    """C and V per bucket.

    ``variant="symmetric"`` swaps the first summand for (Δ_n p Δ_n L)^2.
    """
    dp = np.asarray(dp, dtype=float)
    dl = np.asarray(dl, dtype=float)
    if dp.shape != dl.shape or dp.ndim != 1:
        raise InputError("Δp and ΔL must be 1-d arrays of equal length")
    if variant not in ("printed", "symmetric"):
        raise InputError(f"unknown variance variant {variant!r}")
    N = len(dp) + 1
    out = []
    for k, (lo, hi) in enumerate(bucket_bounds(len(dp), buckets)):
        if hi - lo < MIN_BUCKET:
            raise BucketTooSmall(f"bucket {k} has {hi - lo} increments, need {MIN_BUCKET}")
        p, q = dp[lo:hi], dl[lo:hi]
        prod = p * q
        first = (p[:-1] * q[1:]) ** 2 if variant == "printed" else prod[:-1] ** 2
        S = float(np.sum(first + prod[:-1] * prod[1:]))
        out.append(BucketStat(C=float(prod.sum()), V=N * S, n_increments=hi - lo, N=N))
    return out


def rejection_probabilities(stats: Sequence[BucketStat]) -> AdverseSelectionTest:
    """π_k = Φ(-Z_k); overall = Π π_k over buckets with V_k > 0.

    Raises DegenerateVariance only when every bucket is degenerate.
    """
    results = []
    for k, b in enumerate(stats):
        if b.V <= 0:
            results.append(BucketTestResult(k, b.C, b.V, None, None))
            continue
        z = b.C / math.sqrt(b.V / b.N)
        results.append(BucketTestResult(k, b.C, b.V, z, float(ndtr(-z))))
    good = [r.pi for r in results if r.pi is not None]
    if not good:
        raise DegenerateVariance("all buckets have non-positive variance estimates")
    return AdverseSelectionTest(tuple(results), math.prod(good))


def adverse_selection_test(dp, dl, buckets: int = 8, variant: str = "printed") -> AdverseSelectionTest:
    return rejection_probabilities(bucket_stats(dp, dl, buckets, variant))


def z_statistics(dp, dl) -> np.ndarray:
    """Single-bucket Z for a batch of series, rows = replications."""
    dp = np.atleast_2d(np.asarray(dp, dtype=float))
    dl = np.atleast_2d(np.asarray(dl, dtype=float))
    prod = dp * dl
    C = prod.sum(axis=1)
    S = np.sum((dp[:, :-1] * dl[:, 1:]) ** 2 + prod[:, :-1] * prod[:, 1:], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(S > 0, C / np.sqrt(np.where(S > 0, S, 1.0)), np.nan)


def sample_correlation(dp, dl) -> float:
    dp = np.asarray(dp, dtype=float)
    dl = np.asarray(dl, dtype=float)
    if len(dp) < 2 or np.std(dp) == 0 or np.std(dl) == 0:
        raise ZeroVariance("correlation undefined: an increment series is constant")
    return float(np.corrcoef(dp, dl)[0, 1])


def write_buckets_csv(out: IO[str], test: AdverseSelectionTest) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("bucket", "C", "V", "Z", "pi"))
    for b in test.buckets:
        w.writerow((b.bucket, f"{b.C:.6g}", f"{b.V:.6g}",
                    "NA" if b.Z is None else f"{b.Z:.5f}",
                    "NA" if b.pi is None else f"{b.pi:.5f}"))
