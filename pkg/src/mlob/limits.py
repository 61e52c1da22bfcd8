"""Diffusion limit of the discrete wealth equation under a vanishing spread.

Price and inventory are correlated Itô processes with constant coefficients,
simulated by Euler-Maruyama. On a grid of step dt the quoted spread is
``s * sqrt(dt)``, so the accumulated half-spread term converges to
``s * l / sqrt(2π)`` per unit time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import GrowthViolation, InvalidParams

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DiffusionParams:
    mu: float = 0.0
    sigma: float = 1.0
    b: float = 0.0
    l: float = 1.0
    rho: float = -0.5
    s: float = 1.0
    p0: float = 100.0
    L0: float = 0.0
    T: float = 1.0

    def validate(self) -> None:
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidParams(f"rho={self.rho} outside [-1, 1]")
        if self.sigma < 0 or self.l < 0:
            raise InvalidParams("sigma and l must be non-negative")
        if self.T <= 0:
            raise InvalidParams("T must be positive")


@dataclass(frozen=True, eq=False)
class DiffusionPair:
    """Paths on t_n = n·T/N, n = 0..N."""

    params: DiffusionParams
    p: np.ndarray
    L: np.ndarray

    @property
    def N(self) -> int:
        return len(self.p) - 1

    @property
    def dt(self) -> float:
        return self.params.T / self.N

    @property
    def spread(self) -> float:
        """Quoted spread on this grid."""
        return self.params.s * math.sqrt(self.dt)

    def subsample(self, every: int) -> "DiffusionPair":
        if self.N % every:
            raise InvalidParams(f"grid of {self.N} steps is not divisible by {every}")
        return DiffusionPair(self.params, self.p[::every], self.L[::every])


def _increments(params: DiffusionParams, N: int, rng: np.random.Generator):
    dt = params.T / N
    z1 = rng.standard_normal(N)
    z2 = rng.standard_normal(N)
    dw = math.sqrt(dt) * z1
    dw2 = math.sqrt(dt) * (params.rho * z1 + math.sqrt(max(0.0, 1.0 - params.rho**2)) * z2)
    return params.mu * dt + params.sigma * dw, params.b * dt + params.l * dw2


def simulate_pair(params: DiffusionParams, N: int, seed=None) -> DiffusionPair:
    params.validate()
    if N < 2:
        raise InvalidParams("need N >= 2")
    rng = np.random.default_rng(seed)
    dp, dl = _increments(params, N, rng)
    p = np.concatenate(([params.p0], params.p0 + np.cumsum(dp)))
    L = np.concatenate(([params.L0], params.L0 + np.cumsum(dl)))
    return DiffusionPair(params, p, L)


def discrete_wealth(pair: DiffusionPair, taker: bool = False, spread: float | None = None) -> np.ndarray:
    """X^N path from the discrete clearing equation, X_0 = L_0 p_0.

    The provider captures (s/2)|ΔL| per step; ``taker=True`` pays it.
    ``spread`` overrides the grid spread (negative values are allowed).
    """
    s = pair.spread if spread is None else spread
    dp = np.diff(pair.p)
    dl = np.diff(pair.L)
    sign = -1.0 if taker else 1.0
    dx = pair.L[:-1] * dp + sign * 0.5 * s * np.abs(dl) + dp * dl
    return pair.L[0] * pair.p[0] + np.concatenate(([0.0], np.cumsum(dx)))


def continuous_wealth(pair: DiffusionPair, taker: bool | None = None) -> float:
    """X_T = X_0 + ∫ L dp + ∫ (ρσ ± s/√(2π)) l dt, evaluated on the pair's grid.

    The spread enters with '+' for a liquidity provider (ρ < 0) and '-' for
    a taker (ρ >= 0, including the market-order case ρ = 0) unless ``taker``
    is given explicitly.
    """
    prm = pair.params
    if taker is None:
        taker = prm.rho >= 0
    sign = -1.0 if taker else 1.0
    ito = float(np.sum(pair.L[:-1] * np.diff(pair.p)))
    drift = (prm.rho * prm.sigma + sign * prm.s * INV_SQRT_2PI) * prm.l
    return pair.L[0] * pair.p[0] + ito + drift * prm.T


def _check_growth(F: Callable[[np.ndarray], np.ndarray]) -> None:
    probes = np.array([10.0, 1e2, 1e3, 1e4])
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.abs(np.concatenate((F(probes), F(-probes)))) / (1.0 + np.tile(probes, 2) ** 2)
    if not np.all(np.isfinite(vals)):
        raise GrowthViolation("F is not finite on the growth probes")
    lo = max(vals[0], vals[4])
    hi = max(vals[3], vals[7])
    if hi > 2.0 * lo + 1e-12:
        raise GrowthViolation("F grows faster than y^2")


def gaussian_expectation(F: Callable, sigma: float) -> float:
    """∫ F(y) φ_{σ²}(y) dy by adaptive quadrature."""
    if sigma == 0:
        return float(F(np.array([0.0]))[0])
    dens = lambda y: float(F(np.array([y]))[0]) * math.exp(-0.5 * (y / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    left, _ = integrate.quad(dens, -np.inf, 0.0, limit=200)
    right, _ = integrate.quad(dens, 0.0, np.inf, limit=200)
    return left + right


@dataclass(frozen=True)
class LLNResult:
    discrete: float
    limit: float

    @property
    def error(self) -> float:
        return abs(self.discrete - self.limit)

    @property
    def relative_error(self) -> float:
        return self.error / abs(self.limit) if self.limit else float("inf")


def verify_lln(F: Callable, sigma_y: float, N: int, T: float = 1.0, seed=None) -> LLNResult:
    """(1/N) Σ F(√N ΔY) against T·∫F φ_{σ²} for Brownian Y with volatility σ_Y.

    F is vectorised over numpy arrays. Functions with super-quadratic growth
    are rejected; |y| is admitted even though it fails y² domination at 0.
    """
    _check_growth(F)
    if N < 1:
        raise InvalidParams("N must be positive")
    rng = np.random.default_rng(seed)
    scaled = sigma_y * math.sqrt(T) * rng.standard_normal(N)  # √N ΔY on a grid of T/N
    discrete = float(np.sum(F(scaled / math.sqrt(T)))) * T / N
    return LLNResult(discrete, T * gaussian_expectation(F, sigma_y))


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    median_error: float
    q25: float
    q75: float


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: tuple[ConvergenceRow, ...]
    rate: float  # minus the log-log slope of median error against N


def loglog_rate(ns: Sequence[float], errors: Sequence[float]) -> float:
    slope = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(errors, float)), 1)[0]
    return float(-slope)


def convergence_study(
    params: DiffusionParams,
    ns: Sequence[int],
    replications: int = 100,
    seed: int = 0,
    refine: int = 10,
) -> ConvergenceStudy:
    """Median |X^N_T - X_T| per N.

    Each replication simulates one fine path with ``refine * max(ns)`` steps;
    X_T is the continuous formula on that path and every X^N is computed
    from its subsample, so all errors refer to the same Brownian path.
    """
    params.validate()
    ns = sorted(int(n) for n in ns)
    fine = refine * ns[-1]
    for n in ns:
        if fine % n:
            raise InvalidParams(f"N={n} does not divide the fine grid {fine}")
    children = np.random.SeedSequence(seed).spawn(replications)
    errs = np.empty((replications, len(ns)))
    for r, ss in enumerate(children):
        path = simulate_pair(params, fine, np.random.default_rng(ss))
        x_ref = continuous_wealth(path, taker=False)
        for j, n in enumerate(ns):
            errs[r, j] = abs(discrete_wealth(path.subsample(fine // n))[-1] - x_ref)
    med = np.median(errs, axis=0)
    q25, q75 = np.quantile(errs, [0.25, 0.75], axis=0)
    rows = tuple(ConvergenceRow(n, float(m), float(a), float(b))
                 for n, m, a, b in zip(ns, med, q25, q75))
    rate = loglog_rate(ns, med) if np.all(med > 0) else float("nan")
    return ConvergenceStudy(rows, rate)


def write_convergence_csv(out: IO[str], study: ConvergenceStudy) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("N", "median_error", "q25", "q75"))
    for r in study.rows:
        w.writerow((r.N, f"{r.median_error:.6e}", f"{r.q25:.6e}", f"{r.q75:.6e}"))
