"""Black-Scholes pricing and hedging with spread and adverse-selection frictions.

With the spread proportional to price volatility, s_t = s·σ·p_t, the pricing
PDE is

    v_t + ½ σ² p² (√(2/π) s - 1) v_pp + r p v_p = r v,

i.e. Black-Scholes at the effective volatility σ·√(√(2/π) s - 1). The PDE is
backward-parabolic only when √(2/π) s > 1; below that it is refused.
The delta hedge trades with limit orders while gamma < 0 and with market
orders while gamma >= 0.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Protocol, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import ndtr

from .errors import GridTooCoarse, IllPosedRegime, InvalidParams
from .ledger import OrderKind

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
SPREAD_THRESHOLD = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class MarketSpec:
    sigma: float
    rate: float = 0.0
    spread_coef: float = math.sqrt(2.0 * math.pi)
    maturity: float = 1.0

    @property
    def friction_factor(self) -> float:
        """√(2/π)·s - 1, the multiplier on σ² in the pricing PDE."""
        return SQRT_2_OVER_PI * self.spread_coef - 1.0

    @property
    def well_posed(self) -> bool:
        # relative slack so s = sqrt(pi/2) is refused despite rounding
        return self.spread_coef > SPREAD_THRESHOLD * (1.0 + 1e-12)

    def validate(self) -> None:
        if self.sigma <= 0 or self.maturity <= 0:
            raise InvalidParams("sigma and maturity must be positive")
        if not self.well_posed:
            raise IllPosedRegime(
                f"spread coefficient {self.spread_coef:.6g} <= sqrt(pi/2) = {SPREAD_THRESHOLD:.6g}: "
                "the pricing PDE has a non-positive diffusion coefficient"
            )


def effective_volatility(spec: MarketSpec) -> float:
    spec.validate()
    return spec.sigma * math.sqrt(spec.friction_factor)


class PayoffKind(str, enum.Enum):
    CALL = "call"
    PUT = "put"
    FORWARD = "forward"  # pays p_T
    CONSTANT = "constant"  # pays `strike`


@dataclass(frozen=True)
class Payoff:
    kind: PayoffKind
    strike: float = 0.0
    quantity: float = 1.0  # negative for a short position

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        k = PayoffKind(self.kind)
        if k is PayoffKind.CALL:
            v = np.maximum(p - self.strike, 0.0)
        elif k is PayoffKind.PUT:
            v = np.maximum(self.strike - p, 0.0)
        elif k is PayoffKind.FORWARD:
            v = p
        else:
            v = np.full_like(p, self.strike)
        return self.quantity * v


def _bs(kind: PayoffKind, p, K, r, vol, tau):
    """Value, delta, gamma of a unit European call/put; tau > 0."""
    p = np.asarray(p, dtype=float)
    sq = vol * np.sqrt(tau)
    with np.errstate(divide="ignore"):
        d1 = (np.log(p / K) + (r + 0.5 * vol * vol) * tau) / sq
    d2 = d1 - sq
    disc = K * math.exp(-r * tau)
    pdf = np.exp(-0.5 * d1 * d1) / math.sqrt(2.0 * math.pi)
    gamma = np.where(p > 0, pdf / np.where(p > 0, p, 1.0) / sq, 0.0)
    if kind is PayoffKind.CALL:
        return p * ndtr(d1) - disc * ndtr(d2), ndtr(d1), gamma
    return disc * ndtr(-d2) - p * ndtr(-d1), ndtr(d1) - 1.0, gamma


def price_closed_form(spec: MarketSpec, kind, strike: float, spot: float, t: float = 0.0) -> float:
    """European price at the effective volatility."""
    vol = effective_volatility(spec)
    tau = spec.maturity - t
    kind = PayoffKind(kind)
    if tau <= 0:
        return float(Payoff(kind, strike)(spot))
    return float(ClosedFormValuer(spec, Payoff(kind, strike)).greeks(t, spot)[0])


class Valuer(Protocol):
    def greeks(self, t: float, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]: ...


@dataclass(frozen=True)
class ClosedFormValuer:
    """Exact value, delta and gamma for the payoffs in :class:`PayoffKind`."""

    spec: MarketSpec
    payoff: Payoff

    def greeks(self, t: float, p):
        spec, pay = self.spec, self.payoff
        vol = effective_volatility(spec)
        tau = spec.maturity - t
        p = np.asarray(p, dtype=float)
        q = pay.quantity
        kind = PayoffKind(pay.kind)
        if kind is PayoffKind.FORWARD:
            return q * p, np.full_like(p, q), np.zeros_like(p)
        if kind is PayoffKind.CONSTANT:
            return np.full_like(p, q * pay.strike * math.exp(-spec.rate * tau)), np.zeros_like(p), np.zeros_like(p)
        if tau <= 0:
            raise InvalidParams("greeks requested at or after maturity")
        v, d, g = _bs(kind, p, pay.strike, spec.rate, vol, tau)
        return q * v, q * d, q * g


@dataclass(frozen=True, eq=False)
class ValueSurface:
    """PDE solution on a uniform (t, p) grid; rows are time levels t ascending."""

    t: np.ndarray
    p: np.ndarray
    values: np.ndarray

    @cached_property
    def delta(self) -> np.ndarray:
        return np.gradient(self.values, self.p, axis=1, edge_order=2)

    @cached_property
    def gamma(self) -> np.ndarray:
        v, h = self.values, self.p[1] - self.p[0]
        g = np.empty_like(v)
        g[:, 1:-1] = (v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]) / h**2
        g[:, 0] = (2 * v[:, 0] - 5 * v[:, 1] + 4 * v[:, 2] - v[:, 3]) / h**2
        g[:, -1] = (2 * v[:, -1] - 5 * v[:, -2] + 4 * v[:, -3] - v[:, -4]) / h**2
        return g

    def greeks(self, t: float, p):
        j = int(np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2))
        w = (t - self.t[j]) / (self.t[j + 1] - self.t[j])
        delta, gamma = self.delta, self.gamma
        out = []
        for field in (self.values, delta, gamma):
            row = (1 - w) * field[j] + w * field[j + 1]
            out.append(np.interp(p, self.p, row))
        return tuple(out)


def solve_pde(
    spec: MarketSpec,
    payoff: Payoff,
    n_space: int = 400,
    n_time: int = 400,
    p_max: float | None = None,
    rannacher_steps: int = 2,
) -> ValueSurface:
    """Crank-Nicolson on p ∈ [0, p_max] with Rannacher start-up.

    Boundaries: at p = 0 the PDE reduces to v_t = r v (the payoff's own
    value discounted); at p_max the solution is extrapolated linearly in p.
    The first ``rannacher_steps`` steps are each taken as two implicit
    Euler half-steps to damp the payoff kink.
    """
    vol = effective_volatility(spec)
    if n_space < 200 or n_time < 10:
        raise GridTooCoarse(f"grid {n_space}x{n_time} below 200 space / 10 time nodes")
    if p_max is None:
        scale = max(payoff.strike, 1.0)
        p_max = scale * max(2.0, math.exp(5.0 * vol * math.sqrt(spec.maturity)))
    M = n_space - 1
    p = np.linspace(0.0, p_max, n_space)
    i = np.arange(M, dtype=float)  # nodes 0..M-1 are unknowns; node M is extrapolated
    a = 0.5 * vol**2 * i**2
    b = 0.5 * spec.rate * i
    lower, diag, upper = a - b, -2 * a - spec.rate, a + b
    # fold v_M = 2 v_{M-1} - v_{M-2} into the last row
    diag = diag.copy()
    lower = lower.copy()
    diag[-1] += 2 * upper[-1]
    lower[-1] -= upper[-1]
    upper = upper.copy()
    upper[-1] = 0.0

    def apply_L(v):
        out = diag * v
        out[1:] += lower[1:] * v[:-1]
        out[:-1] += upper[:-1] * v[1:]
        return out

    def step(v, dt, theta):
        ab = np.zeros((3, M))
        ab[0, 1:] = -theta * dt * upper[:-1]
        ab[1] = 1.0 - theta * dt * diag
        ab[2, :-1] = -theta * dt * lower[1:]
        rhs = v + (1.0 - theta) * dt * apply_L(v)
        return solve_banded((1, 1), ab, rhs)

    dt = spec.maturity / n_time
    values = np.empty((n_time + 1, n_space))
    v = payoff(p)[:M].astype(float)
    values[n_time] = payoff(p)
    for k in range(n_time):
        if k < rannacher_steps:
            v = step(step(v, dt / 2, 1.0), dt / 2, 1.0)
        else:
            v = step(v, dt, 0.5)
        row = values[n_time - k - 1]
        row[:M] = v
        row[M] = 2 * v[-1] - v[-2]
    return ValueSurface(np.linspace(0.0, spec.maturity, n_time + 1), p, values)


@dataclass(frozen=True, eq=False)
class HedgeSchedule:
    L: np.ndarray  # delta holdings
    l: np.ndarray  # σ p gamma
    order_kind: tuple[OrderKind, ...]


def hedge_schedule(valuer: Valuer, times: Sequence[float], path: Sequence[float], sigma: float) -> HedgeSchedule:
    """Delta holdings and order types along a price path."""
    delta = np.empty(len(times))
    gamma = np.empty(len(times))
    for k, (t, p) in enumerate(zip(times, path)):
        _, d, g = valuer.greeks(t, np.asarray([p]))
        delta[k], gamma[k] = d[0], g[0]
    l = sigma * np.asarray(path, dtype=float) * gamma
    kinds = tuple(OrderKind.LIMIT if x < 0 else OrderKind.MARKET for x in l)
    return HedgeSchedule(delta, l, kinds)


@dataclass(frozen=True, eq=False)
class ReplicationResult:
    errors: np.ndarray  # X_N - f(p_N) per path
    l: np.ndarray  # σ p gamma per (step, path)
    limit: np.ndarray  # order kind per (step, path): True for limit orders
    paths: np.ndarray  # (n_steps + 1, n_paths)

    @property
    def n_limit(self) -> int:
        return int(np.count_nonzero(self.limit))

    @property
    def n_market(self) -> int:
        return int(self.limit.size - self.n_limit)

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.errors**2)))


def replicate(
    spec: MarketSpec,
    payoff: Payoff,
    n_steps: int,
    n_paths: int = 200,
    seed=None,
    spot: float = 100.0,
    mu: float = 0.0,
    valuer: Valuer | None = None,
) -> ReplicationResult:
    """Discrete delta hedge on simulated GBM paths.

    Each step trades ΔL = L_{n+1} - L_n at the mid p_n, capturing (limit,
    gamma < 0) or paying (market, gamma >= 0) half of the spread
    s·σ·p_n·√dt; cash accrues at the rate r. Starts from X_0 = v(0, p_0)
    with K_0 = v - delta·p_0.
    """
    spec.validate()
    if n_steps < 1:
        raise InvalidParams("n_steps must be positive")
    valuer = valuer or ClosedFormValuer(spec, payoff)
    rng = np.random.default_rng(seed)
    dt = spec.maturity / n_steps
    z = rng.standard_normal((n_steps, n_paths))
    logret = (mu - 0.5 * spec.sigma**2) * dt + spec.sigma * math.sqrt(dt) * z
    p = spot * np.exp(np.vstack((np.zeros(n_paths), np.cumsum(logret, axis=0))))
    growth = math.exp(spec.rate * dt)

    v0, L, g = valuer.greeks(0.0, p[0])
    K = v0 - L * p[0]
    l_all = np.empty((n_steps, n_paths))
    for n in range(n_steps):
        t_next = (n + 1) * dt
        if n + 1 < n_steps:
            _, L_next, g_next = valuer.greeks(t_next, p[n + 1])
        else:
            L_next, g_next = L, g  # no trade at maturity
        dl = L_next - L
        l_all[n] = spec.sigma * p[n] * g
        limit = l_all[n] < 0
        half = 0.5 * spec.spread_coef * spec.sigma * p[n] * math.sqrt(dt)
        K = K * growth - p[n] * dl + np.where(limit, 1.0, -1.0) * half * np.abs(dl)
        L, g = L_next, g_next
    x_final = L * p[-1] + K
    return ReplicationResult(x_final - payoff(p[-1]), l_all, l_all < 0, p)


def write_surface_csv(out: IO[str], surface: ValueSurface) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("t", "p", "value", "delta", "gamma"))
    delta, gamma = surface.delta, surface.gamma
    for j, t in enumerate(surface.t):
        for i, p in enumerate(surface.p):
            w.writerow((f"{t:.6f}", f"{p:.4f}", f"{surface.values[j, i]:.6f}",
                        f"{delta[j, i]:.6f}", f"{gamma[j, i]:.6g}"))


def write_replication_csv(out: IO[str], rows: Sequence[tuple[int, float]]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("N", "rms_error"))
    for n, rms in rows:
        w.writerow((n, f"{rms:.6e}"))
