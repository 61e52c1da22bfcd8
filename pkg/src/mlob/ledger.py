"""Clearing equations, exact wealth ledger and the three wealth models.

All tape-driven series are int64 in half-units (see :mod:`mlob.units`), so
the identity ``X_{n+1} - X_1 == F_n + T_n + A_n`` holds with no tolerance.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import IO, Mapping

import numpy as np

from .errors import SignMismatch
from .tape.trades import TradeTape
from .units import HALF_SCALE, fmt_half, fmt_price, fmt_prob


class OrderKind(str, enum.Enum):
    LIMIT = "limit"
    MARKET = "market"

    @property
    def spread_sign(self) -> int:
        # limit orders capture the half-spread, market orders pay it
        return 1 if self is OrderKind.LIMIT else -1


class ClearingCase(str, enum.Enum):
    BUY_MO = "buyMO"
    SELL_MO = "sellMO"
    BUY_LO = "buyLO"
    SELL_LO = "sellLO"
    NONE = "none"


class Perspective(str, enum.Enum):
    AGGREGATE_PASSIVE = "aggregate_passive"
    AGGREGATE_ACTIVE = "aggregate_active"

    @property
    def sign(self) -> int:
        return 1 if self is Perspective.AGGREGATE_PASSIVE else -1


class WealthModel(str, enum.Enum):
    FRICTIONLESS = "frictionless"
    WITH_TC = "with_tc"
    COMPLETE = "complete"


_CASE_SIGN = {
    ClearingCase.BUY_MO: 1, ClearingCase.BUY_LO: 1,
    ClearingCase.SELL_MO: -1, ClearingCase.SELL_LO: -1,
    ClearingCase.NONE: 0,
}


def clearing_cash_delta(case, p, s, dl):
    """Cash change for one trade at mid ``p`` and spread ``s``.

    Buying with a market order or selling with a limit order clears at the
    ask (p + s/2); the other two cases clear at the bid (p - s/2).
    """
    case = ClearingCase(case)
    want = _CASE_SIGN[case]
    got = (dl > 0) - (dl < 0)
    if got != want:
        raise SignMismatch(f"{case.value} requires sign(ΔL)={want}, got ΔL={dl}")
    if case is ClearingCase.NONE:
        return 0 * p
    if case in (ClearingCase.BUY_MO, ClearingCase.SELL_LO):
        return -(p + s / 2) * dl
    return -(p - s / 2) * dl


def wealth_delta_exact(L, dp, s, dl, order_kind):
    """ΔX = L·Δp ± (s/2)|ΔL| + Δp·ΔL, '+' for limit orders."""
    sign = OrderKind(order_kind).spread_sign
    return L * dp + sign * (s / 2) * abs(dl) + dp * dl


@dataclass(frozen=True, eq=False)
class LedgerSeries:
    """Per-trade state before each trade, rows n = 1..N+1 (half-units).

    ``spread`` has N entries: there is no trade at n = N+1.
    """

    symbol: str
    perspective: Perspective
    mid2: np.ndarray
    spread: np.ndarray
    L: np.ndarray
    K: np.ndarray
    X: np.ndarray

    def __len__(self) -> int:
        return len(self.X)


@dataclass(frozen=True, eq=False)
class WealthDecomposition:
    """Cumulative frictionless (F), transaction-cost (T), adverse-selection (A) terms.

    Entry n-1 holds the sum over trades 1..n.
    """

    F: np.ndarray
    T: np.ndarray
    A: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.F + self.T + self.A


def _dl(tape: TradeTape, perspective: Perspective) -> np.ndarray:
    return perspective.sign * tape.dl_passive


def run_ledger(tape: TradeTape, perspective=Perspective.AGGREGATE_PASSIVE) -> LedgerSeries:
    """Inventory, cash and wealth of the aggregate passive (or active) trader.

    Starts from L_1 = K_1 = 0. Cash moves by the traded notional: passive
    fills are limit-order fills, active ones market orders.
    """
    perspective = Perspective(perspective)
    dl = _dl(tape, perspective)
    dk = -perspective.sign * tape.passive_sign * (2 * tape.notional)
    L = np.concatenate(([0], np.cumsum(dl))).astype(np.int64)
    K = np.concatenate(([0], np.cumsum(dk))).astype(np.int64)
    mids = tape.mids2_ext if len(tape) else np.zeros(1, dtype=np.int64)
    X = L * mids + K
    return LedgerSeries(tape.symbol, perspective, mids, tape.spread, L, K, X)


def decompose(tape: TradeTape, perspective=Perspective.AGGREGATE_PASSIVE) -> WealthDecomposition:
    perspective = Perspective(perspective)
    dl = _dl(tape, perspective)
    L_pre = np.concatenate(([0], np.cumsum(dl)[:-1])).astype(np.int64) if len(tape) else dl
    dp = tape.dp2
    return WealthDecomposition(
        F=np.cumsum(L_pre * dp),
        T=np.cumsum(perspective.sign * tape.cost_h),
        A=np.cumsum(dp * dl),
    )


def wealth_model_series(
    tape: TradeTape, model, perspective=Perspective.AGGREGATE_PASSIVE
) -> np.ndarray:
    """Wealth change X_n - X_1, n = 1..N+1, under one of the three clearing models."""
    d = decompose(tape, perspective)
    model = WealthModel(model)
    if model is WealthModel.FRICTIONLESS:
        path = d.F
    elif model is WealthModel.WITH_TC:
        path = d.F + d.T
    else:
        path = d.total
    return np.concatenate(([0], path)).astype(np.int64)


@dataclass(frozen=True)
class Table2Metrics:
    """End-of-day comparison of frictionless and exact wealth.

    Ratios are fractions (1.0 = 100%); ``None`` marks a zero denominator.
    ``relative_error_sup`` is the path variant: sup|F - W| / sup|W|.
    """

    relative_error: float | None
    friction_ratio: float | None
    net_pnl: float
    relative_error_sup: float | None = None

    @classmethod
    def from_totals(cls, F, T, A, scale: float = 1.0) -> "Table2Metrics":
        net = F + T + A
        return cls(
            relative_error=abs(F - net) / abs(net) if net != 0 else None,
            friction_ratio=abs(A) / T if T != 0 else None,
            net_pnl=net / scale,
        )


def table2_metrics(tape: TradeTape) -> Table2Metrics:
    """Table-2 metrics for the aggregate passive trader; net P&L in currency."""
    if len(tape) == 0:
        return Table2Metrics(None, None, 0.0, None)
    d = decompose(tape)
    base = Table2Metrics.from_totals(int(d.F[-1]), int(d.T[-1]), int(d.A[-1]), scale=HALF_SCALE)
    W = d.total
    wmax = int(np.max(np.abs(W)))
    sup = float(np.max(np.abs(d.F - W))) / wmax if wmax else None
    return Table2Metrics(base.relative_error, base.friction_ratio, base.net_pnl, sup)


LEDGER_CSV_HEADER = ("n", "p", "s", "L", "K", "X", "F", "T", "A")


def write_ledger_csv(out: IO[str], series: LedgerSeries, decomp: WealthDecomposition) -> None:
    """Rows n = 1..N+1; F, T, A on row n are sums over trades before n."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(LEDGER_CSV_HEADER)
    zero = np.zeros(1, dtype=np.int64)
    F, T, A = (np.concatenate((zero, a)) for a in (decomp.F, decomp.T, decomp.A))
    n_rows = len(series)
    for i in range(n_rows):
        s = fmt_price(series.spread[i]) if i < len(series.spread) else ""
        w.writerow((i + 1, fmt_half(series.mid2[i]), s, int(series.L[i]), fmt_half(series.K[i]),
                    fmt_half(series.X[i]), fmt_half(F[i]), fmt_half(T[i]), fmt_half(A[i])))


def write_table2_csv(out: IO[str], rows: Mapping[str, Table2Metrics]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("symbol", "relative_error", "friction_ratio", "net_pnl"))
    for symbol, m in rows.items():
        w.writerow((symbol, fmt_prob(m.relative_error), fmt_prob(m.friction_ratio),
                    f"{m.net_pnl:.5f}"))
