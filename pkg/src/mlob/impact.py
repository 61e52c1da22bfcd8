"""Price-impact classification and transaction-cost vs adverse-selection split."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Mapping

import numpy as np

from .errors import InsufficientData
from .ledger import Perspective, decompose
from .tape.trades import TradeTape
from .units import HALF_SCALE


@dataclass(frozen=True)
class ImpactCounts:
    total: int
    n_pos: int
    n_zero: int
    n_neg: int

    @property
    def pct_pos(self) -> float:
        return 100.0 * self.n_pos / self.total if self.total else 0.0

    @property
    def pct_zero(self) -> float:
        return 100.0 * self.n_zero / self.total if self.total else 0.0

    @property
    def pct_neg(self) -> float:
        return 100.0 * self.n_neg / self.total if self.total else 0.0


def classify_trades(
    tape: TradeTape,
    perspective=Perspective.AGGREGATE_ACTIVE,
    drop_last: bool = False,
) -> ImpactCounts:
    """Count trades by the sign of Δp·ΔL.

    The default uses the active side's ΔL, so a positive product means the
    taker traded ahead of the move (price impact).
    """
    perspective = Perspective(perspective)
    prod = np.sign(tape.dp2) * np.sign(perspective.sign * tape.dl_passive)
    if drop_last:
        prod = prod[:-1]
    n_pos = int(np.count_nonzero(prod > 0))
    n_neg = int(np.count_nonzero(prod < 0))
    return ImpactCounts(total=len(prod), n_pos=n_pos, n_zero=len(prod) - n_pos - n_neg, n_neg=n_neg)


def cumulative_adverse_selection(tape: TradeTape, normalize: bool = False) -> np.ndarray:
    """Running Σ Δp·ΔL for the passive side, in currency.

    ``normalize`` divides by the largest absolute value so paths of different
    stocks share a [-1, 1] axis.
    """
    path = decompose(tape).A / HALF_SCALE
    if normalize and len(path):
        top = np.max(np.abs(path))
        if top > 0:
            path = path / top
    return path


@dataclass(frozen=True)
class SpreadSplit:
    """Per-symbol transaction-cost gains vs adverse-selection losses.

    ``slope`` is the least-squares fit of |AS| on TC through the origin;
    ``effective_fraction`` = 1 - slope is the share of the quoted half-spread
    the passive side keeps.
    """

    symbols: tuple[str, ...]
    tc: np.ndarray
    adverse: np.ndarray
    slope: float
    effective_fraction: float


def fit_spread_split(symbols, tc, adverse) -> SpreadSplit:
    tc = np.asarray(tc, dtype=float)
    adverse = np.asarray(adverse, dtype=float)
    if len(tc) < 2:
        raise InsufficientData(f"need at least 2 symbols for the pooled fit, got {len(tc)}")
    denom = float(np.dot(tc, tc))
    if denom == 0.0:
        raise InsufficientData("all transaction-cost totals are zero")
    slope = float(np.dot(tc, np.abs(adverse))) / denom
    return SpreadSplit(tuple(symbols), tc, adverse, slope, 1.0 - slope)


def spread_split(tapes: Mapping[str, TradeTape]) -> SpreadSplit:
    symbols, tc, adverse = [], [], []
    for symbol, tape in tapes.items():
        if len(tape) == 0:
            continue
        d = decompose(tape)
        symbols.append(symbol)
        tc.append(d.T[-1] / HALF_SCALE)
        adverse.append(d.A[-1] / HALF_SCALE)
    return fit_spread_split(symbols, tc, adverse)


def write_table1_csv(out: IO[str], rows: Mapping[str, ImpactCounts]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("symbol", "total", "with_impact", "without_impact", "reverse_impact"))
    for symbol, c in rows.items():
        w.writerow((symbol, c.total, c.n_pos, c.n_zero, c.n_neg))
