"""Parent-order reconstruction and the ladder transaction-cost function.

Prints are children of one parent when they share the exact nanosecond
timestamp, hit the same side, and no other message for the symbol sits
between them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Mapping

import numpy as np

from .ledger import OrderKind
from .tape.book import DepthLadder
from .tape.codec import Side, TapeMessage
from .tape.trades import TradeTape, _frozen, extract_trades
from .units import HALF_SCALE


@dataclass(frozen=True)
class ParentGroup:
    children: tuple[int, ...]  # trade indices n on the raw tape
    timestamp_ns: int
    passive_side: Side
    volume: int
    vwap: float  # currency
    cost: float  # currency, measured against the pre-trade mid


def _group_starts(tape: TradeTape) -> np.ndarray:
    n = len(tape)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    join = np.zeros(n, dtype=bool)
    join[1:] = (
        (tape.timestamp_ns[1:] == tape.timestamp_ns[:-1])
        & (tape.passive_sign[1:] == tape.passive_sign[:-1])
        & (tape.seq_first[1:] == tape.seq_last[:-1] + 1)
    )
    return np.flatnonzero(~join)


def find_parent_groups(tape: TradeTape) -> list[ParentGroup]:
    starts = _group_starts(tape)
    ends = np.append(starts[1:], len(tape))
    cost = tape.cost_h
    groups = []
    for a, b in zip(starts, ends):
        vol = int(tape.volume[a:b].sum())
        groups.append(ParentGroup(
            children=tuple(range(a + 1, b + 1)),
            timestamp_ns=int(tape.timestamp_ns[a]),
            passive_side=Side.from_sign(int(tape.passive_sign[a])),
            volume=vol,
            vwap=float(tape.notional[a:b].sum()) / vol / 10_000,
            # children re-snapshot the mid; cost is against the parent's first mid
            cost=float(tape.passive_sign[a] * (tape.mid2[a] * vol - 2 * tape.notional[a:b].sum()))
            / HALF_SCALE,
        ))
    return groups


def group_trades(tape: TradeTape) -> TradeTape:
    """Merge child prints into parent trades (idempotent).

    The parent keeps the first child's pre-trade mid and spread; its cash
    flow is the summed notional, so its spread term becomes the ladder cost.
    """
    starts = _group_starts(tape)
    if len(starts) == len(tape):
        return tape
    last = np.append(starts[1:], len(tape)) - 1
    return TradeTape(
        symbol=tape.symbol,
        timestamp_ns=_frozen(tape.timestamp_ns[starts], np.uint64),
        passive_sign=_frozen(tape.passive_sign[starts], np.int8),
        volume=_frozen(np.add.reduceat(tape.volume, starts), np.int64),
        notional=_frozen(np.add.reduceat(tape.notional, starts), np.int64),
        mid2=_frozen(tape.mid2[starts], np.int64),
        spread=_frozen(tape.spread[starts], np.int64),
        final_mid2=tape.final_mid2,
        seq_first=_frozen(tape.seq_first[starts], np.int64),
        seq_last=_frozen(tape.seq_last[last], np.int64),
        children=_frozen(np.add.reduceat(tape.children, starts), np.int64),
    )


def reconstruct_parents(messages: Iterable[TapeMessage]) -> dict[str, TradeTape]:
    tapes, _ = extract_trades(messages)
    return {symbol: group_trades(t) for symbol, t in tapes.items()}


def convex_cost(ladder: DepthLadder, volume: int) -> float:
    """Currency cost of walking ``volume`` signed shares through ``ladder``.

    Equals (s/2)|volume| while the best level has enough depth and grows
    convexly beyond it.
    """
    return ladder.cost_h(volume) / HALF_SCALE


def wealth_delta_general(L, dp, cost_fn: Callable, dl, order_kind):
    """ΔX = L·Δp ± c(ΔL) + Δp·ΔL with a general cost function c."""
    return L * dp + OrderKind(order_kind).spread_sign * cost_fn(dl) + dp * dl


def write_parents_csv(out: IO[str], groups: Mapping[str, list[ParentGroup]]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("symbol", "first_child", "n_children", "timestamp_ns", "passive_side",
                "volume", "vwap", "cost"))
    for symbol, gs in groups.items():
        for g in gs:
            w.writerow((symbol, g.children[0], len(g.children), g.timestamp_ns,
                        g.passive_side.value, g.volume, f"{g.vwap:.4f}", f"{g.cost:.5f}"))
