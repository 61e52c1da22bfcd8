"""Per-symbol limit order book rebuilt from Add/Execute/Cancel/Delete."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import NamedTuple

from ..errors import CrossedBook, DuplicateOrder, InsufficientDepth, OverExecution, UnknownOrder
from .codec import Add, Cancel, Delete, Execute, TapeMessage


class Fill(NamedTuple):
    """What an Execute did to the book, with the quote snapshot before it."""

    passive_sign: int  # +1 resting bid was hit, -1 resting ask was lifted
    shares: int
    price: int
    pre_mid2: int | None  # bid + ask, i.e. mid in half-units
    pre_spread: int | None
    at_best: bool


@dataclass(frozen=True)
class DepthLadder:
    """Immutable snapshot of displayed depth.

    ``bids`` is sorted best (highest) first, ``asks`` best (lowest) first.
    """

    bids: tuple[tuple[int, int], ...]
    asks: tuple[tuple[int, int], ...]

    @property
    def mid2(self) -> int:
        return self.bids[0][0] + self.asks[0][0]

    @property
    def spread(self) -> int:
        return self.asks[0][0] - self.bids[0][0]

    def cost_h(self, volume: int) -> int:
        """Cost in half-units of walking ``volume`` signed shares into the book.

        Positive volume buys from the asks, negative sells into the bids.
        Measured against the mid: sum of |level price - mid| * shares taken.
        """
        if volume == 0:
            return 0
        levels = self.asks if volume > 0 else self.bids
        mid2 = self.mid2
        left = abs(volume)
        cost = 0
        for price, shares in levels:
            take = min(left, shares)
            cost += abs(2 * price - mid2) * take
            left -= take
            if left == 0:
                return cost
        raise InsufficientDepth(f"{abs(volume)} shares exceeds displayed depth")


class OrderBook:
    """Aggregated price levels plus an order index.

    Best quotes come from lazily-pruned heaps, so lookups stay cheap on
    books with many levels.
    """

    __slots__ = ("bids", "asks", "orders", "_bid_heap", "_ask_heap")

    def __init__(self) -> None:
        self.bids: dict[int, int] = {}
        self.asks: dict[int, int] = {}
        self.orders: dict[int, list] = {}  # order_id -> [sign, price, remaining]
        self._bid_heap: list[int] = []
        self._ask_heap: list[int] = []

    @property
    def best_bid(self) -> int | None:
        heap, levels = self._bid_heap, self.bids
        while heap and -heap[0] not in levels:
            heapq.heappop(heap)
        return -heap[0] if heap else None

    @property
    def best_ask(self) -> int | None:
        heap, levels = self._ask_heap, self.asks
        while heap and heap[0] not in levels:
            heapq.heappop(heap)
        return heap[0] if heap else None

    def quotes(self) -> tuple[int | None, int | None]:
        return self.best_bid, self.best_ask

    @property
    def mid2(self) -> int | None:
        bid, ask = self.best_bid, self.best_ask
        return None if bid is None or ask is None else bid + ask

    @property
    def spread(self) -> int | None:
        bid, ask = self.best_bid, self.best_ask
        return None if bid is None or ask is None else ask - bid

    def total_shares(self) -> int:
        return sum(self.bids.values()) + sum(self.asks.values())

    def ladder(self) -> DepthLadder:
        return DepthLadder(
            bids=tuple(sorted(self.bids.items(), reverse=True)),
            asks=tuple(sorted(self.asks.items())),
        )

    def _levels(self, sign: int) -> dict[int, int]:
        return self.bids if sign > 0 else self.asks

    def _reduce(self, order_id: int, shares: int) -> list:
        entry = self.orders[order_id]
        sign, price, _ = entry
        entry[2] -= shares
        levels = self._levels(sign)
        left = levels[price] - shares
        if left:
            levels[price] = left
        else:
            del levels[price]
        if entry[2] == 0:
            del self.orders[order_id]
        return entry

    def apply(self, msg: TapeMessage) -> Fill | None:
        """Apply one message; return a Fill for executions, else None.

        Messages other than Add/Execute/Cancel/Delete leave the book alone.
        """
        if isinstance(msg, Execute):
            entry = self.orders.get(msg.order_id)
            if entry is None:
                raise UnknownOrder(f"execute of unknown order {msg.order_id}")
            sign, price, remaining = entry
            if msg.shares > remaining:
                raise OverExecution(
                    f"execute of {msg.shares} shares against order {msg.order_id} with {remaining}"
                )
            bid, ask = self.best_bid, self.best_ask
            if bid is None or ask is None:
                fill = Fill(sign, msg.shares, price, None, None, False)
            else:
                at_best = price == (bid if sign > 0 else ask)
                fill = Fill(sign, msg.shares, price, bid + ask, ask - bid, at_best)
            self._reduce(msg.order_id, msg.shares)
            return fill
        if isinstance(msg, Add):
            if msg.order_id in self.orders:
                raise DuplicateOrder(f"order {msg.order_id} already resting")
            sign = msg.side.sign
            if sign > 0:
                ask = self.best_ask
                if ask is not None and msg.price >= ask:
                    raise CrossedBook(f"bid {msg.price} at or above best ask {ask}")
            else:
                bid = self.best_bid
                if bid is not None and msg.price <= bid:
                    raise CrossedBook(f"ask {msg.price} at or below best bid {bid}")
            levels = self._levels(sign)
            if msg.price not in levels:
                heapq.heappush(self._bid_heap if sign > 0 else self._ask_heap,
                               -msg.price if sign > 0 else msg.price)
                levels[msg.price] = msg.shares
            else:
                levels[msg.price] += msg.shares
            self.orders[msg.order_id] = [sign, msg.price, msg.shares]
            return None
        if isinstance(msg, Cancel):
            entry = self.orders.get(msg.order_id)
            if entry is None:
                raise UnknownOrder(f"cancel of unknown order {msg.order_id}")
            if msg.shares > entry[2]:
                raise OverExecution(
                    f"cancel of {msg.shares} shares against order {msg.order_id} with {entry[2]}"
                )
            self._reduce(msg.order_id, msg.shares)
            return None
        if isinstance(msg, Delete):
            entry = self.orders.get(msg.order_id)
            if entry is None:
                raise UnknownOrder(f"delete of unknown order {msg.order_id}")
            self._reduce(msg.order_id, entry[2])
            return None
        return None

    def check_invariants(self) -> None:
        """Raise AssertionError if the book is internally inconsistent."""
        agg: dict[tuple[int, int], int] = {}
        for sign, price, remaining in self.orders.values():
            assert remaining > 0
            agg[(sign, price)] = agg.get((sign, price), 0) + remaining
        assert agg == {**{(1, p): q for p, q in self.bids.items()},
                       **{(-1, p): q for p, q in self.asks.items()}}
        bid, ask = self.best_bid, self.best_ask
        if bid is not None:
            assert bid == max(self.bids)
        if ask is not None:
            assert ask == min(self.asks)
        if bid is not None and ask is not None:
            assert bid < ask
