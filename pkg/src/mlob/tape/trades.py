"""Trade-tape extraction on the event clock."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Mapping

import numpy as np

from ..errors import InputError
from ..units import fmt_half, fmt_price
from .book import OrderBook
from .codec import Directory, Execute, HiddenExec, Side, SpecialDeal, TapeMessage

TRADE_CSV_HEADER = (
    "n", "timestamp_ns", "symbol", "passive_side", "volume",
    "exec_price", "pre_mid", "pre_spread", "delta_L_passive",
)


@dataclass(frozen=True)
class TradeEvent:
    n: int
    timestamp_ns: int
    symbol: str
    passive_side: Side
    volume: int
    exec_price: int | float  # exact for single prints, VWAP for parent orders
    pre_mid2: int
    pre_spread: int
    notional: int
    children: int = 1

    @property
    def pre_mid(self) -> float:
        return self.pre_mid2 / 2

    @property
    def delta_L_passive(self) -> int:
        return self.passive_side.sign * self.volume

    @property
    def delta_L_active(self) -> int:
        return -self.delta_L_passive


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TradeTape:
    """Column store of one symbol's trades, n = 1..N on the trade clock.

    ``mid2`` and ``spread`` are snapshots taken before each trade; ``final_mid2``
    is the mid after the last trade (end of stream), which closes Δp for n = N.
    ``seq_first``/``seq_last`` are message positions within the symbol's own
    stream, used to decide whether two prints were adjacent.
    """

    symbol: str
    timestamp_ns: np.ndarray
    passive_sign: np.ndarray
    volume: np.ndarray
    notional: np.ndarray
    mid2: np.ndarray
    spread: np.ndarray
    final_mid2: int | None
    seq_first: np.ndarray
    seq_last: np.ndarray
    children: np.ndarray

    def __post_init__(self):
        n = len(self.volume)
        for name in ("timestamp_ns", "passive_sign", "notional", "mid2", "spread",
                     "seq_first", "seq_last", "children"):
            if len(getattr(self, name)) != n:
                raise InputError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        if n and self.final_mid2 is None:
            raise InputError("non-empty tape needs a final mid")

    def __len__(self) -> int:
        return len(self.volume)

    @classmethod
    def from_arrays(
        cls,
        mid2,
        spread,
        dl_passive,
        final_mid2: int | None,
        *,
        symbol: str = "SYM",
        timestamp_ns=None,
        seq_first=None,
        seq_last=None,
    ) -> "TradeTape":
        """Build a tape of best-quote prints from mids, spreads and passive volumes."""
        mid2 = np.asarray(mid2, dtype=np.int64)
        spread = np.asarray(spread, dtype=np.int64)
        dl = np.asarray(dl_passive, dtype=np.int64)
        if np.any(dl == 0):
            raise InputError("every trade needs non-zero volume")
        if np.any((mid2 - spread) % 2) or np.any(spread <= 0):
            raise InputError("mid2 and spread must describe integer quotes with positive spread")
        sign = np.sign(dl).astype(np.int8)
        volume = np.abs(dl)
        price = (mid2 - sign * spread) // 2
        n = len(dl)
        ts = np.arange(n, dtype=np.uint64) if timestamp_ns is None else timestamp_ns
        sf = 2 * np.arange(n) if seq_first is None else seq_first
        sl = sf if seq_last is None else seq_last
        return cls(
            symbol=symbol,
            timestamp_ns=_frozen(ts, np.uint64),
            passive_sign=_frozen(sign, np.int8),
            volume=_frozen(volume, np.int64),
            notional=_frozen(price * volume, np.int64),
            mid2=_frozen(mid2, np.int64),
            spread=_frozen(spread, np.int64),
            final_mid2=None if final_mid2 is None else int(final_mid2),
            seq_first=_frozen(sf, np.int64),
            seq_last=_frozen(sl, np.int64),
            children=_frozen(np.ones(n), np.int64),
        )

    @cached_property
    def dl_passive(self) -> np.ndarray:
        return self.passive_sign.astype(np.int64) * self.volume

    @cached_property
    def mids2_ext(self) -> np.ndarray:
        """p_1..p_{N+1} in half-units."""
        if not len(self):
            return np.zeros(0, dtype=np.int64)
        return np.append(self.mid2, np.int64(self.final_mid2))

    @cached_property
    def dp2(self) -> np.ndarray:
        """Δ_n p = p_{n+1} - p_n in half-units, n = 1..N."""
        return np.diff(self.mids2_ext)

    @cached_property
    def cost_h(self) -> np.ndarray:
        """Spread captured by the passive side per trade, in half-units.

        Equals (s/2)|ΔL| for best-quote prints and the ladder cost c(ΔL) for
        parent orders that walked the book.
        """
        return self.passive_sign * (self.mid2 * self.volume - 2 * self.notional)

    @property
    def events(self) -> tuple[TradeEvent, ...]:
        out = []
        for i in range(len(self)):
            vol = int(self.volume[i])
            notional = int(self.notional[i])
            q, r = divmod(notional, vol)
            out.append(TradeEvent(
                n=i + 1,
                timestamp_ns=int(self.timestamp_ns[i]),
                symbol=self.symbol,
                passive_side=Side.from_sign(int(self.passive_sign[i])),
                volume=vol,
                exec_price=q if r == 0 else notional / vol,
                pre_mid2=int(self.mid2[i]),
                pre_spread=int(self.spread[i]),
                notional=notional,
                children=int(self.children[i]),
            ))
        return tuple(out)

    def truncated(self, n: int) -> "TradeTape":
        """First ``n`` trades; the mid before trade n+1 becomes the final mid."""
        if n >= len(self):
            return self
        cols = {name: getattr(self, name)[:n] for name in (
            "timestamp_ns", "passive_sign", "volume", "notional", "mid2", "spread",
            "seq_first", "seq_last", "children")}
        return TradeTape(symbol=self.symbol, final_mid2=int(self.mid2[n]) if n else None, **cols)


@dataclass
class FilterStats:
    """Message and execution counts for one symbol.

    ``pct_special``/``pct_hidden`` are shares of all executions (visible,
    'C' and 'P') that were discarded as special deals or hidden prints.
    """

    symbol: str
    total_messages: int = 0
    executions: int = 0
    trades: int = 0
    cleaned: int = 0
    special_deals: int = 0
    hidden: int = 0

    @property
    def all_executions(self) -> int:
        return self.executions + self.special_deals + self.hidden

    @property
    def pct_special(self) -> float:
        return 100.0 * self.special_deals / self.all_executions if self.all_executions else 0.0

    @property
    def pct_hidden(self) -> float:
        return 100.0 * self.hidden / self.all_executions if self.all_executions else 0.0


@dataclass
class _SymbolState:
    book: OrderBook = field(default_factory=OrderBook)
    seq: int = 0
    last_mid2: int | None = None
    stats: FilterStats | None = None
    cols: dict = field(default_factory=lambda: {k: [] for k in (
        "timestamp_ns", "passive_sign", "volume", "notional", "mid2", "spread", "seq")})


def extract_trades(
    messages: Iterable[TapeMessage],
) -> tuple[dict[str, TradeTape], dict[str, FilterStats]]:
    """Rebuild each symbol's book and collect best-quote executions.

    Executions that hit a one-sided book or a level behind the best quote
    are counted in ``FilterStats.cleaned`` and dropped; 'C' and 'P' messages
    only feed the counters.
    """
    states: dict[int, _SymbolState] = {}
    names: dict[int, str] = {}
    for msg in messages:
        loc = msg.locate
        st = states.get(loc)
        if st is None:
            st = states[loc] = _SymbolState(stats=FilterStats(symbol=""))
        st.stats.total_messages += 1
        seq = st.seq
        st.seq += 1
        if isinstance(msg, Directory):
            names[loc] = msg.symbol
            continue
        if isinstance(msg, SpecialDeal):
            st.stats.special_deals += 1
            continue
        if isinstance(msg, HiddenExec):
            st.stats.hidden += 1
            continue
        fill = st.book.apply(msg)
        if isinstance(msg, Execute):
            st.stats.executions += 1
            if fill.at_best:
                c = st.cols
                c["timestamp_ns"].append(msg.timestamp_ns)
                c["passive_sign"].append(fill.passive_sign)
                c["volume"].append(fill.shares)
                c["notional"].append(fill.price * fill.shares)
                c["mid2"].append(fill.pre_mid2)
                c["spread"].append(fill.pre_spread)
                c["seq"].append(seq)
                st.stats.trades += 1
            else:
                st.stats.cleaned += 1
        mid2 = st.book.mid2
        if mid2 is not None:
            st.last_mid2 = mid2

    tapes: dict[str, TradeTape] = {}
    stats: dict[str, FilterStats] = {}
    for loc in sorted(states):
        st = states[loc]
        symbol = names.get(loc, f"#{loc}")
        st.stats.symbol = symbol
        c = st.cols
        n = len(c["volume"])
        tapes[symbol] = TradeTape(
            symbol=symbol,
            timestamp_ns=_frozen(c["timestamp_ns"], np.uint64),
            passive_sign=_frozen(c["passive_sign"], np.int8),
            volume=_frozen(c["volume"], np.int64),
            notional=_frozen(c["notional"], np.int64),
            mid2=_frozen(c["mid2"], np.int64),
            spread=_frozen(c["spread"], np.int64),
            final_mid2=st.last_mid2 if n else None,
            seq_first=_frozen(c["seq"], np.int64),
            seq_last=_frozen(c["seq"], np.int64),
            children=_frozen(np.ones(n), np.int64),
        )
        stats[symbol] = st.stats
    return tapes, stats


def write_trades_csv(out: IO[str], tapes: Mapping[str, TradeTape]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRADE_CSV_HEADER)
    for tape in tapes.values():
        for ev in tape.events:
            price = (fmt_price(ev.exec_price) if isinstance(ev.exec_price, int)
                     else f"{ev.exec_price / 10_000:.4f}")
            w.writerow((ev.n, ev.timestamp_ns, ev.symbol, ev.passive_side.value, ev.volume,
                        price, fmt_half(ev.pre_mid2), fmt_price(ev.pre_spread),
                        ev.delta_L_passive))


def write_filter_stats_csv(out: IO[str], stats: Mapping[str, FilterStats]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("symbol", "total_messages", "executions", "trades", "cleaned",
                "special_deals", "hidden", "pct_special", "pct_hidden"))
    for s in stats.values():
        w.writerow((s.symbol, s.total_messages, s.executions, s.trades, s.cleaned,
                    s.special_deals, s.hidden, f"{s.pct_special:.2f}", f"{s.pct_hidden:.2f}"))
