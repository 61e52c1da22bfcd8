"""MLOB tape: codec, book reconstruction and trade extraction."""

from .book import DepthLadder, Fill, OrderBook
from .codec import (
    Add,
    Cancel,
    Delete,
    Directory,
    Execute,
    HiddenExec,
    Side,
    SpecialDeal,
    TapeMessage,
    Timestamp,
    decode_body,
    decode_message,
    encode_message,
    encode_tape,
    iter_tape,
    read_tape,
    write_tape,
)
from .trades import FilterStats, TradeEvent, TradeTape, extract_trades

__all__ = [
    "Add", "Cancel", "Delete", "DepthLadder", "Directory", "Execute", "Fill", "FilterStats",
    "HiddenExec", "OrderBook", "Side", "SpecialDeal", "TapeMessage", "Timestamp", "TradeEvent",
    "TradeTape", "decode_body", "decode_message", "encode_message", "encode_tape",
    "extract_trades", "iter_tape", "read_tape", "write_tape",
]
