"""Bit-exact codec for the MLOB binary tape.

File layout::

    b"MLB1" | version: uint16 BE (=1) | frame*
    frame  = length: uint16 BE | body[length]

All body integers are big-endian. Prices are uint32 in units of 1e-4
currency; symbols are 8 ASCII bytes, right-padded with spaces.

==== ============================================================ =====
kind fields                                                        bytes
==== ============================================================ =====
R    kind locate symbol                                            11
T    kind locate timestamp_ns                                      11
A    kind locate timestamp_ns order_id side shares price           28
E    kind locate timestamp_ns order_id shares match_id             31
X    kind locate timestamp_ns order_id shares                      23
D    kind locate timestamp_ns order_id                             19
C    kind locate timestamp_ns shares price                         19
P    kind locate timestamp_ns side shares price match_id           28
==== ============================================================ =====
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Union

from ..errors import (
    BadHeader,
    FieldRange,
    MalformedFrame,
    NonMonotonicTimestamp,
    TruncatedFrame,
    UnknownKind,
)

MAGIC = b"MLB1"
VERSION = 1
_HEADER = struct.Struct(">4sH")
_LEN = struct.Struct(">H")

U16 = (1 << 16) - 1
U32 = (1 << 32) - 1
U64 = (1 << 64) - 1


class Side(str, enum.Enum):
    BID = "B"
    ASK = "S"

    @property
    def sign(self) -> int:
        """+1 for the bid (buyer) side, -1 for the ask (seller) side."""
        return 1 if self is Side.BID else -1

    @classmethod
    def from_sign(cls, sign: int) -> "Side":
        return cls.BID if sign > 0 else cls.ASK


@dataclass(frozen=True, slots=True)
class Directory:
    locate: int
    symbol: str
    kind = "R"


@dataclass(frozen=True, slots=True)
class Timestamp:
    locate: int
    timestamp_ns: int
    kind = "T"


@dataclass(frozen=True, slots=True)
class Add:
    locate: int
    timestamp_ns: int
    order_id: int
    side: Side
    shares: int
    price: int
    kind = "A"


@dataclass(frozen=True, slots=True)
class Execute:
    locate: int
    timestamp_ns: int
    order_id: int
    shares: int
    match_id: int
    kind = "E"


@dataclass(frozen=True, slots=True)
class Cancel:
    locate: int
    timestamp_ns: int
    order_id: int
    shares: int
    kind = "X"


@dataclass(frozen=True, slots=True)
class Delete:
    locate: int
    timestamp_ns: int
    order_id: int
    kind = "D"


@dataclass(frozen=True, slots=True)
class SpecialDeal:
    locate: int
    timestamp_ns: int
    shares: int
    price: int
    kind = "C"


@dataclass(frozen=True, slots=True)
class HiddenExec:
    locate: int
    timestamp_ns: int
    side: Side
    shares: int
    price: int
    match_id: int
    kind = "P"


TapeMessage = Union[Directory, Timestamp, Add, Execute, Cancel, Delete, SpecialDeal, HiddenExec]

_STRUCTS = {
    b"R": struct.Struct(">cH8s"),
    b"T": struct.Struct(">cHQ"),
    b"A": struct.Struct(">cHQQcII"),
    b"E": struct.Struct(">cHQQIQ"),
    b"X": struct.Struct(">cHQQI"),
    b"D": struct.Struct(">cHQQ"),
    b"C": struct.Struct(">cHQII"),
    b"P": struct.Struct(">cHQcIIQ"),
}
BODY_SIZE = {k.decode(): s.size for k, s in _STRUCTS.items()}

_SIDES = {b"B": Side.BID, b"S": Side.ASK}


def _symbol_ok(symbol: str) -> bool:
    return (
        0 < len(symbol) <= 8
        and symbol == symbol.strip(" ")
        and all(" " <= ch <= "~" for ch in symbol)
    )


def _decode_symbol(raw: bytes) -> str:
    try:
        symbol = raw.decode("ascii").rstrip(" ")
    except UnicodeDecodeError:
        raise FieldRange(f"symbol is not ASCII: {raw!r}") from None
    if not _symbol_ok(symbol):
        raise FieldRange(f"invalid symbol bytes {raw!r}")
    return symbol


def _side(raw: bytes) -> Side:
    try:
        return _SIDES[raw]
    except KeyError:
        raise FieldRange(f"side must be b'B' or b'S', got {raw!r}") from None


def decode_body(body: bytes | memoryview) -> TapeMessage:
    """Decode one frame body (everything after the length prefix)."""
    if len(body) == 0:
        raise TruncatedFrame("empty frame body")
    code = bytes(body[:1])
    st = _STRUCTS.get(code)
    if st is None:
        raise UnknownKind(f"unknown message kind {code!r}")
    if len(body) < st.size:
        raise TruncatedFrame(f"{code.decode()} body has {len(body)} bytes, needs {st.size}")
    if len(body) > st.size:
        raise MalformedFrame(f"{code.decode()} body has {len(body)} bytes, expected {st.size}")
    f = st.unpack(body)
    if code == b"A":
        _, loc, ts, oid, side, shares, price = f
        if shares == 0 or price == 0:
            raise FieldRange("Add with zero shares or price")
        return Add(loc, ts, oid, _side(side), shares, price)
    if code == b"E":
        _, loc, ts, oid, shares, match = f
        if shares == 0:
            raise FieldRange("Execute with zero shares")
        return Execute(loc, ts, oid, shares, match)
    if code == b"X":
        _, loc, ts, oid, shares = f
        if shares == 0:
            raise FieldRange("Cancel with zero shares")
        return Cancel(loc, ts, oid, shares)
    if code == b"D":
        return Delete(f[1], f[2], f[3])
    if code == b"T":
        return Timestamp(f[1], f[2])
    if code == b"R":
        return Directory(f[1], _decode_symbol(f[2]))
    if code == b"C":
        _, loc, ts, shares, price = f
        if shares == 0 or price == 0:
            raise FieldRange("SpecialDeal with zero shares or price")
        return SpecialDeal(loc, ts, shares, price)
    # P
    _, loc, ts, side, shares, price, match = f
    if shares == 0 or price == 0:
        raise FieldRange("HiddenExec with zero shares or price")
    return HiddenExec(loc, ts, _side(side), shares, price, match)


def decode_message(frame: bytes | memoryview) -> TapeMessage:
    """Decode a single length-prefixed frame."""
    if len(frame) < 2:
        raise TruncatedFrame(f"frame of {len(frame)} bytes has no length prefix")
    (length,) = _LEN.unpack_from(frame)
    if len(frame) - 2 < length:
        raise TruncatedFrame(f"frame claims {length} body bytes, has {len(frame) - 2}")
    if len(frame) - 2 > length:
        raise MalformedFrame(f"{len(frame) - 2 - length} trailing bytes after frame")
    return decode_body(memoryview(frame)[2:])


def _check(name: str, value: int, lo: int, hi: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or not lo <= value <= hi:
        raise FieldRange(f"{name}={value!r} outside [{lo}, {hi}]")


def encode_body(msg: TapeMessage) -> bytes:
    kind = getattr(msg, "kind", None)
    if kind not in BODY_SIZE:
        raise UnknownKind(f"cannot encode {type(msg).__name__}")
    _check("locate", msg.locate, 0, U16)
    if kind == "R":
        if not isinstance(msg.symbol, str) or not _symbol_ok(msg.symbol):
            raise FieldRange(f"invalid symbol {msg.symbol!r}")
        return _STRUCTS[b"R"].pack(b"R", msg.locate, msg.symbol.ljust(8).encode("ascii"))
    _check("timestamp_ns", msg.timestamp_ns, 0, U64)
    if kind == "T":
        return _STRUCTS[b"T"].pack(b"T", msg.locate, msg.timestamp_ns)
    if kind in "AEXD":
        _check("order_id", msg.order_id, 0, U64)
    if kind in "AEXCP":
        _check("shares", msg.shares, 1, U32)
    if kind in "ACP":
        _check("price", msg.price, 1, U32)
    if kind in "EP":
        _check("match_id", msg.match_id, 0, U64)
    if kind in "AP" and not isinstance(msg.side, Side):
        raise FieldRange(f"side must be a Side, got {msg.side!r}")
    st = _STRUCTS[kind.encode()]
    if kind == "A":
        return st.pack(b"A", msg.locate, msg.timestamp_ns, msg.order_id,
                       msg.side.value.encode(), msg.shares, msg.price)
    if kind == "E":
        return st.pack(b"E", msg.locate, msg.timestamp_ns, msg.order_id, msg.shares, msg.match_id)
    if kind == "X":
        return st.pack(b"X", msg.locate, msg.timestamp_ns, msg.order_id, msg.shares)
    if kind == "D":
        return st.pack(b"D", msg.locate, msg.timestamp_ns, msg.order_id)
    if kind == "C":
        return st.pack(b"C", msg.locate, msg.timestamp_ns, msg.shares, msg.price)
    return st.pack(b"P", msg.locate, msg.timestamp_ns, msg.side.value.encode(),
                   msg.shares, msg.price, msg.match_id)


def encode_message(msg: TapeMessage) -> bytes:
    """Encode ``msg`` as a length-prefixed frame."""
    body = encode_body(msg)
    return _LEN.pack(len(body)) + body


def iter_frames(data: bytes | memoryview, offset: int = 0) -> Iterator[memoryview]:
    """Yield frame bodies as zero-copy views into ``data``."""
    view = memoryview(data)
    end = len(view)
    while offset < end:
        if end - offset < 2:
            raise TruncatedFrame(f"dangling byte at offset {offset}")
        (length,) = _LEN.unpack_from(view, offset)
        start = offset + 2
        if end - start < length:
            raise TruncatedFrame(f"frame at offset {offset} claims {length} bytes, {end - start} left")
        yield view[start:start + length]
        offset = start + length


def iter_tape(data: bytes | memoryview) -> Iterator[TapeMessage]:
    """Decode a whole tape image, header included.

    Timestamps must be non-decreasing across the file (Directory messages
    carry none and are exempt).
    """
    if len(data) < _HEADER.size:
        raise BadHeader("file too short for MLOB header")
    magic, version = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadHeader(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadHeader(f"unsupported format version {version}")
    last_ts = -1
    for body in iter_frames(data, _HEADER.size):
        msg = decode_body(body)
        ts = getattr(msg, "timestamp_ns", None)
        if ts is not None:
            if ts < last_ts:
                raise NonMonotonicTimestamp(f"timestamp {ts} after {last_ts}")
            last_ts = ts
        yield msg


def encode_tape(messages: Iterable[TapeMessage]) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION)]
    parts.extend(encode_message(m) for m in messages)
    return b"".join(parts)


def read_tape(path: str | Path) -> list[TapeMessage]:
    return list(iter_tape(Path(path).read_bytes()))


def write_tape(dest: str | Path | BinaryIO, messages: Iterable[TapeMessage]) -> int:
    data = encode_tape(messages)
    if hasattr(dest, "write"):
        dest.write(data)
    else:
        Path(dest).write_bytes(data)
    return len(data)
