import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlob.errors import (
    BadHeader, CrossedBook, DuplicateOrder, FieldRange, MalformedFrame, NonMonotonicTimestamp,
    OverExecution, TapeError, TruncatedFrame, UnknownKind, UnknownOrder,
)
from mlob.tape import (
    Add, Cancel, Delete, Directory, Execute, HiddenExec, OrderBook, Side, SpecialDeal, Timestamp,
    decode_message, encode_message, encode_tape, extract_trades, iter_tape, read_tape, write_tape,
)
from mlob.tape.trades import write_trades_csv
from strategies import book_streams, messages

from conftest import sim_tape


def frame(body: bytes) -> bytes:
    return struct.pack(">H", len(body)) + body


# -- codec -------------------------------------------------------------------

def test_decode_add_field_mapping():
    body = b"A" + struct.pack(">HQQ", 1, 0, 7) + b"B" + struct.pack(">II", 100, 1000200)
    assert decode_message(frame(body)) == Add(1, 0, 7, Side.BID, 100, 1_000_200)


def test_decode_delete():
    body = b"D" + struct.pack(">HQQ", 1, 5, 7)
    assert decode_message(frame(body)) == Delete(1, 5, 7)


def test_short_frame_claiming_long_body():
    with pytest.raises(TruncatedFrame):
        decode_message(struct.pack(">H", 40) + b"A")


def test_timestamp_frame_is_fixed_length():
    data = encode_message(Timestamp(0, 86_399 * 10**9))
    assert len(data) == 2 + 11
    assert data[2:3] == b"T"


@pytest.mark.parametrize("msg", [
    Add(1, 0, 1, Side.BID, 0, 100),
    Add(1, 0, 1, Side.BID, 10, 0),
    Execute(1, 0, 1, 0, 1),
    SpecialDeal(1, 0, 0, 5),
    Add(1, 0, 1, Side.BID, 2**32, 5),
    Directory(1, "TOOLONGSYM"),
    Directory(1, " LEAD"),
])
def test_encode_rejects_out_of_range(msg):
    with pytest.raises(FieldRange):
        encode_message(msg)


def test_decode_rejects_zero_shares():
    body = b"E" + struct.pack(">HQQIQ", 1, 0, 9, 0, 3)
    with pytest.raises(FieldRange):
        decode_message(frame(body))


def test_unknown_kind_is_reported():
    with pytest.raises(UnknownKind):
        decode_message(frame(b"Z" + bytes(10)))


def test_trailing_bytes_rejected():
    with pytest.raises(MalformedFrame):
        decode_message(encode_message(Delete(1, 5, 7)) + b"\x00")
    with pytest.raises(MalformedFrame):
        decode_message(frame(b"D" + bytes(19)))


def test_symbol_padding_on_the_wire():
    data = encode_message(Directory(3, "AA"))
    assert data[2:] == b"R" + struct.pack(">H", 3) + b"AA      "


@given(messages)
def test_round_trip_values_and_bytes(msg):
    data = encode_message(msg)
    back = decode_message(data)
    assert back == msg
    assert encode_message(back) == data


@given(st.binary(max_size=64))
def test_fuzzed_frames_never_crash(data):
    try:
        decode_message(data)
    except TapeError:
        pass


@given(st.binary(max_size=200))
def test_fuzzed_tapes_never_crash(data):
    try:
        list(iter_tape(b"MLB1\x00\x01" + data))
    except TapeError:
        pass


def test_header_checks():
    with pytest.raises(BadHeader):
        list(iter_tape(b""))
    with pytest.raises(BadHeader):
        list(iter_tape(b"MLB2\x00\x01"))
    with pytest.raises(BadHeader):
        list(iter_tape(b"MLB1\x00\x02"))
    assert list(iter_tape(b"MLB1\x00\x01")) == []


def test_timestamps_must_not_decrease():
    data = encode_tape([Timestamp(1, 10), Directory(1, "X"), Timestamp(1, 9)])
    with pytest.raises(NonMonotonicTimestamp):
        list(iter_tape(data))


def test_tape_file_round_trip(tmp_path):
    msgs = [Directory(1, "ABC"), Add(1, 1, 1, Side.ASK, 10, 101), HiddenExec(1, 2, Side.BID, 5, 99, 4)]
    path = tmp_path / "t.mlob"
    n = write_tape(path, msgs)
    assert path.stat().st_size == n
    assert read_tape(path) == msgs


# -- book --------------------------------------------------------------------

def two_sided_book():
    book = OrderBook()
    book.apply(Add(1, 0, 1, Side.BID, 500, 1_000_000))
    book.apply(Add(1, 0, 2, Side.ASK, 300, 1_000_400))
    return book


def test_execute_at_best_snapshots_pre_trade_quotes():
    book = two_sided_book()
    fill = book.apply(Execute(1, 1, 1, 100, 1))
    assert fill.passive_sign == 1 and fill.shares == 100 and fill.at_best
    assert fill.pre_mid2 == 2_000_400  # 100.02
    assert fill.pre_spread == 400  # 0.04
    assert fill.price == 1_000_000
    assert book.bids == {1_000_000: 400}


def test_over_execution():
    with pytest.raises(OverExecution):
        two_sided_book().apply(Execute(1, 1, 1, 600, 1))


def test_unknown_and_duplicate_orders():
    book = two_sided_book()
    with pytest.raises(UnknownOrder):
        book.apply(Execute(1, 1, 99, 1, 1))
    with pytest.raises(UnknownOrder):
        book.apply(Delete(1, 1, 99))
    with pytest.raises(UnknownOrder):
        book.apply(Cancel(1, 1, 99, 1))
    with pytest.raises(DuplicateOrder):
        book.apply(Add(1, 1, 1, Side.BID, 1, 999_900))


def test_crossing_add_is_rejected_without_mutation():
    book = two_sided_book()
    with pytest.raises(CrossedBook):
        book.apply(Add(1, 1, 3, Side.BID, 10, 1_000_400))
    with pytest.raises(CrossedBook):
        book.apply(Add(1, 1, 3, Side.ASK, 10, 1_000_000))
    assert 3 not in book.orders
    book.check_invariants()


def test_execution_behind_best_is_not_at_best():
    book = two_sided_book()
    book.apply(Add(1, 0, 3, Side.BID, 100, 999_900))
    assert not book.apply(Execute(1, 1, 3, 10, 1)).at_best


def test_depth_ladder_orders_levels():
    book = two_sided_book()
    book.apply(Add(1, 0, 3, Side.ASK, 100, 1_000_600))
    book.apply(Add(1, 0, 4, Side.BID, 100, 999_800))
    lad = book.ladder()
    assert lad.asks == ((1_000_400, 300), (1_000_600, 100))
    assert lad.bids == ((1_000_000, 500), (999_800, 100))


@settings(max_examples=150, deadline=None)
@given(book_streams())
def test_book_invariants_and_share_conservation(stream):
    book = OrderBook()
    for msg in stream:
        before = book.total_shares()
        book.apply(msg)
        book.check_invariants()
        delta = book.total_shares() - before
        if isinstance(msg, Add):
            assert delta == msg.shares
        elif isinstance(msg, (Execute, Cancel)):
            assert delta == -msg.shares
        elif isinstance(msg, Directory):
            assert delta == 0
        else:
            assert delta <= 0


@settings(max_examples=100, deadline=None)
@given(book_streams())
def test_trade_events_execute_at_half_spread(stream):
    tapes, stats = extract_trades(stream)
    tape = tapes["TST"]
    for ev in tape.events:
        # 2·price = mid2 ∓ spread exactly
        assert 2 * ev.exec_price == ev.pre_mid2 - ev.passive_side.sign * ev.pre_spread
        assert ev.pre_spread > 0
    assert stats["TST"].trades + stats["TST"].cleaned == stats["TST"].executions


# -- trade extraction --------------------------------------------------------

def test_hidden_executions_only_feed_stats():
    msgs = [
        Directory(1, "AA"),
        Add(1, 0, 1, Side.BID, 500, 1_000_000),
        Add(1, 0, 2, Side.ASK, 300, 1_000_400),
        Execute(1, 1, 1, 100, 1),
        HiddenExec(1, 2, Side.BID, 50, 1_000_100, 2),
        Execute(1, 3, 2, 100, 3),
    ]
    tapes, stats = extract_trades(msgs)
    assert len(tapes["AA"]) == 2
    assert stats["AA"].hidden == 1
    assert stats["AA"].pct_hidden == pytest.approx(100 / 3)
    assert list(tapes["AA"].dl_passive) == [100, -100]
    assert tapes["AA"].final_mid2 == 2_000_400


def test_empty_stream():
    tapes, stats = extract_trades([])
    assert tapes == {} and stats == {}


def test_special_and_hidden_only_tape():
    msgs = [Directory(1, "CP"), SpecialDeal(1, 1, 10, 100), HiddenExec(1, 2, Side.ASK, 5, 100, 1)]
    tapes, stats = extract_trades(msgs)
    assert len(tapes["CP"]) == 0
    s = stats["CP"]
    assert (s.special_deals, s.hidden, s.executions) == (1, 1, 0)
    assert s.pct_special == 50.0 and s.pct_hidden == 50.0


def test_one_sided_book_execution_is_cleaned():
    msgs = [Add(7, 0, 1, Side.BID, 100, 10_000), Execute(7, 1, 1, 10, 1)]
    tapes, stats = extract_trades(msgs)
    assert len(tapes["#7"]) == 0 and stats["#7"].cleaned == 1


def test_simgen_tape_extracts_all_trades(sim1000):
    tape, truth, _, stats = sim1000
    assert len(tape) == 1000 == len(truth)
    assert np.all(np.diff(tape.timestamp_ns.astype(np.int64)) > 0)
    assert np.array_equal(tape.volume, truth.volume)
    assert stats[tape.symbol].cleaned == 0


def test_trades_csv_is_exact(sim1000):
    import io
    tape = sim1000[0]
    buf = io.StringIO()
    write_trades_csv(buf, {tape.symbol: tape})
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,timestamp_ns,symbol,passive_side,volume,exec_price,pre_mid,pre_spread,delta_L_passive"
    assert len(lines) == 1001
    first = lines[1].split(",")
    assert first[5].count(".") == 1 and len(first[5].split(".")[1]) == 4
