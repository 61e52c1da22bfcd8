import io

import numpy as np
import pytest

from mlob.errors import InvalidConfig
from mlob.impact import classify_trades
from mlob.simgen import (
    INFORMED, INSIDER, SimConfig, generate_diffusion_tape, generate_tape, read_increments_csv,
    write_increments_csv, write_truth_csv,
)
from mlob.tape import OrderBook, encode_tape

from conftest import sim_tape


def test_deterministic_bit_identical():
    cfg = SimConfig(seed=8, n_trades=300, split_prob=0.3, cancel_rate=0.5, special_rate=0.2)
    assert encode_tape(generate_tape(cfg)[0]) == encode_tape(generate_tape(cfg)[0])


def test_book_invariants_hold_throughout():
    msgs, _ = generate_tape(SimConfig(seed=1, n_trades=500, split_prob=0.5, cancel_rate=0.5))
    book = OrderBook()
    for m in msgs:
        book.apply(m)
        book.check_invariants()


def test_all_informed_has_only_impact_trades():
    tape = sim_tape(seed=0, n_trades=2000, informed_fraction=1.0)[0]
    c = classify_trades(tape)
    assert c.n_neg == 0 and c.n_zero == 0


def test_noise_without_moves_has_no_impact():
    tape = sim_tape(seed=0, n_trades=2000, informed_fraction=0.0, noise_move_q=0.0)[0]
    assert classify_trades(tape).n_zero == 2000


def test_informed_labels_have_positive_active_impact():
    tape, truth, *_ = sim_tape(seed=4, n_trades=3000, informed_fraction=0.4)
    prod = tape.dp2 * -tape.dl_passive
    assert np.all(prod[truth.label == INFORMED] > 0)


def test_moves_are_single_ticks():
    tape, truth, *_ = sim_tape(seed=6, n_trades=2000)
    assert set(np.unique(tape.dp2 // 2)) <= {-100, 0, 100}
    assert np.array_equal(tape.dp2 // 200, truth.move)


def test_extra_events_feed_filter_stats():
    _, truth, msgs, stats = sim_tape(seed=3, n_trades=1000, special_rate=0.1, hidden_rate=0.2)
    s = stats["SIM"]
    assert s.trades == 1000 and s.special_deals > 0 and s.hidden > 0
    assert s.special_deals + s.hidden + s.executions + 0 <= s.total_messages


def test_insider_trades_toward_target():
    _, truth, *_ = sim_tape(seed=2, n_trades=500, informed_fraction=0.0, insider_fraction=0.5,
                            insider_target_ticks=20)
    assert np.any(truth.label == INSIDER)
    assert np.mean(truth.buy[truth.label == INSIDER]) > 0.5


@pytest.mark.parametrize("kw", [
    dict(informed_fraction=1.5), dict(noise_move_q=-0.1), dict(spread_ticks=0), dict(n_trades=0),
    dict(rho=2.0), dict(informed_fraction=0.7, insider_fraction=0.5), dict(initial_mid=0.001),
])
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        generate_tape(SimConfig(**kw))


def test_diffusion_rho_extremes():
    inc = generate_diffusion_tape(SimConfig(seed=1, n_trades=1000, rho=-1.0))
    assert np.allclose(inc.dl, -inc.dp)
    # pooled over seeds: each correlation is ~N(0, 1/n) under independence
    rhos = [np.corrcoef(i.dp, i.dl)[0, 1] for i in
            (generate_diffusion_tape(SimConfig(seed=s, n_trades=10_000, rho=0.0)) for s in range(20))]
    assert abs(np.mean(rhos)) < 3 / np.sqrt(20 * 10_000)
    assert np.std(rhos) == pytest.approx(1 / np.sqrt(10_000), rel=0.5)


def test_increments_csv_round_trip():
    inc = generate_diffusion_tape(SimConfig(seed=1, n_trades=50, rho=0.3))
    buf = io.StringIO()
    write_increments_csv(buf, inc)
    back = read_increments_csv(io.StringIO("# comment\n" + buf.getvalue()))
    assert np.array_equal(back.dp, inc.dp) and np.array_equal(back.dl, inc.dl)
    with pytest.raises(InvalidConfig):
        read_increments_csv(io.StringIO("a,b\n1,2\n"))


def test_truth_csv():
    _, truth = generate_tape(SimConfig(seed=0, n_trades=5))
    buf = io.StringIO()
    write_truth_csv(buf, truth)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "trade,label,side,volume,move_ticks,children" and len(lines) == 6
