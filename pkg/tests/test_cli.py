import math
import re
from pathlib import Path

import pytest

from mlob.cli import main
from mlob.tape import Directory, HiddenExec, Side, SpecialDeal, write_tape

GOLDEN = Path(__file__).parent / "golden"


def body(path: Path) -> str:
    """File text without manifest comment lines."""
    return "".join(line for line in path.read_text().splitlines(True) if not line.startswith("#"))


@pytest.fixture(scope="module")
def tape(tmp_path_factory):
    path = tmp_path_factory.mktemp("tape") / "sim.mlob"
    assert main(["simulate", "--trades", "2000", "--seed", "7", "--split-prob", "0.3",
                 "--out", str(path), "--truth", str(path.with_suffix(".csv"))]) == 0
    return path


def test_ingest_counts_match_truth(tape, tmp_path):
    assert main(["ingest", str(tape), "--out-dir", str(tmp_path)]) == 0
    trades = body(tmp_path / "trades.csv").splitlines()
    truth = body(tape.with_suffix(".csv")).splitlines()
    n_children = sum(int(r.split(",")[-1]) for r in truth[1:])
    assert len(trades) - 1 == n_children
    first = (tmp_path / "trades.csv").read_text().splitlines()[0]
    assert re.fullmatch(r"# manifest [0-9a-f]{64}", first)


def test_analyze_golden(tape, tmp_path):
    assert main(["analyze", str(tape), "--out-dir", str(tmp_path)]) == 0
    for name in ("table1.csv", "table2.csv"):
        assert body(tmp_path / name) == (GOLDEN / name).read_text()
    assert main(["analyze", str(tape), "--out-dir", str(tmp_path), "--parents"]) == 0
    for name in ("table1-bis.csv", "table2-bis.csv", "fig1-bis.svg", "fig4-bis.svg", "ledger-bis_SIM.csv"):
        assert (tmp_path / name).exists()
    assert body(tmp_path / "table1-bis.csv") == (GOLDEN / "table1-bis.csv").read_text()


def test_outputs_are_reproducible(tape, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["analyze", str(tape), "--out-dir", str(d)]) == 0
    # identical flags except the output directory: compare bodies
    for name in ("table1.csv", "table2.csv", "ledger_SIM.csv"):
        assert body(a / name) == body(b / name)
    c = tmp_path / "c"
    for _ in range(2):
        assert main(["analyze", str(tape), "--out-dir", str(c)]) == 0
        first = {p.name: p.read_bytes() for p in c.glob("*.csv")}
        svg = [l for l in (c / "fig1.svg").read_text().splitlines() if "generated" not in l]
    assert main(["analyze", str(tape), "--out-dir", str(c)]) == 0
    assert first == {p.name: p.read_bytes() for p in c.glob("*.csv")}
    assert svg == [l for l in (c / "fig1.svg").read_text().splitlines() if "generated" not in l]


def test_no_trade_tape_gives_header_only_tables(tmp_path):
    path = tmp_path / "cp.mlob"
    write_tape(path, [Directory(1, "CP"), SpecialDeal(1, 1, 10, 100), HiddenExec(1, 2, Side.BID, 5, 100, 1)])
    assert main(["analyze", str(path), "--out-dir", str(tmp_path)]) == 0
    assert body(tmp_path / "table1.csv") == "symbol,total,with_impact,without_impact,reverse_impact\nCP,0,0,0,0\n"
    assert main(["ingest", str(path), "--out-dir", str(tmp_path)]) == 0
    assert len(body(tmp_path / "trades.csv").splitlines()) == 1
    stats = body(tmp_path / "filter_stats.csv").splitlines()[1]
    assert stats.endswith("1,1,50.00,50.00")


def test_empty_file_is_input_error(tmp_path):
    path = tmp_path / "empty.mlob"
    path.write_bytes(b"")
    assert main(["ingest", str(path), "--out-dir", str(tmp_path)]) == 2
    assert main(["ingest", str(tmp_path / "missing.mlob")]) == 2


def test_test_adverse_on_increments(tmp_path):
    inc = tmp_path / "inc.csv"
    assert main(["simulate", "--diffusion", "--rho", "-0.3", "--trades", "4096", "--seed", "1",
                 "--out", str(inc)]) == 0
    assert main(["test-adverse", str(inc), "--increments", "--out-dir", str(tmp_path)]) == 0
    row = body(tmp_path / "table3.csv").splitlines()[1].split(",")
    assert float(row[1]) > 0.99
    assert body(tmp_path / "buckets_inc.csv").splitlines()[0] == "bucket,C,V,Z,pi"
    assert main(["simulate", "--diffusion", "--rho", "0.3", "--trades", "4096", "--seed", "1",
                 "--out", str(inc)]) == 0
    assert main(["test-adverse", str(inc), "--increments", "--out-dir", str(tmp_path)]) == 0
    assert float(body(tmp_path / "table3.csv").splitlines()[1].split(",")[1]) < 0.01


def test_test_adverse_small_buckets_exit_3(tmp_path):
    path = tmp_path / "tiny.mlob"
    assert main(["simulate", "--trades", "10", "--out", str(path)]) == 0
    assert main(["test-adverse", str(path), "--out-dir", str(tmp_path)]) == 3


def test_parent_orders(tape, tmp_path):
    assert main(["parent-orders", str(tape), "--out-dir", str(tmp_path)]) == 0
    raw = body(tmp_path / "table1.csv").splitlines()[1].split(",")
    grouped = body(tmp_path / "table1-bis.csv").splitlines()[1].split(",")
    assert int(grouped[3]) < int(raw[3])


def test_price_option(capsys):
    assert main(["price-option", "--sigma", "0.2", "--pde"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "method,kind,strike,spot,sigma_eff,price"
    assert out[2] == "closed,call,100.0000,100.0000,0.200000,7.9656"
    assert abs(float(out[1].split(",")[-1]) - 7.9656) < 0.008
    assert main(["price-option", "--sigma", "0.2", "--spread-coef", str(math.sqrt(math.pi / 2))]) == 4


def test_replicate_forward_zero(tmp_path):
    out = tmp_path / "rep.csv"
    assert main(["replicate", "--sigma", "0.2", "--spread-coef", "2", "--kind", "forward",
                 "--steps", "4,16", "--paths", "20", "--out", str(out)]) == 0
    assert body(out).splitlines()[1:] == ["4,0.000000e+00", "16,0.000000e+00"]


def test_limits_study_monotone(tmp_path):
    out = tmp_path / "lim.csv"
    assert main(["limits-study", "--ns", "10,100,1000", "--replications", "30", "--refine", "2",
                 "--out", str(out), "--svg", str(tmp_path / "lim.svg")]) == 0
    errs = [float(r.split(",")[1]) for r in body(out).splitlines()[1:]]
    assert errs[0] > errs[1] > errs[2]
    assert (tmp_path / "lim.svg").read_text().startswith("<svg")


def test_thread_cap_env(tape, tmp_path, monkeypatch):
    monkeypatch.setenv("MLOB_THREADS", "1")
    assert main(["analyze", str(tape), "--out-dir", str(tmp_path)]) == 0
    monkeypatch.setenv("MLOB_THREADS", "zero")
    assert main(["analyze", str(tape), "--out-dir", str(tmp_path)]) == 2
