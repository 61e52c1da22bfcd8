import numpy as np
import pytest

from mlob.simgen import SimConfig, generate_tape
from mlob.tape import extract_trades

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
        _ACCEPTANCE[name] = (report.outcome.upper(), detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[1][2:])):
        outcome, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{name}: {outcome}  {detail}")


def sim_tape(**kw):
    """Extracted single-symbol trade tape plus ground truth."""
    messages, truth = generate_tape(SimConfig(**kw))
    tapes, stats = extract_trades(messages)
    (tape,) = tapes.values()
    return tape, truth, messages, stats


@pytest.fixture(scope="session")
def sim1000():
    return sim_tape(seed=11, n_trades=1000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
