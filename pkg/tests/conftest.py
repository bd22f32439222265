import numpy as np
import pytest
from hypothesis import settings

from lqsdwsn.channel import ChannelParams
from lqsdwsn.lqpredict import generate_dataset, train

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def params():
    return ChannelParams()


@pytest.fixture(scope="session")
def small_model(params):
    """Logistic model on 30k samples; good enough for protocol-level tests."""
    ds = generate_dataset(params, 300, 110, 10, np.random.default_rng(11))
    return train(ds, "logistic")


_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def criterion(request):
    """Record one acceptance line: ``criterion(label, ok, detail)``."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(label: str, ok: bool, detail: str) -> bool:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        print(lines[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
