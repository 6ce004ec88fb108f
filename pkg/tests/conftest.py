import random
import sys

import pytest

from banzkp.crypto import ProtocolParams


@pytest.fixture(scope="session")
def params():
    # smallest legal group; keeps property runs fast
    return ProtocolParams.generate(1096)


@pytest.fixture(scope="session")
def params2048():
    return ProtocolParams.generate(2048)


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
