import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Record a (possibly partial) outcome of an acceptance criterion."""

    def _record(number, ok, detail):
        prev_ok, prev = ACCEPTANCE.get(number, (True, []))
        ACCEPTANCE[number] = (prev_ok and bool(ok), prev + [detail])

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, details = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if ok else 'FAIL'} ({'; '.join(details)})")
