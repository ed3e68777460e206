import numpy as np
import pytest

from featprog.series import FeatureSeries, make_panel

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fs(values, name="s", order=0, warmup=0):
    """FeatureSeries from a list where None marks a missing sample."""
    present = np.array([v is not None for v in values], dtype=bool)
    vals = np.array([np.nan if v is None else float(v) for v in values])
    return FeatureSeries(name, order, vals, present, warmup, "raw")


def price_panel(rng, n=5, T=500):
    """Positive random-walk panel (no zeros, so ratios are always defined)."""
    return make_panel(100 * np.exp(np.cumsum(rng.normal(0, 0.02, (n, T)), axis=1)))
