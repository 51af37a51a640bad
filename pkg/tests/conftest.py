from pathlib import Path

import pytest

from specshare.config import ScenarioConfig

DATA = Path(__file__).resolve().parents[1] / "src" / "specshare" / "data"

_acceptance_lines = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome; printed in the terminal summary."""

    def record(number, title, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        _acceptance_lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def micro_config():
    """Three tiny providers with two slots on one channel each: blocking and
    borrowing both happen within a handful of calls."""
    return ScenarioConfig(
        n_providers=3,
        n_nodes=10,
        channels_per_provider=1,
        capacity_users_per_channel=2,
        mean_rates=(0.0025, 0.0012, 0.0006),
        mean_holding_time=120.0,
        horizon_t=600.0,
        sensing_period=5.0,
    )
