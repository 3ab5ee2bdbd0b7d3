from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("camnet", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("camnet")


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("camnet") / "data" / f"{name}.json"))


def load_fixture(name: str):
    return json.loads(fixture_path(name).read_text())


@pytest.fixture(scope="session")
def bnr_network():
    from camnet.wkb.export import load_network

    return load_network(fixture_path("bnr_sl3_network"))


@pytest.fixture(scope="session")
def three_pole_network():
    from camnet.wkb.export import load_network

    return load_network(fixture_path("three_pole_gl2_network"))


@pytest.fixture(scope="session")
def bnr_gl3_network():
    from camnet.wkb.export import load_network

    return load_network(fixture_path("bnr_gl3_network"))


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter) -> None:
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
