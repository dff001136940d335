from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from phasepop.config import load_config

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> list of (label, passed)
ACCEPTANCE: dict[int, list[tuple[str, bool]]] = {}


def scenario_path(name: str) -> Path:
    return SCENARIOS / f"{name}.json"


@pytest.fixture(scope="session")
def scenario():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_config(scenario_path(name))
        return cache[name]
    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        items = ACCEPTANCE[num]
        ok = all(p for _, p in items)
        detail = "; ".join(f"{label}{'' if p else ' [FAIL]'}" for label, p in items)
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
