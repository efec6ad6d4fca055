from __future__ import annotations

import json
from pathlib import Path

import pytest

from toolshap.agents.scripted import AgentScript, ScriptedAgent
from toolshap.config import bundled_path
from toolshap.core import ToolCatalog

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def full_catalog() -> ToolCatalog:
    return ToolCatalog.load(bundled_path("catalog.json"))


@pytest.fixture(scope="session")
def script() -> AgentScript:
    return AgentScript.load(bundled_path("script.json"))


@pytest.fixture
def core_catalog(full_catalog) -> ToolCatalog:
    return full_catalog.subset(["Calculator", "QueryStock", "Wiki"])


@pytest.fixture
def scripted(core_catalog, script) -> ScriptedAgent:
    return ScriptedAgent(core_catalog, script)


@pytest.fixture
def wire_fixture() -> dict:
    return json.loads((FIXTURES / "two_turn_calculator.json").read_text())


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
