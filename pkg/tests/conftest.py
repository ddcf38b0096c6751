from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import settings

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "fwscope" / "data" / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(rows, name="in.jsonl") -> Path:
        path = tmp_path / name
        path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
        return path

    return _write


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
