import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"
sys.path.insert(0, str(Path(__file__).resolve().parent))

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


class CriterionLog:
    def record(self, number: int, title: str, ok: bool, detail: str = "") -> bool:
        _CRITERIA[number] = (title, bool(ok), detail)
        status = "PASS" if ok else "FAIL"
        print(f"ACCEPTANCE {number} {status}: {title} ({detail})")
        return bool(ok)


@pytest.fixture(scope="session")
def criteria() -> CriterionLog:
    return CriterionLog()


@pytest.fixture(scope="session")
def models_dir() -> Path:
    return MODELS


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {title} ({detail})")
