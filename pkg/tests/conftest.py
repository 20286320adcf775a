import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from layoutsearch.scene_model import default_library  # noqa: E402

BEDROOM_TEXT = (
    "A picture is above a bed. "
    "A night stand is on the right side of the head of the bed. "
    "A lamp is on the night stand. "
    "Another picture is above the lamp. "
    "A dresser is on the left side of the head of the bed."
)
BEDROOM_TRIPLETS = [
    "(picture-0, bed-0, above)",
    "(night-stand-0, bed-0:head, right)",
    "(lamp-0, night-stand-0, on)",
    "(picture-1, lamp-0, above)",
    "(dresser-0, bed-0:head, left)",
]

# criterion number -> (title, outcome, detail)
_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion check")


@pytest.fixture(scope="session")
def library():
    return default_library()


@pytest.fixture
def note(request):
    """Attach a measured value to the acceptance line of the current test."""
    marker = request.node.get_closest_marker("criterion")

    def _note(text: str) -> None:
        if marker is not None:
            entry = _CRITERIA.setdefault(marker.args[0], [marker.args[1], None, []])
            entry[2].append(text)
    return _note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    n, title = marker.args[0], marker.args[1]
    entry = _CRITERIA.setdefault(n, [title, None, []])
    ok = rep.passed
    entry[1] = ok if entry[1] is None else (entry[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, details = _CRITERIA[n]
        status = "PASS" if ok else "FAIL"
        extra = f"  ({'; '.join(details)})" if details else ""
        terminalreporter.write_line(f"[{status}] criterion {n}: {title}{extra}")
