import time

import pytest

_VERDICTS = {}


class Criterion:
    """Collects the sub-checks of one acceptance criterion."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.failures = []
        self.notes = []
        self.start = time.perf_counter()

    def check(self, label, ok, detail=""):
        if not ok:
            self.failures.append(f"{label} {detail}".strip())
        elif detail:
            self.notes.append(f"{label} {detail}")

    def runtime(self, budget):
        elapsed = time.perf_counter() - self.start
        self.check("runtime", elapsed <= budget, f"{elapsed:.2f}s (budget {budget}s)")
        return elapsed

    def finish(self):
        _VERDICTS[self.number] = (self.title, not self.failures, self.failures or self.notes)
        assert not self.failures, "; ".join(self.failures)


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    c = Criterion(number, title)
    _VERDICTS[number] = (title, False, ["did not complete"])
    yield c


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, ok, info = _VERDICTS[number]
        line = f"{'PASS' if ok else 'FAIL'}  {number:>2}. {title}"
        if info:
            line += "  [" + "; ".join(info) + "]"
        terminalreporter.write_line(line)
