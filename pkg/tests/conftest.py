import pytest

_outcomes: dict[int, tuple[str, list[str]]] = {}
_details: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


def _criterion(item):
    m = item.get_closest_marker("criterion")
    return None if m is None else (m.args[0], m.args[1])


def pytest_runtest_makereport(item, call):
    c = _criterion(item)
    if c is None or call.when == "teardown" or (call.when == "setup" and call.excinfo is None):
        return
    n, title = c
    # a failing fixture (setup phase) fails the criterion as well
    ok = call.excinfo is None
    prev, _ = _outcomes.get(n, ("PASS", []))
    _outcomes[n] = ("PASS" if ok and prev == "PASS" else "FAIL", [title])


@pytest.fixture
def detail(request):
    """Record a line of measured values shown next to the criterion's verdict."""
    c = _criterion(request.node)

    def add(line: str):
        if c is not None:
            _details.setdefault(c[0], []).append(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        verdict, (title,) = _outcomes[n]
        tr.write_line(f"criterion {n}: {verdict}  {title}")
        for d in _details.get(n, []):
            tr.write_line(f"    {d}")
