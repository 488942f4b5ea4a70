import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def note(request):
    """Attach a one-line measurement to the criterion's summary line."""
    notes = []
    request.node.user_properties.append(("notes", notes))
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    notes = dict(item.user_properties).get("notes", [])
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        detail = "; ".join(notes)
        if rep.skipped and isinstance(rep.longrepr, tuple):
            detail = rep.longrepr[2].removeprefix("Skipped: ")
        _RESULTS[number] = (status, title, detail, getattr(rep, "duration", 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail, dur = _RESULTS[number]
        line = f"[{status}] criterion {number}: {title} ({dur:.1f} s)"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
