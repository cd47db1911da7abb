import pytest

_criteria: dict[int, tuple[str, str, float | None]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        runtime = dict(item.user_properties).get("runtime_s")
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _criteria[number] = (title, status, runtime)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, runtime = _criteria[number]
        timing = "" if runtime is None else f"  [{runtime * 1e3:.3f} ms]"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}{timing}")
