import pytest

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    props = dict(item.user_properties)
    if "criterion" not in props:
        return
    n = props["criterion"]
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _CRITERIA[n] = (rep.passed, props.get("title", item.name), props.get("elapsed"), props.get("limit"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, title, elapsed, limit = _CRITERIA[n]
        timing = "" if elapsed is None else f" [{elapsed:.3f} s / {limit} s]"
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}{timing}")
