import pytest

# criterion number -> (passed, description); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record the outcome of one acceptance criterion.

    Usage: ``acceptance(n, "description")`` at the top of the test; the
    result is set from the test outcome when the test finishes.
    """
    entry = {}

    def register(number, description):
        entry.update(number=number, description=description)

    yield register
    if entry:
        rep = getattr(request.node, "rep_call", None)
        ACCEPTANCE[entry["number"]] = (rep is not None and rep.passed, entry["description"])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, description = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {description}")
