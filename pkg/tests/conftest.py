import re
from collections import OrderedDict

import pytest

# criterion -> list of (part, passed, detail)
ACCEPTANCE = OrderedDict()


@pytest.fixture
def record():
    """Record one part of an acceptance criterion and print its verdict."""

    def _record(criterion: int, part: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
        print(f"C{criterion} [{part}] {'PASS' if passed else 'FAIL'}: {detail}")
        return bool(passed)

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_c(\d+)_", item.name)
    # a test that errors before recording still fails its criterion
    if m and rep.failed and call.excinfo is not None and not call.excinfo.errisinstance(AssertionError):
        ACCEPTANCE.setdefault(int(m.group(1)), []).append(
            (item.name.split("[")[-1].rstrip("]"), False, f"error: {call.excinfo.typename}"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {d}" for name, _, d in parts)
        terminalreporter.write_line(f"C{c} {'PASS' if ok else 'FAIL'}  {detail}")
