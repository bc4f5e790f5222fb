import pytest

# (criterion, title, ok, detail) in recording order
_RESULTS = []
_TITLES = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance check: ``criterion(number, title, ok, detail)``."""

    def record(number, title, ok, detail=""):
        _TITLES[number] = title
        _RESULTS.append((number, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_TITLES):
        rows = [(ok, d) for n, ok, d in _RESULTS if n == number]
        ok = all(r[0] for r in rows)
        bad = [d for r_ok, d in rows if not r_ok]
        shown = bad if bad else [d for _, d in rows if d][:1]
        tr.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {_TITLES[number]}"
                      + (f"  [{'; '.join(shown)}]" if shown else ""))
