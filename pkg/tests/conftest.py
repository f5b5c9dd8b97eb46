import numpy as np
import pytest


GRAD_FLOOR = 1e-4


def rel_err(a, b, floor=GRAD_FLOOR):
    """Array-wise relative error ``max|a - b| / max(max|a|, max|b|, floor)``.

    The floor keeps exactly-zero or tiny gradients (below what central
    differences can resolve) from dominating; under it the check becomes an
    absolute one at ``1e-6 * floor``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), floor)
    return np.max(np.abs(a - b), initial=0.0) / scale


def numeric_grad(f, p, h=1e-5):
    """Central differences of scalar ``f()`` with respect to array ``p`` (mutated in place)."""
    g = np.zeros_like(p)
    it = np.nditer(p, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = p[i]
        p[i] = old + h
        up = f()
        p[i] = old - h
        down = f()
        p[i] = old
        g[i] = (up - down) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance reporting: one PASS/FAIL line per marked criterion, printed at the end of the run
_VERDICTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    key = mark.args
    ok = report.passed if report.when == "call" else not report.failed
    if report.when == "call" or not ok:
        _VERDICTS[key] = _VERDICTS.get(key, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for (number, label), ok in sorted(_VERDICTS.items()):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {label}")
