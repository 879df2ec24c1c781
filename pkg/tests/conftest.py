import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# -- acceptance criteria report -------------------------------------------------

import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)_")


def _lines(config):
    if not hasattr(config, "_criterion_lines"):
        config._criterion_lines = {}
    return config._criterion_lines


@pytest.fixture
def criterion(request):
    """``criterion(ok, detail, elapsed=None, limit=None)`` records and asserts one criterion."""
    k = int(_CRITERION.search(request.node.name).group(1))

    def record(ok, detail, elapsed=None, limit=None):
        timed = elapsed is not None and limit is not None
        ok = bool(ok) and (not timed or elapsed < limit)
        clock = f" [{elapsed:.2f}s < {limit:g}s]" if timed else ""
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}{clock}"
        _lines(request.config)[k] = line
        assert ok, line

    return record


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m and report.when == "call" and report.failed:
        lines = _lines(pytest_runtest_logreport.config)
        lines.setdefault(int(m.group(1)), f"criterion {int(m.group(1)):2d}: FAIL  (raised before reporting)")


def pytest_configure(config):
    pytest_runtest_logreport.config = config


def pytest_terminal_summary(terminalreporter, config):
    lines = _lines(config)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
