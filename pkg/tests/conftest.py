import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

HERE = os.path.dirname(os.path.abspath(__file__))


def tsplib_dir():
    """Where TSPLIB .sop files are looked up: $SOPDD_TSPLIB_DIR, then tests/data/tsplib."""
    env = os.environ.get("SOPDD_TSPLIB_DIR")
    if env:
        return env
    return os.path.join(HERE, "data", "tsplib")


def tsplib_path(name):
    d = tsplib_dir()
    for cand in (name + ".sop", name.upper() + ".sop", name.lower() + ".sop"):
        p = os.path.join(d, cand)
        if os.path.isfile(p):
            return p
    return None


@pytest.fixture
def require_tsplib():
    def get(name):
        p = tsplib_path(name)
        if p is None:
            pytest.fail(
                f"TSPLIB instance {name}.sop not found in {tsplib_dir()} "
                "(set SOPDD_TSPLIB_DIR); this check cannot run without it"
            )
        return p

    return get


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
