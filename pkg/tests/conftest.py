import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion id -> list of (check name, passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


@pytest.fixture
def record_criterion():
    def rec(cid, name, ok, detail=""):
        ACCEPTANCE.setdefault(cid, []).append((name, bool(ok), detail))
        return ok
    return rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in range(1, 11):
        checks = ACCEPTANCE.get(cid)
        if not checks:
            terminalreporter.write_line(f"criterion {cid:>2} NOT RUN")
            continue
        ok = all(c[1] for c in checks)
        detail = " | ".join(f"{'' if c[1] else 'FAILED '}{c[0]}: {c[2]}" for c in checks)
        terminalreporter.write_line(f"criterion {cid:>2} {'PASS' if ok else 'FAIL'}  {detail}")
