import time

import numpy as np
import pytest

from minsurf.bjorling import circle_with_contact_angle, solve

ANGLES = (np.pi / 6, np.pi / 3, np.pi / 2)

# criterion number -> list of (label, passed, detail); filled by test_acceptance
ACCEPTANCE_LINES = {}


def record(number, label, passed, detail=""):
    line = f"criterion {number} [{label}]: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.setdefault(number, []).append(line)
    print(line)
    return passed


@pytest.fixture(scope="session")
def catenoids():
    """Björling catenoid patches at 256x64 over v in [-1, 1], keyed by angle."""
    return {th: solve(circle_with_contact_angle(th, v_range=(-1.0, 1.0), resolution=(256, 64)))
            for th in ANGLES}


SUITE_LIMIT_SECONDS = 60.0
_started = []


def pytest_sessionstart(session):
    _started.append(time.perf_counter())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    elapsed = time.perf_counter() - _started[0]
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        for line in ACCEPTANCE_LINES[n]:
            terminalreporter.write_line(line)
    status = "PASS" if elapsed < SUITE_LIMIT_SECONDS else "FAIL"
    terminalreporter.write_line(f"criterion 7 [full suite runtime]: {status} "
                                f"({elapsed:.1f} s, limit {SUITE_LIMIT_SECONDS:.0f} s)")
