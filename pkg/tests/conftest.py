import math
from pathlib import Path

import pytest

from neighbourtext import kernels

FIXTURES = Path(__file__).parent / "fixtures"

# criterion -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    """Every importable kernel backend."""
    return kernels.available_backends()[request.param]


def oracle_haversine(lat1, lon1, lat2, lon2, radius=6371.0):
    """Reference great-circle distance, written out independently of the package."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlmb = math.radians(lon2) - math.radians(lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlmb / 2) ** 2
    return 2 * radius * math.asin(math.sqrt(min(1.0, a)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
