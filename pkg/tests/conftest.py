import math

import numpy as np
import pytest

from besselinv.potential import BasisPotential, PiecewiseConstant


@pytest.fixture(scope="session")
def q_linear():
    return BasisPotential("polynomial", (0.0, 1.0))


@pytest.fixture(scope="session")
def q_step():
    return PiecewiseConstant((0.0, 0.3, 0.7, 1.0), (2.0, -1.5, 0.5))


@pytest.fixture(scope="session")
def q_cos():
    return BasisPotential("cosine", (0.5, -1.0, 0.75))


@pytest.fixture(scope="session")
def pair_half():
    """``q != qh`` that agree on (1/2, 1)."""
    q = PiecewiseConstant((0.0, 0.25, 0.5, 1.0), (2.0, -1.0, 0.0))
    qh = PiecewiseConstant.constant(0.0)
    return q, qh


def tan_root(k: int) -> float:
    """k-th positive root of tan z = z, by bisection on (k pi, k pi + pi/2)."""
    lo, hi = k * math.pi + 1e-12, k * math.pi + math.pi / 2 - 1e-12
    f = lambda z: math.sin(z) - z * math.cos(z)
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; printed in the summary."""

    def emit(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[number])
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
