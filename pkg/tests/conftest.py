import numpy as np
import pytest

from hirota_dressing.rational import RationalDivisorFunction, SheetedPoint


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _far(z, pts, gap):
    return all(abs(z - p) > gap for p in pts)


def random_divisor(rng, n_points, max_mult=3, radius=1.0, gap=0.2, avoid=None, budget=8):
    """Balanced g on sheet 0 with ``n_points`` zeros and as many poles (mults summed
    equally), all at least ``gap`` apart and inside ``radius``."""
    taken = [p.value for p, _ in avoid.divisor] if avoid is not None else []
    mults = [int(m) for m in rng.integers(1, max_mult + 1, n_points)]
    while 2 * sum(mults) > budget:
        mults[int(np.argmax(mults))] -= 1
    roots = []
    while len(roots) < 2 * n_points:
        z = complex(*rng.uniform(-radius, radius, 2))
        if abs(z) < radius and _far(z, taken + roots, gap):
            roots.append(z)
    zeros = [(roots[i], mults[i]) for i in range(n_points)]
    poles = [(roots[n_points + i], mults[i]) for i in range(n_points)]
    return RationalDivisorFunction.from_roots(zeros, poles)


def random_point(rng, g=None, radius=1.5, gap=0.1):
    pts = [p.value for p, _ in g.divisor] if g is not None else []
    while True:
        z = complex(*rng.uniform(-radius, radius, 2))
        if _far(z, pts, gap):
            return SheetedPoint(0, z)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
