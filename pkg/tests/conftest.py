import numpy as np
import pytest

from dwdegroot.netgen import EliteGrassrootsSpec

# One acceptance line per criterion, filled in by test_acceptance.py.
ACCEPTANCE = {}

# Reference specs at n = 1000, one per regime case.
CASE1 = (200, 800, 2, 0.4, 0.2)
CASE2 = (400, 200, 4, 0.5, 0.3)
CASE3 = (200, 400, 4, 0.3, 0.1)


@pytest.fixture
def case_specs():
    return {1: EliteGrassrootsSpec(*CASE1), 2: EliteGrassrootsSpec(*CASE2), 3: EliteGrassrootsSpec(*CASE3)}


def random_eg_specs(count, seed, max_n=1000, min_n=60):
    """Elite-Grassroots specs cycling through cases 1, 2, 3 (and p < q variants)."""
    rng = np.random.default_rng(seed)
    specs = []
    while len(specs) < count:
        want = len(specs) % 3 + 1
        m = 2 if want == 1 else int(rng.integers(3, 7))
        n1 = int(rng.integers(10, 400))
        n2 = int(rng.integers(10, 400))
        if n1 == n2 or not min_n <= n1 + (m - 1) * n2 <= max_n:
            continue
        p, q = (float(x) for x in rng.uniform(0.05, 0.9, size=2))
        if abs(p - q) < 0.02:
            continue
        spec = EliteGrassrootsSpec(n1, n2, m, round(p, 3), round(q, 3))
        case = 1 if m == 2 else (2 if spec.d1 > spec.d2 else 3)
        if case == want:
            specs.append(spec)
    return specs


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
