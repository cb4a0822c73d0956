import pytest

from sgdlab.noise import NoiseOracle
from sgdlab.objective import make_piecewise

# criterion -> {sub-check: (passed, detail)}
ACCEPTANCE = {}


def record(criterion: int, sub: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, {})[sub] = (bool(passed), detail)
    return bool(passed)


@pytest.fixture(scope="session")
def f():
    return make_piecewise()


@pytest.fixture
def mult10():
    return NoiseOracle("multiplicative", b=10.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        subs = ACCEPTANCE[n]
        ok = all(p for p, _ in subs.values())
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({sum(p for p, _ in subs.values())}/{len(subs)} checks)")
        for name, (p, detail) in subs.items():
            terminalreporter.write_line(f"    [{'pass' if p else 'FAIL'}] {name}: {detail}")

