import pytest

from discagg.cluster import run_ensemble

ENSEMBLE_STEPS = 10**5
ENSEMBLE_SEEDS = 100

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ensemble():
    """100 clusters of 10^5 steps, seeds 0..99 (replica r of base seed 0)."""
    return run_ensemble(ENSEMBLE_STEPS, range(ENSEMBLE_SEEDS))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(ACCEPTANCE_LINES, key=lambda r: int(r[0][1:])):
        terminalreporter.write_line(f"{name:>4} {status:<7} {detail}")
