import pytest

from selectmax.model import make_params
from selectmax.montecarlo import BatchConfig, paired_samples_for_independence, run_batch

SEED = 42
N_BIG = 10**6


@pytest.fixture(scope="session")
def params_k3():
    return make_params(1.0, 0.5, 3)


@pytest.fixture(scope="session")
def batch_k3(params_k3):
    return run_batch(BatchConfig(params_k3, N_BIG, SEED, record_full=True))


@pytest.fixture(scope="session")
def columns_k3(batch_k3):
    return paired_samples_for_independence(batch_k3[1])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
