import numpy as np
import pytest

from ehgtensor.simulator import SimConfig, simulate
from ehgtensor.tensor import tucker_reconstruct


@pytest.fixture(scope="session")
def default_sim():
    return simulate(SimConfig(seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def low_rank_plus_spikes(seed, dims=(8, 8, 60), ranks=(2, 2, 3), fraction=0.005, height=10.0):
    """Noiseless Tucker tensor plus sparse +-height*std spikes; returns (x, s)."""
    rng = np.random.default_rng(seed)
    core = rng.standard_normal(ranks)
    factors = [rng.standard_normal((d, r)) for d, r in zip(dims, ranks)]
    x = tucker_reconstruct(core, *factors)
    s = np.zeros(dims)
    idx = rng.choice(x.size, int(fraction * x.size), replace=False)
    s.flat[idx] = rng.choice([-1.0, 1.0], idx.size) * height * np.std(x)
    return x, s


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
