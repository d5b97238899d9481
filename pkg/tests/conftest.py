import pytest

from mrphase.domain import ClusterProfile
from mrphase.profiler import build_grid, run_profile
from mrphase.regress import fit_phase_models


@pytest.fixture(scope="session")
def quiet_cluster():
    return ClusterProfile(container_count=8, noise_sigma=0.0)


@pytest.fixture(scope="session")
def noisy_cluster():
    return ClusterProfile(container_count=8, noise_sigma=0.05)


@pytest.fixture(scope="session")
def exact_samples(quiet_cluster):
    return run_profile(quiet_cluster, build_grid(seed=42))


@pytest.fixture(scope="session")
def noisy_models(noisy_cluster):
    return fit_phase_models(run_profile(noisy_cluster, build_grid(seed=42)))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
