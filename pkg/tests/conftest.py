import numpy as np
import pytest

from iscc_partition.beampattern import CovarianceCache
from iscc_partition.harness import RunOptions, prepare_trial, trial_seed
from iscc_partition.profile import alexnet
from iscc_partition.scenario import Scenario


@pytest.fixture(scope="session")
def cov_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("covariances"))


@pytest.fixture(scope="session")
def run_opts(cov_dir):
    return RunOptions(cache_dir=cov_dir)


@pytest.fixture(scope="session")
def small_scenario():
    return Scenario(K=2, profile=alexnet().truncated(5))


@pytest.fixture(scope="session")
def small_trial(small_scenario, run_opts):
    """Evaluator and CE seed for a K=2, L=5 trial."""
    return prepare_trial(small_scenario, trial_seed(0, 0), run_opts)


@pytest.fixture(scope="session")
def default_target(cov_dir):
    sc = Scenario()
    s = sc.sensing[0]
    return CovarianceCache(cov_dir).get(np.deg2rad(s.target_angles_deg), np.deg2rad(s.mainlobe_width_deg), sc.tx_power_w, sc.Nt)


def random_hpd(rng, n, scale=1.0):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (A @ A.conj().T + n * np.eye(n))


# -- acceptance report ------------------------------------------------------
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance_report():
    """Record ``(passed, detail)`` per acceptance criterion number."""

    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (passed, detail)
        print(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}")
