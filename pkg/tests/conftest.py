import time

import pytest

from specsense.harness import ExperimentConfig, run_sweep

_ACCEPTANCE = []


def record_criterion(name, passed, detail):
    _ACCEPTANCE.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


# the paired sweep on the default scenario, shared by harness and acceptance tests
REFERENCE_SWEEP = dict(trials_per_point=1000, stnr_grid=tuple(range(0, 81, 5)), scheme="both", master_seed=0)


@pytest.fixture(scope="session")
def reference_sweep(tmp_path_factory):
    cfg = ExperimentConfig(**REFERENCE_SWEEP)
    path = tmp_path_factory.mktemp("sweep") / "results.csv"
    t0 = time.perf_counter()
    result = run_sweep(cfg, path)
    elapsed = time.perf_counter() - t0
    return cfg, result, path, elapsed
