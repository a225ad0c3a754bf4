import time

import pytest

from uqbench.toy1d import ToyConfig, run_toy


@pytest.fixture(scope="session")
def toy_run_seed0():
    """The default-config seed-0 benchmark run, shared across test modules."""
    t0 = time.perf_counter()
    run = run_toy(ToyConfig(seed=0))
    run.report["_runtime_seconds"] = time.perf_counter() - t0
    return run
