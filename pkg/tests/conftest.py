import numpy as np
import pytest

from latentdiag.synth import SynthSpec, gen_axis_aligned, gen_null, gen_rotated


@pytest.fixture(scope="session")
def null_10k():
    return gen_null(SynthSpec(10000, 5, 24, 0.0, seed=11))


@pytest.fixture(scope="session")
def aligned_10k():
    return gen_axis_aligned(SynthSpec(10000, 5, 5, 0.0, seed=5))


@pytest.fixture(scope="session")
def rotated_10k():
    return gen_rotated(SynthSpec(10000, 5, 5, 0.0, seed=5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
