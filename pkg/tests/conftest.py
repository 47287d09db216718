import numpy as np
import pytest

from braidrecon import ProjectionSpec, vertical_params


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def spec():
    return ProjectionSpec(256, 512)


@pytest.fixture(scope="session")
def truth(spec):
    return vertical_params(spec, n_points=200, a=20.0, b=10.0, shift_z=50.0).with_noise(0)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(results):
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
