import dataclasses

import numpy as np
import pytest

from fieldroad.mesh import build_mesh
from fieldroad.model import preset_test_case


@pytest.fixture
def case1():
    return preset_test_case(1)


@pytest.fixture
def small_mesh(case1):
    geom, _, _ = case1
    return build_mesh(geom, 8, 4)


@pytest.fixture
def params22(case1):
    return dataclasses.replace(case1[1], alpha=2.0, beta=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Criterion number -> (passed, detail); printed in the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE_KEY, None)
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(log):
        ok, detail = log[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
