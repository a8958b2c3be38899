import sys

import numpy as np
import pytest

from inputagg import _backend


@pytest.fixture(params=_backend.available())
def kernels(request):
    return _backend.load(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, cond=100.0):
    """SPD matrix with log-uniform spectrum spanning ``cond``."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = np.exp(rng.uniform(0.0, np.log(cond), d))
    return (Q * w) @ Q.T


def random_symmetric(rng, d):
    A = rng.standard_normal((d, d))
    return A + A.T


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
