import numpy as np
import pytest

from warpgof.deformation import DeformationFamily


class TanhFamily(DeformationFamily):
    """``x + lam tanh(x)``: nonlinear, increasing for lam > -1, no closed-form inverse."""

    name = "tanh"
    param_dim = 1
    identity = (0.0,)
    default_lower = (-0.5,)
    default_upper = (2.0,)

    def value(self, lam, x):
        return np.asarray(x, dtype=float) + lam[0] * np.tanh(x)

    def dx(self, lam, x):
        return 1.0 + lam[0] / np.cosh(x) ** 2

    def dlam(self, lam, x):
        return np.tanh(np.asarray(x, dtype=float))[None]

    def dlam2(self, lam, x):
        return np.zeros((1, 1) + np.shape(x))


@pytest.fixture
def tanh_family():
    return TanhFamily()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class CurvedFamily(DeformationFamily):
    """``x + lam x + lam^2 tanh(x)``: second parameter derivative is nonzero."""

    name = "curved"
    param_dim = 1
    identity = (0.0,)
    default_lower = (-0.5,)
    default_upper = (1.0,)

    def value(self, lam, x):
        x = np.asarray(x, dtype=float)
        return x + lam[0] * x + lam[0] ** 2 * np.tanh(x)

    def dx(self, lam, x):
        return 1.0 + lam[0] + lam[0] ** 2 / np.cosh(x) ** 2

    def dlam(self, lam, x):
        x = np.asarray(x, dtype=float)
        return (x + 2 * lam[0] * np.tanh(x))[None]

    def dlam2(self, lam, x):
        return (2 * np.tanh(np.asarray(x, dtype=float)))[None, None]


@pytest.fixture
def curved_family():
    return CurvedFamily()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
