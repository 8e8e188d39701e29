import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_vecmat(rng, n, d, complex_=True):
    X = rng.standard_normal((n, n, d))
    if complex_:
        X = X + 1j * rng.standard_normal((n, n, d))
    return X


def random_unitary(rng, n, complex_=True):
    Z = rng.standard_normal((n, n))
    if complex_:
        Z = Z + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_contraction(rng, n, complex_=True):
    A = rng.standard_normal((n, n)) + (1j * rng.standard_normal((n, n)) if complex_ else 0)
    return A / (np.linalg.norm(A, 2) * rng.uniform(1.0, 2.0))


def angle_grid_opt(objective, points, grid=20000):
    """Best single direction in the plane on an angle grid."""
    th = np.linspace(0, np.pi, grid, endpoint=False)
    return max(objective(points, np.array([[np.cos(a), np.sin(a)]])) for a in th)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
