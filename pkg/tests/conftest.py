import numpy as np
import pytest

from rtboussinesq.params import PhysicalParams, linear_profile, tanh_profile
from rtboussinesq.spectral1d import build_basis, build_grid


@pytest.fixture(scope="session")
def basis96():
    return build_basis(build_grid(96), 64)


@pytest.fixture(scope="session")
def basis64():
    return build_basis(build_grid(64), 42)


@pytest.fixture(scope="session")
def unit_params():
    return PhysicalParams(1.0, 1.0)


@pytest.fixture(scope="session")
def slip_params():
    return PhysicalParams(1.0, 1.0, -1.0, -1.0)


@pytest.fixture(scope="session")
def falling():
    return linear_profile(-1.0)


@pytest.fixture(scope="session")
def layer():
    return tanh_profile(0.5, 0.15, -1.0)


def free_slip_lambda0(xi, mu=1.0, g=1.0, beta=1.0):
    """Closed-form growth rate of the sin(πx₂) mode for θ̄ = -βx₂, free slip."""
    kappa = np.pi**2 + xi**2
    return 0.5 * (-mu * kappa + np.sqrt(mu**2 * kappa**2 + 4 * g * beta * xi**2 / kappa))


_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
