import math

import pytest
from hypothesis import settings

from nli4d.link import Amplification, FiberSpec, LinkSpec, dispersion_to_beta2

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

SYMBOL_RATE = 32e9
T = 1.0 / SYMBOL_RATE


@pytest.fixture(scope="session")
def smf():
    """Standard single-mode fiber at 1550 nm."""
    return FiberSpec(gamma=1.3e-3, beta2=dispersion_to_beta2(16.5), alpha_db_per_km=0.2)


@pytest.fixture(scope="session")
def long_link(smf):
    """10 x 100 km with lumped amplification."""
    return LinkSpec(smf, 100e3, 10, Amplification.LUMPED, 5.0)


@pytest.fixture(scope="session")
def desk_link(smf):
    """2 x 100 km with lumped amplification."""
    return LinkSpec(smf, 100e3, 2, Amplification.LUMPED, 5.0)


@pytest.fixture(scope="session")
def short_link(smf):
    """A single 20 km span; cheap for lattice quadrature."""
    return LinkSpec(smf, 20e3, 1)


@pytest.fixture(scope="session")
def zero_disp_link(smf):
    """Lossless single span without dispersion."""
    return LinkSpec(FiberSpec(smf.gamma, 0.0, 0.0), 10e3, 1, Amplification.IDEAL_DISTRIBUTED)


def db(x: float) -> float:
    return 10 * math.log10(x)


# One line per acceptance criterion, printed in the terminal summary.
_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record a criterion outcome (``None`` marks a skip); returns it so tests can assert on it."""

    def record(label: str, passed: bool | None, detail: str) -> bool | None:
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        _ACCEPTANCE.append(f"[{status}] {label}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
