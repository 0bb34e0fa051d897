"""Shared heavy runs for the acceptance suite and the criterion summary."""

import time

import pytest

from kwplane.discretize import Schedule
from kwplane.geometry import DecayCertificate, PowerLaw
from kwplane.solver import continue_epsilon, family_problem, solve_family

FAMILY_K = PowerLaw.term(-1.0, -3.0)
FAMILY_CERT = DecayCertificate(4.0, 3.0)
FAMILY_KS = (1.0, 1.25, 1.5, 1.75)

_criteria = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    _criteria[number] = line
    print(line)


@pytest.fixture(scope="session")
def radial_run():
    """k = 1 on a disk of radius 20 with 401 nodes, every ladder iterate kept."""
    p = family_problem(FAMILY_K, FAMILY_CERT, 1.0)
    s = Schedule(radii=(20.0,), n=401, shape="disk")
    t0 = time.perf_counter()
    rep = continue_epsilon(p, s.grid(20.0), s, keep_iterates=True)
    return p, rep, time.perf_counter() - t0


@pytest.fixture(scope="session")
def family_run():
    """Four family members on the default radius ladder (5, 10, 20, 40), 401 nodes."""
    return solve_family(FAMILY_K, FAMILY_CERT, FAMILY_KS, Schedule())


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(_criteria[n])
