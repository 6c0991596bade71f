import numpy as np
import pytest

from drawdown import GridConfig, build_lattice, compute_boundaries, dual_to_primal, solve_v
from drawdown.model import validate_params

REFERENCE = dict(mu=0.06, sigma=0.2, delta=0.6, p=0.5, alpha=0.5, T=1.0)


@pytest.fixture(scope="session")
def ref_params():
    return validate_params(REFERENCE)


@pytest.fixture(scope="session")
def small_lattice(ref_params):
    return build_lattice(ref_params, GridConfig(n_s=200, n_tau=100))


@pytest.fixture(scope="session")
def small_solution(ref_params, small_lattice):
    return solve_v(ref_params, small_lattice)


@pytest.fixture(scope="session")
def small_boundaries(small_solution):
    return compute_boundaries(small_solution)


@pytest.fixture(scope="session")
def small_policy(small_solution, small_boundaries):
    return dual_to_primal(small_solution, small_boundaries)
