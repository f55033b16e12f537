import numpy as np
import pytest

from fluxchain.circuit import reference_params, solve_fluxonium, solve_qubit


@pytest.fixture(scope="session")
def paper_params():
    return reference_params()


@pytest.fixture(scope="session")
def paper_spec(paper_params):
    return solve_fluxonium(paper_params)


@pytest.fixture(scope="session")
def paper_site(paper_params):
    return solve_qubit(paper_params)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
