import pytest

from stefan_lab.exact_stefan import solve_parameters
from stefan_lab.model import REFERENCE_PARAMETERS, StefanProblem
from stefan_lab.reconstruction import FieldEvaluator

# Reference root of the transcendental system. Frozen from the exact solver and
# confirmed independently by the shooting solver (agreement ~1e-10 relative).
REF_OMEGA2 = 3.8888103713780473
REF_MU = 0.10325306289121239


@pytest.fixture(scope="session")
def ref_problem():
    return StefanProblem(REFERENCE_PARAMETERS)


@pytest.fixture(scope="session")
def ref_solution(ref_problem):
    return solve_parameters(ref_problem, guess=(3.9, 0.1))


@pytest.fixture(scope="session")
def ref_field(ref_solution):
    return FieldEvaluator(ref_solution)
