import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinlab import SLProblem
from kreinlab.errors import ValidationError
from kreinlab.oracle import Robin, convergence_order, discretize, eigenvalues_discrete, sturm_count


def test_textbook_stencil():
    prob = SLProblem.from_strings(0, 1, q1="0")
    op = discretize(prob, 1.0, 4)
    h = 0.25
    A = op.dense()
    assert A.shape == (3, 3)
    assert np.allclose(A * h, [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])
    assert np.allclose(op.mass, h)


def test_neumann_ground_state():
    # q = 1 with Neumann at 0 and Dirichlet at 1: lambda_1 = 1 + pi^2 / 4
    prob = SLProblem.from_strings(0, 1, q1="1")
    exact = 1 + math.pi ** 2 / 4
    errs = [abs(eigenvalues_discrete(discretize(prob, 1.0, n, Robin(0.0)), 1)[0] - exact) for n in (100, 200, 400)]
    assert errs[-1] < 1e-4 * exact
    assert min(convergence_order(errs)) > 1.9


def test_dirichlet_interval_accuracy():
    prob = SLProblem.from_strings(0, 1, q1="1")
    vals = eigenvalues_discrete(discretize(prob, 1.0, 10_000), 3)
    for n, v in enumerate(vals, start=1):
        assert abs(v - (1 + (n * math.pi) ** 2)) / (1 + (n * math.pi) ** 2) < 1e-3


def test_truncated_robin_half_line(half_line):
    val = eigenvalues_discrete(discretize(half_line, 40.0, 10_000, Robin(-0.5)), 1)[0]
    assert abs(val - 0.75) / 0.75 < 1e-3


def test_quadratic_convergence():
    prob = SLProblem.from_strings(0, 1, q1="1")
    exact = 1 + math.pi ** 2
    errs = [eigenvalues_discrete(discretize(prob, 1.0, n), 1)[0] - exact for n in (250, 500, 1000, 2000)]
    assert min(convergence_order(errs)) >= 1.9


def test_variable_coefficients_symmetric():
    prob = SLProblem.from_strings(0, 2, p="1+x^2", k="2+sin(x)", q1="cos(3*x) + x")
    op = discretize(prob, 2.0, 50, Robin(0.3), Robin(1.0))
    A = op.dense()
    assert np.allclose(A, A.T)
    assert np.all(op.mass > 0) and np.all(np.isfinite(op.diag))


def test_singular_coefficient_rejected(frobenius):
    with pytest.raises(ValidationError):
        discretize(frobenius, 1.0, 100)


def test_sturm_count_matches_eigenvalues():
    prob = SLProblem.from_strings(0, 1, q1="1")
    op = discretize(prob, 1.0, 200)
    vals = eigenvalues_discrete(op, 4)
    for j, v in enumerate(vals):
        assert sturm_count(op, v - 1e-6) == j
        assert sturm_count(op, v + 1e-6) == j + 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=-1, max_value=1), min_size=5, max_size=5))
def test_discrete_min_max(coeffs):
    prob = SLProblem.from_strings(0, 1, p="1+x", q1="1")
    op = discretize(prob, 1.0, 80, Robin(-0.2))
    x = op.nodes
    v = sum(c * np.cos(j * x) for j, c in enumerate(coeffs))
    if not np.any(v):
        return
    # scale-invariant quotient; normalising avoids underflow for subnormal coefficients
    v = v / np.max(np.abs(v))
    assert op.rayleigh(v) >= eigenvalues_discrete(op, 1)[0] - 1e-9
