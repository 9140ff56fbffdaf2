import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinlab import (SLProblem, TruncationPolicy, kernel_basis, krein, lc_matrix_family, lc_scalar_family,
                      lp_family, principal_pair, sectorial_arlinskii, sectorial_krein)
from kreinlab.errors import NonCoerciveParameter, ValidationError
from kreinlab.extensions import UNIT_TERM_WARNING, Friedrichs, SectorialKrein, bracket, ratio_at_m
from kreinlab.ode import QuasiState, integrate


@pytest.fixture(scope="module")
def lp_basis(half_line):
    return kernel_basis(half_line)


@pytest.fixture(scope="module")
def regular_basis(unit_interval):
    return kernel_basis(unit_interval)


@pytest.fixture(scope="module")
def sectorial_half_line():
    return SLProblem.from_strings(0, "inf", q1="1", q2="0.5", truncation=TruncationPolicy(cutoffs=(2.5, 5, 10, 20, 40)))


def test_lp_kernel(lp_basis):
    assert lp_basis.dimension == 1
    u, pu = lp_basis.psi_a()
    assert u == pytest.approx(1.0, abs=1e-14)
    assert pu == pytest.approx(-1.0, abs=1e-9)
    assert lp_basis.norms_sq[0] == pytest.approx(0.5, abs=1e-9)
    assert lp_basis.psi.value_at(3.0) == pytest.approx(math.exp(-3), rel=1e-8)


def test_regular_kernel_is_two_dimensional(regular_basis):
    assert regular_basis.dimension == 2
    assert np.allclose(regular_basis.gram, np.eye(2), atol=1e-8)
    # the (1, 0) and (0, 1) elements are cosh and sinh
    assert regular_basis.elements[0].value_at(1.0) == pytest.approx(math.cosh(1.0), rel=1e-9)
    assert regular_basis.elements[1].value_at(1.0) == pytest.approx(math.sinh(1.0), rel=1e-9)


def test_sectorial_kernel(sectorial_half_line):
    b = kernel_basis(sectorial_half_line)
    s = cmath.sqrt(1 - 0.5j)
    assert b.adjoint and b.dimension == 1
    assert abs(b.psi.value_at(0.0) - 1) < 1e-12
    assert abs(b.psi.value_at(2.0) - cmath.exp(-2 * s)) < 1e-8


def test_kernel_report_serializes(lp_basis):
    d = lp_basis.to_dict()
    assert d["dimension"] == 1 and d["elements"][0]["u_a"] == pytest.approx(1.0)


@pytest.mark.parametrize("l, theta", [(0, -1.0), (1, -0.5), (2, 0.0)])
def test_lp_family_theta(half_line, lp_basis, l, theta):
    spec = lp_family(half_line, lp_basis, l)
    assert spec.theta == pytest.approx(theta, abs=1e-9)
    assert spec.is_krein == (l == 0)


def test_lp_family_friedrichs_member(half_line, lp_basis):
    spec = lp_family(half_line, lp_basis, "inf")
    assert spec.dirichlet_at_a and spec.robin_theta is None


def test_lp_family_rejects_negative(half_line, lp_basis):
    with pytest.raises(ValueError):
        lp_family(half_line, lp_basis, -1)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0, max_value=50), st.floats(min_value=0, max_value=50))
def test_lp_theta_is_increasing_in_l(half_line, lp_basis, l1, l2):
    t1 = lp_family(half_line, lp_basis, l1).theta
    t2 = lp_family(half_line, lp_basis, l2).theta
    assert (t1 - t2) * (l1 - l2) >= 0
    assert t1 == pytest.approx(-1 + l1 / 2, abs=1e-8)


def _solution(prob, u, pu, lam=0.0):
    return integrate(prob, lam, QuasiState(prob.a, u, pu), prob.right_end)


def test_bracket_identities(unit_interval):
    sinh = _solution(unit_interval, 0.0, 1.0)
    cosh = _solution(unit_interval, 1.0, 0.0)
    assert bracket(sinh, sinh) == 0
    assert bracket(sinh, cosh, at="a") == pytest.approx(-1.0, abs=1e-14)
    # Lagrange identity: constant Wronskian for solutions of the same equation
    assert bracket(sinh, cosh, at="m") == pytest.approx(-1.0, abs=1e-9)


def test_limit_circle_bracket_is_constant(frobenius):
    pair = principal_pair(frobenius)
    v = _solution(frobenius, 1.0, 0.3)
    w = _solution(frobenius, 0.2, 1.0)
    at_a = bracket(v, w, at="a")
    assert bracket(v, w, pair.g, at="m") == pytest.approx(at_a, rel=1e-7)


def test_scalar_family_conditions(unit_interval, regular_basis):
    pair = principal_pair(unit_interval)
    spec = lc_scalar_family(unit_interval, regular_basis, beta=0.0, pair=pair)
    assert spec.degenerate
    c1, c2 = spec.conditions(spec.psi)
    assert abs(c1) < 1e-9 and abs(c2) < 1e-9
    # psi proportional to f with f(1) = 0: Robin condition at a
    f1 = math.sinh(1.0)
    psi_prime = -math.cosh(1.0) / f1
    assert spec.reduced_theta == pytest.approx(psi_prime, rel=1e-8)
    spec2 = lc_scalar_family(unit_interval, regular_basis, beta=2.0, pair=pair)
    norm_sq = (math.sinh(2.0) / 4 - 0.5) / f1 ** 2
    assert spec2.psi_norm_sq == pytest.approx(norm_sq, rel=1e-8)
    assert spec2.robin_theta == pytest.approx(psi_prime + 2.0 * norm_sq, rel=1e-8)


def test_scalar_family_literal_remark(unit_interval, regular_basis):
    spec = lc_scalar_family(unit_interval, regular_basis, beta=1.0, remark_literal=True)
    assert spec.robin_theta == pytest.approx(spec.psi_norm_sq, rel=1e-12)


def test_scalar_family_excludes_g(unit_interval, regular_basis):
    pair = principal_pair(unit_interval)
    spec = lc_scalar_family(unit_interval, regular_basis, beta=0.0, pair=pair)
    c1, c2 = spec.conditions(pair.g)
    assert max(abs(c1), abs(c2)) > 1e-3


def test_matrix_family_krein(unit_interval, regular_basis):
    spec = lc_matrix_family(unit_interval, regular_basis, np.zeros((2, 2)))
    assert spec.is_krein
    for psi in spec.psis:
        assert max(abs(c) for c in spec.conditions(psi)) < 1e-9
    c = spec.coefficients(spec.psis[0])
    assert c == pytest.approx([1.0, 0.0], abs=1e-9)


def test_matrix_family_endpoint_matrix(unit_interval, regular_basis):
    spec = lc_matrix_family(unit_interval, regular_basis, np.zeros((2, 2)))
    g = spec.g
    for j, psi in enumerate(spec.psis):
        assert spec.endpoint_matrix[0, j] == pytest.approx(psi.value_at(0.0) / g.value_at(0.0), rel=1e-9)
        assert spec.endpoint_matrix[1, j] == pytest.approx(psi.value_at(1.0) / g.value_at(1.0), rel=1e-9)


@pytest.mark.parametrize("b", [0.0, 3.0])
def test_matrix_family_second_element(unit_interval, regular_basis, b):
    spec = lc_matrix_family(unit_interval, regular_basis, np.diag([b, b]))
    c = spec.coefficients(spec.psis[1])
    assert c == pytest.approx([0.0, 1.0], abs=1e-9)
    residual = max(abs(r) for r in spec.conditions(spec.psis[1]))
    assert (residual < 1e-9) == (b == 0.0)
    assert residual == pytest.approx(b, rel=1e-8, abs=1e-9)


def test_matrix_family_validation(unit_interval, regular_basis):
    with pytest.raises(ValidationError):
        lc_matrix_family(unit_interval, regular_basis, [[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValidationError):
        lc_matrix_family(unit_interval, regular_basis, [[-1.0, 0.0], [0.0, 1.0]])


def test_sectorial_krein(sectorial_half_line):
    b = kernel_basis(sectorial_half_line)
    spec = sectorial_krein(sectorial_half_line, b)
    assert abs(spec.theta + cmath.sqrt(1 - 0.5j)) < 1e-8


def test_sectorial_krein_reduces_to_real_krein(half_line, lp_basis):
    spec = sectorial_krein(half_line, lp_basis)
    assert spec.theta == pytest.approx(lp_family(half_line, lp_basis, 0).theta, abs=1e-12)


def test_arlinskii_special_pairs(sectorial_half_line):
    b = kernel_basis(sectorial_half_line)
    assert isinstance(sectorial_arlinskii(sectorial_half_line, b, 0), SectorialKrein)
    assert isinstance(sectorial_arlinskii(sectorial_half_line, b, "inf"), Friedrichs)


def test_arlinskii_unit_term(half_line, lp_basis):
    spec = sectorial_arlinskii(half_line, lp_basis, 1)
    assert spec.theta == pytest.approx(-1.0 + 1.0 + 1.0, abs=1e-9)
    assert spec.warning == UNIT_TERM_WARNING
    dropped = sectorial_arlinskii(half_line, lp_basis, 1, drop_unit_term=True)
    assert dropped.theta == pytest.approx(0.0, abs=1e-9)


def test_arlinskii_rejects_non_coercive(half_line, lp_basis):
    with pytest.raises(NonCoerciveParameter):
        sectorial_arlinskii(half_line, lp_basis, -1)


def test_krein_dispatch(half_line, lp_basis, unit_interval, regular_basis):
    assert krein(half_line, lp_basis).is_krein
    assert krein(unit_interval, regular_basis).is_krein


def test_limit_circle_psi_is_principal(frobenius):
    basis = kernel_basis(frobenius)
    pair = principal_pair(frobenius)
    spec = lc_scalar_family(frobenius, basis, pair=pair)
    assert spec.degenerate
    assert spec.psi_norm_sq == pytest.approx(0.4, rel=1e-7)
    assert spec.reduced_theta == pytest.approx(-0.75, abs=1e-7)
    assert abs(ratio_at_m(spec.psi, pair.g).value) < 1e-8
