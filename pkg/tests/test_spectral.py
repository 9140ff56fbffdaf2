import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinlab import (SLProblem, TruncationPolicy, eigenfunction, eigenvalues_bracket, eigenvalues_real,
                      eigenvalues_sectorial, kernel_basis, lc_matrix_family, lc_scalar_family, lp_family,
                      principal_pair, sectorial_krein)
from kreinlab.errors import NotAnEigenvalue, UnsupportedCase
from kreinlab.extensions import Friedrichs
from kreinlab.forms import Sector
from kreinlab.spectral import condition_matrix, essential_floor, rank_deficiency
from scipy.optimize import brentq
from scipy.special import jv


@pytest.fixture(scope="module")
def lp_basis(half_line):
    return kernel_basis(half_line)


def closed_form(l):
    return 1 - (1 - l / 2) ** 2


def test_essential_floor(half_line, unit_interval):
    assert essential_floor(half_line) == pytest.approx(1.0)
    assert essential_floor(unit_interval) is None


@pytest.mark.parametrize("l", [0, 0.5, 1, 1.5])
def test_robin_family_ground_state(half_line, lp_basis, l):
    spec = lp_family(half_line, lp_basis, l)
    spc = eigenvalues_real(half_line, spec)
    assert len(spc) == 1
    assert spc[0].value == pytest.approx(closed_form(l), abs=1e-9)
    assert spc[0].converged and spc[0].index == 1


@pytest.mark.parametrize("l", [2, 3, "inf"])
def test_no_eigenvalue_below_floor(half_line, lp_basis, l):
    spc = eigenvalues_real(half_line, lp_family(half_line, lp_basis, l))
    assert len(spc) == 0 and spc.floor == pytest.approx(1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.9))
def test_robin_family_property(half_line, lp_basis, l):
    spc = eigenvalues_real(half_line, lp_family(half_line, lp_basis, l))
    assert spc[0].value == pytest.approx(closed_form(l), abs=1e-8)


def test_dirichlet_interval(unit_interval):
    spc = eigenvalues_real(unit_interval, Friedrichs(), (None, 300.0), max_count=5)
    exact = [1 + (n * math.pi) ** 2 for n in range(1, 6)]
    assert [e.index for e in spc] == [1, 2, 3, 4, 5]
    for e, x in zip(spc, exact):
        assert e.value == pytest.approx(x, rel=1e-9)


def test_variable_coefficients():
    # -(x^2 u')' on [1, e] with Dirichlet ends: lambda_n = 1/4 + n^2 pi^2
    prob = SLProblem.from_strings(1, math.e, p="x^2", q1="0")
    spc = eigenvalues_real(prob, Friedrichs(), (None, 100.0), max_count=3)
    for n, e in enumerate(spc, start=1):
        assert e.value == pytest.approx(0.25 + (n * math.pi) ** 2, rel=1e-9)


def test_eigenfunction_dirichlet(unit_interval):
    t = eigenfunction(unit_interval, Friedrichs(), 1 + math.pi ** 2)
    assert abs(t.value_at(0.5)) == pytest.approx(math.sqrt(2), rel=1e-7)
    assert t.sign_changes() == 0


def test_eigenfunction_krein_half_line(half_line, lp_basis):
    t = eigenfunction(half_line, lp_family(half_line, lp_basis, 0), 0.0)
    assert abs(t.value_at(1.0)) == pytest.approx(math.exp(-1) / math.sqrt(0.5), rel=1e-7)


def test_not_an_eigenvalue(unit_interval):
    with pytest.raises(NotAnEigenvalue):
        eigenfunction(unit_interval, Friedrichs(), 2.0)


def test_krein_multiplicity_regular(unit_interval):
    basis = kernel_basis(unit_interval)
    spec = lc_matrix_family(unit_interval, basis, np.zeros((2, 2)))
    spc = eigenvalues_bracket(unit_interval, spec, (-1.0, 100.0), max_count=3)
    assert spc[0].value == pytest.approx(0.0, abs=1e-9)
    assert spc[0].multiplicity == 2
    M = condition_matrix(unit_interval, spec, 0.0)
    assert rank_deficiency(M, max(np.linalg.svd(condition_matrix(unit_interval, spec, 1.0), compute_uv=False))) == 2


def test_condition_matrix_real(unit_interval):
    basis = kernel_basis(unit_interval)
    spec = lc_matrix_family(unit_interval, basis, np.diag([1.0, 2.0]))
    M = condition_matrix(unit_interval, spec, 3.7)
    assert M.dtype == float and np.all(np.isfinite(M))


def test_large_b_approaches_dirichlet(unit_interval):
    basis = kernel_basis(unit_interval)
    spec = lc_matrix_family(unit_interval, basis, 1e8 * np.eye(2))
    spc = eigenvalues_bracket(unit_interval, spec, (1.0, 45.0), max_count=2)
    for n, e in enumerate(spc, start=1):
        assert e.value == pytest.approx(1 + (n * math.pi) ** 2, rel=1e-6)


def _bessel_roots(fn, hi):
    ks = np.linspace(0.05, hi, 4000)
    vals = fn(ks)
    return [brentq(fn, ks[i], ks[i + 1]) ** 2 for i in range(len(ks) - 1) if vals[i] * vals[i + 1] < 0]


def test_limit_circle_scalar_family(frobenius):
    # u = sqrt(t) J_{1/4}(k t), t = 1 - x, is the principal solution; the
    # Robin condition u'(0) = theta u(0) becomes a Bessel equation in k
    basis = kernel_basis(frobenius)
    pair = principal_pair(frobenius)
    for beta in (0.0, 1.0):
        spec = lc_scalar_family(frobenius, basis, beta=beta, pair=pair)
        theta = spec.reduced_theta

        def miss(k):
            du = 0.5 * jv(0.25, k) + k * 0.5 * (jv(-0.75, k) - jv(1.25, k))
            return -du - theta * jv(0.25, k)

        exact = _bessel_roots(miss, 8.0)[:2]
        if beta == 0.0:
            exact = [0.0] + exact[:1]
        spc = eigenvalues_real(frobenius, spec, (-1.0, 30.0), max_count=2)
        for e, x in zip(spc, exact):
            assert e.value == pytest.approx(x, rel=1e-7, abs=1e-8)


def test_sectorial_dirichlet(complex_interval):
    spc = eigenvalues_sectorial(complex_interval, Friedrichs(), (0.0, 100.0, -5.0, 5.0), max_count=3,
                                sector=Sector.from_tan(1.0, 0.5))
    assert len(spc) == 3
    for n, e in enumerate(spc, start=1):
        assert abs(e.value - (1 + 0.5j + (n * math.pi) ** 2)) < 1e-7
        assert e.in_sector


def test_sectorial_krein_zero(complex_interval):
    prob = SLProblem.from_strings(0, "inf", q1="1", q2="0.5", truncation=TruncationPolicy(cutoffs=(2.5, 5, 10, 20, 40)))
    spec = sectorial_krein(prob, kernel_basis(prob))
    spc = eigenvalues_sectorial(prob, spec, (-0.5, 0.5, -0.5, 0.5), max_count=2)
    assert len(spc) == 1 and abs(spc[0].value) < 1e-8


def test_empty_rectangle(complex_interval):
    spc = eigenvalues_sectorial(complex_interval, Friedrichs(), (-10.0, -5.0, -2.0, 2.0))
    assert len(spc) == 0


def test_sectorial_krein_eigenfunction_is_psi():
    prob = SLProblem.from_strings(0, "inf", q1="1", q2="0.5", truncation=TruncationPolicy(cutoffs=(2.5, 5, 10, 20, 40)))
    spec = sectorial_krein(prob, kernel_basis(prob))
    t = eigenfunction(prob, spec, 0.0)
    s = cmath.sqrt(1 - 0.5j)
    ratio = t.value_at(2.0) / t.value_at(0.0)
    assert abs(ratio - cmath.exp(-2 * s)) < 1e-8
    with pytest.raises(UnsupportedCase):
        eigenfunction(prob, spec, 1.0)


def test_spectrum_rows(half_line, lp_basis):
    spc = eigenvalues_real(half_line, lp_family(half_line, lp_basis, 1))
    (row,) = spc.rows(1.0)
    assert row[0] == 1.0 and row[1] == 1 and row[2] == pytest.approx(0.75) and row[3] == 0.0
    assert spc.to_dict()["eigenvalues"][0]["n"] == 1
