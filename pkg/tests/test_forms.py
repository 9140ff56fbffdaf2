import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinlab import (SLProblem, TrialFunction, eigenfunction, extension_form, friedrichs_form,
                      kernel_basis, lc_matrix_family, lp_family, principal_pair, rayleigh_check, sector_check)
from kreinlab.errors import InequalityViolation
from kreinlab.extensions import Friedrichs
from kreinlab.forms import Sector, divergence_residual, gauge_values, numerical_range_samples, weighted_inner

T_F_SINE = math.pi ** 2 / 2 + 0.5


@pytest.fixture(scope="module")
def lp_basis(half_line):
    return kernel_basis(half_line)


def trial(prob, src):
    return TrialFunction.from_expression(prob, src)


@pytest.mark.parametrize("h", [None, "1", "exp(-x/2)", "1+x^2"])
def test_friedrichs_form_gauges(unit_interval, h):
    val = friedrichs_form(unit_interval, h, trial(unit_interval, "sin(pi*x)"))
    assert val.value == pytest.approx(T_F_SINE, rel=1e-9)


def test_zero_trial(unit_interval):
    assert friedrichs_form(unit_interval, None, trial(unit_interval, "0")).value == 0


def test_gauge_independence_half_line(half_line):
    pair = principal_pair(half_line)
    u = trial(half_line, "x*exp(-x)")
    vals = gauge_values(half_line, u, {"one": "1", "h": "exp(-x/2)", "f": pair.f, "g": pair.g})
    for v in vals.values():
        assert v.value == pytest.approx(0.5, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3))
def test_friedrichs_form_on_sine_modes(c1, c2):
    prob = SLProblem.from_strings(0, 1, q1="1")
    u = trial(prob, "%r*sin(pi*x) + %r*sin(2*pi*x)" % (c1, c2))
    exact = c1 * c1 * (math.pi ** 2 + 1) / 2 + c2 * c2 * (4 * math.pi ** 2 + 1) / 2
    assert friedrichs_form(prob, "exp(-x/2)", u).value == pytest.approx(exact, rel=1e-8, abs=1e-10)


def test_weighted_inner(unit_interval):
    assert weighted_inner(unit_interval, trial(unit_interval, "sin(pi*x)")).value == pytest.approx(0.5, rel=1e-10)


def test_vanishing_trial_sees_only_friedrichs(half_line, lp_basis):
    v = trial(half_line, "x*exp(-x)")
    base = friedrichs_form(half_line, None, v).value
    for l in (0, 1, 3):
        spec = lp_family(half_line, lp_basis, l)
        assert extension_form(half_line, spec, v, psi=lp_basis.psi).value == pytest.approx(base, rel=1e-8)


@pytest.mark.parametrize("l", [0.5, 1.0, 4.0])
def test_form_on_psi(half_line, lp_basis, l):
    spec = lp_family(half_line, lp_basis, l)
    psi = TrialFunction.from_trajectory(half_line, lp_basis.psi)
    assert extension_form(half_line, spec, psi, psi=lp_basis.psi).value == pytest.approx(0.5 * l, rel=1e-7, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=0.0, max_value=5.0), st.floats(min_value=-2, max_value=2))
def test_krein_is_smallest(half_line, lp_basis, l, c):
    v = trial(half_line, "exp(-x) + %r*x*exp(-2*x)" % c)
    krein = extension_form(half_line, lp_family(half_line, lp_basis, 0), v, psi=lp_basis.psi).value
    other = extension_form(half_line, lp_family(half_line, lp_basis, l), v, psi=lp_basis.psi).value
    assert krein <= other + 1e-8


def test_rayleigh_dirichlet(unit_interval):
    for n in (1, 2, 3):
        lam = 1 + (n * math.pi) ** 2
        v = TrialFunction.from_trajectory(unit_interval, eigenfunction(unit_interval, Friedrichs(), lam))
        assert rayleigh_check(unit_interval, Friedrichs(), v).real == pytest.approx(lam, rel=1e-8)


def test_rayleigh_krein_half_line(half_line, lp_basis):
    spec = lp_family(half_line, lp_basis, 0)
    psi = TrialFunction.from_trajectory(half_line, lp_basis.psi)
    assert abs(rayleigh_check(half_line, spec, psi, psi=lp_basis.psi)) < 1e-8


def test_rayleigh_bracket_family(unit_interval):
    basis = kernel_basis(unit_interval)
    spec = lc_matrix_family(unit_interval, basis, np.diag([1.0, 2.0]))
    from kreinlab import eigenvalues_bracket
    spc = eigenvalues_bracket(unit_interval, spec, (-1.0, 60.0), max_count=2)
    for e in spc:
        v = TrialFunction.from_trajectory(unit_interval, eigenfunction(unit_interval, spec, e.value))
        assert rayleigh_check(unit_interval, spec, v).real == pytest.approx(e.value, rel=1e-6, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=-2, max_value=2), st.floats(min_value=0, max_value=3))
def test_rayleigh_nonnegative_for_positive_specs(half_line, lp_basis, c, l):
    v = trial(half_line, "exp(-x)*(1 + %r*x)" % c)
    spec = lp_family(half_line, lp_basis, l)
    assert rayleigh_check(half_line, spec, v, psi=lp_basis.psi).real >= -1e-8


def test_sector_passes(complex_interval):
    rep = sector_check(complex_interval, "1", Sector.from_tan(1.0, 0.5))
    assert rep.ok
    for z in rep.samples:
        assert Sector.from_tan(1.0, 0.5).contains(z, 1e-9)


def test_sector_fails_with_witnesses():
    prob = SLProblem.from_strings(0, 1, q1="1", q2="2")
    with pytest.raises(InequalityViolation) as info:
        sector_check(prob, "1", Sector.from_tan(1.0, 0.5))
    assert info.value.witnesses


@pytest.mark.parametrize("tan_alpha", [1e-6, 0.5, 10.0])
def test_real_potential_in_every_sector(unit_interval, tan_alpha):
    assert sector_check(unit_interval, "1", Sector.from_tan(1.0, tan_alpha)).ok


def test_numerical_range_is_deterministic(complex_interval):
    a = numerical_range_samples(complex_interval, "1")
    b = numerical_range_samples(complex_interval, "1")
    assert np.array_equal(np.asarray(a), np.asarray(b))


@pytest.mark.parametrize("p, q1, q2, h, u, hi", [
    ("1", "1", None, "exp(-x/2)", "sin(x)", 3.0),
    ("1+x^2", "1", None, "1+x", "x^2", 2.0),
    ("1", "1", "0.5", "1", "sin(x)", 3.0),
])
def test_divergence_residual(p, q1, q2, h, u, hi):
    prob = SLProblem.from_strings(0, "inf", p=p, q1=q1, q2=q2)
    xs = np.linspace(0, hi, 13)
    assert divergence_residual(prob, h, u, xs) < 1e-9


def test_divergence_residual_u_equals_h(half_line):
    assert divergence_residual(half_line, "exp(-x/2)", "exp(-x/2)", [0.0, 1.0, 2.0]) == 0.0
