import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinlab import (EndpointKind, GaugeFunction, SLProblem, classify_endpoint, jacobi_residual, kalf_check,
                      oscillation_test, principal_pair)
from kreinlab.errors import InequalityViolation, OscillatoryError
from kreinlab.ode import wronskian


def test_kinds(half_line, frobenius, unit_interval):
    assert classify_endpoint(half_line).kind == EndpointKind.LIMIT_POINT
    assert classify_endpoint(frobenius).kind == EndpointKind.LIMIT_CIRCLE
    assert classify_endpoint(unit_interval).kind == EndpointKind.REGULAR


def test_report_serializes(half_line):
    d = classify_endpoint(half_line).to_dict()
    assert d["kind"] == "limit-point"


def test_oscillation(half_line, frobenius):
    assert not oscillation_test(half_line, 0.0)
    assert oscillation_test(SLProblem.from_strings(0, "inf", q1="0"), 1.0)
    assert not oscillation_test(frobenius, 0.0)


def _ratio(t, x, y):
    return t.value_at(x) / t.value_at(y)


def test_principal_pair_half_line(half_line):
    pair = principal_pair(half_line)
    assert pair.verified
    assert _ratio(pair.f, 3.0, 1.0) == pytest.approx(math.exp(-2), rel=1e-8)
    # g is fixed up to a multiple of f: W(f, g) = 1 and g ~ c e^x
    for x in (1.0, 3.0, 10.0):
        assert wronskian(pair.f, pair.g, x) == pytest.approx(1.0, rel=1e-8)
    assert pair.g.value_at(20.0) * math.exp(-20.0) == pytest.approx(pair.g.value_at(10.0) * math.exp(-10.0), rel=1e-7)
    assert pair.ratios[-1] < pair.ratios[0]


def test_principal_pair_free_half_line():
    pair = principal_pair(SLProblem.from_strings(0, "inf", q1="0"))
    assert pair.verified
    assert _ratio(pair.f, 10.0, 1.0) == pytest.approx(1.0, rel=1e-4)
    g1, g2, g3 = (pair.g.value_at(x) for x in (1.0, 2.0, 3.0))
    assert g3 - 2 * g2 + g1 == pytest.approx(0.0, abs=1e-8 * abs(g3))


def _exponent(t, x, y):
    return math.log(t.value_at(y) / t.value_at(x)) / math.log((1 - y) / (1 - x))


def test_principal_pair_frobenius(frobenius):
    pair = principal_pair(frobenius)
    assert pair.verified
    for x in (0.0, 0.5, 0.9, 0.99, 0.9999):
        assert pair.f.value_at(x) / pair.f.value_at(0.0) == pytest.approx((1 - x) ** 0.75, rel=1e-6)
    assert _exponent(pair.g, 0.999, 0.9999) == pytest.approx(0.25, abs=0.02)


def test_principal_pair_rejects_oscillation():
    with pytest.raises(OscillatoryError):
        principal_pair(SLProblem.from_strings(0, "inf", q1="-1"))


@pytest.mark.parametrize("h, coercive, mu", [("exp(-x/2)", True, 0.75), ("exp(-x)", False, 0.0), ("1", True, 1.0)])
def test_kalf(half_line, h, coercive, mu):
    rep = kalf_check(half_line, GaugeFunction(half_line, h=h), mu)
    assert rep.holds
    assert rep.coercive is coercive
    assert rep.mu_max == pytest.approx(mu, abs=1e-9)


def test_kalf_principal_type(half_line):
    rep = kalf_check(half_line, GaugeFunction(half_line, h="exp(-x/2)"), 0.75)
    assert rep.principal_type is True


def test_kalf_fails_above_threshold(half_line):
    with pytest.raises(InequalityViolation) as info:
        kalf_check(half_line, GaugeFunction(half_line, h="exp(-x/2)"), 0.8)
    assert info.value.witnesses


@pytest.mark.parametrize("p, q, h, u, hi", [
    ("1", "1", "exp(-x/2)", "sin(x)", 3.0),
    ("1+x^2", "1", "1+x", "x^2", 2.0),
    ("1+x", "cos(x)", "exp(x/3)", "x*exp(-x)", 2.0),
])
def test_jacobi_residual(p, q, h, u, hi):
    prob = SLProblem.from_strings(0, "inf", p=p, q1=q)
    xs = [hi * j / 10 for j in range(11)]
    assert jacobi_residual(prob, h, u, xs) < 1e-9


def test_jacobi_residual_vanishes_for_u_equal_h(half_line):
    assert jacobi_residual(half_line, "exp(-x/2)", "exp(-x/2)", [0.0, 1.0, 2.0]) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.1, max_value=2.0), st.floats(min_value=-1.0, max_value=1.0),
       st.floats(min_value=-2.0, max_value=2.0))
def test_jacobi_identity_property(c, b, w):
    prob = SLProblem.from_strings(0, "inf", p="1+%r*x^2" % c, q1="1")
    h = "exp(%r*x)" % b
    u = "sin(%r*x + 1)" % w
    assert jacobi_residual(prob, h, u, [0.25 * j for j in range(9)]) < 1e-9
