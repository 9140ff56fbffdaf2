"""Acceptance suite: one test per criterion, summarised as PASS/FAIL lines."""

import cmath
import math
import time

import numpy as np
import pytest

from kreinlab import (EndpointKind, GaugeFunction, SLProblem, TrialFunction, TruncationPolicy, classify_endpoint,
                      eigenfunction, eigenvalues_real, eigenvalues_sectorial, jacobi_residual, kalf_check,
                      kernel_basis, lc_matrix_family, lp_family, principal_pair, rayleigh_check, sector_check,
                      sectorial_krein)
from kreinlab.extensions import Friedrichs
from kreinlab.forms import Sector, gauge_values, numerical_range_samples
from kreinlab.oracle import Dirichlet, Robin, convergence_order, discretize, eigenvalues_discrete
from kreinlab.spectral import condition_matrix, eigenvalues_bracket

CUTS = TruncationPolicy(cutoffs=(2.5, 5, 10, 20, 40))
L_GRID = (0, 0.5, 1, 1.5)


def half_line():
    return SLProblem.from_strings(0, "inf", q1="1", truncation=CUTS)


def unit_interval(q2=None):
    return SLProblem.from_strings(0, 1, q1="1", q2=q2)


def robin_closed_form(l):
    return 1 - (1 - l / 2) ** 2


def note(record_property, title, detail):
    record_property("criterion", title)
    record_property("detail", detail)
    print("%s: %s" % (title, detail))


def test_c01_robin_family_closed_form(record_property):
    t0 = time.perf_counter()
    prob = half_line()
    basis = kernel_basis(prob)
    errors = {}
    for l in L_GRID:
        spc = eigenvalues_real(prob, lp_family(prob, basis, l))
        errors[l] = abs(spc[0].value - robin_closed_form(l))
    above = {str(l): len(eigenvalues_real(prob, lp_family(prob, basis, l))) for l in (2, "inf")}
    elapsed = time.perf_counter() - t0
    note(record_property, "1 Robin family lambda_1(l) = 1 - (1 - l/2)^2",
         "max abs err %.2e, below-floor counts %s, %.2f s" % (max(errors.values()), above, elapsed))
    assert max(errors.values()) <= 1e-6
    assert errors[0] <= 1e-6
    assert above == {"2": 0, "inf": 0}
    assert elapsed < 5.0


def test_c02_regular_friedrichs(record_property):
    prob = unit_interval()
    spc = eigenvalues_real(prob, Friedrichs(), (None, 300.0), max_count=5)
    exact = [1 + (n * math.pi) ** 2 for n in range(1, 6)]
    rel = [abs(e.value - x) / x for e, x in zip(spc, exact)]
    note(record_property, "2 Dirichlet -u'' + u on [0,1]: 1 + n^2 pi^2", "max rel err %.2e" % max(rel))
    assert len(spc) == 5
    assert max(rel) < 1e-8


def test_c03_krein_multiplicity(record_property):
    prob = unit_interval()
    spec = lc_matrix_family(prob, kernel_basis(prob), np.zeros((2, 2)))
    spc = eigenvalues_bracket(prob, spec, (-1.0, 50.0), max_count=2)
    lams = np.linspace(-1.0, 50.0, 52)
    scale = max(np.linalg.svd(condition_matrix(prob, spec, l), compute_uv=False)[0] for l in lams)
    sv = np.linalg.svd(condition_matrix(prob, spec, 0.0), compute_uv=False)
    note(record_property, "3 Krein B = 0: lambda = 0 with rank deficiency 2",
         "sigma(M(0))/scale = %s, lambda_1 = %.2e, multiplicity %d"
         % (", ".join("%.1e" % s for s in sv / scale), spc[0].value, spc[0].multiplicity))
    assert abs(spc[0].value) < 1e-8
    assert spc[0].multiplicity == 2
    assert np.all(sv < 1e-8 * scale)


def test_c04_monotone_in_l(record_property):
    prob = half_line()
    basis = kernel_basis(prob)
    grid = [0.25 * j for j in range(8)]
    lams = [eigenvalues_real(prob, lp_family(prob, basis, l))[0].value for l in grid]
    worst = max([lams[i] - lams[i + 1] for i in range(len(lams) - 1)] + [0.0])
    note(record_property, "4 lambda_1(T_l) nondecreasing on l = 0, 0.25, ..., 1.75", "worst decrease %.2e" % worst)
    assert worst <= 1e-8


def test_c05_jacobi_identity(record_property):
    cases = [
        ("1", "1", "exp(-x/2)", "sin(x)", 3.0),
        ("1+x^2", "1", "1+x", "x^2", 2.0),
        ("1+x", "cos(x)", "exp(x/3)", "x*exp(-x)", 2.0),
    ]
    res = []
    for p, q, h, u, hi in cases:
        prob = SLProblem.from_strings(0, "inf", p=p, q1=q)
        res.append(jacobi_residual(prob, h, u, np.linspace(0, hi, 21)))
    note(record_property, "5 Jacobi factorisation identity", "residuals %s" % ", ".join("%.1e" % r for r in res))
    assert max(res) < 1e-9


def test_c06_classification(record_property):
    problems = {
        EndpointKind.LIMIT_POINT: half_line(),
        EndpointKind.LIMIT_CIRCLE: SLProblem.from_strings(0, 1, q1="-(3/16)/(1-x)^2"),
        EndpointKind.REGULAR: unit_interval(),
    }
    kinds, checks = {}, {}
    for expected, prob in problems.items():
        kinds[expected] = classify_endpoint(prob).kind
        checks[expected] = principal_pair(prob).checks
    note(record_property, "6 endpoint classification and principal pairs",
         "; ".join("%s: %s" % (k.value, "ok" if all(c.values()) else c) for k, c in checks.items()))
    assert all(kinds[k] == k for k in problems)
    assert all(all(c.values()) for c in checks.values())


def test_c07_oracle_cross_check(record_property):
    n = 10_000
    prob = half_line()
    basis = kernel_basis(prob)
    rel = []
    for l in (0.5, 1, 1.5):
        spec = lp_family(prob, basis, l)
        shoot = eigenvalues_real(prob, spec)[0].value
        disc = eigenvalues_discrete(discretize(prob, 40.0, n, Robin(spec.theta)), 1)[0]
        rel.append(abs(disc - shoot) / abs(shoot))
    reg = unit_interval()
    shoot = eigenvalues_real(reg, Friedrichs(), (None, 300.0), max_count=5).values
    disc = eigenvalues_discrete(discretize(reg, 1.0, n, Dirichlet(), Dirichlet()), 5)
    rel += [abs(d - s) / s for d, s in zip(disc, shoot)]
    # order measured on grids whose error sits well above the roundoff floor
    exact = 1 + math.pi ** 2
    errs = [eigenvalues_discrete(discretize(reg, 1.0, m), 1)[0] - exact for m in (1250, 2500, 5000)]
    spec = lp_family(prob, basis, 1)
    errs_robin = [eigenvalues_discrete(discretize(prob, 40.0, m, Robin(spec.theta)), 1)[0] - 0.75
                  for m in (2500, 5000, 10_000)]
    orders = convergence_order(errs) + convergence_order(errs_robin)
    note(record_property, "7 shooting vs finite differences (n = 10^4)",
         "max rel diff %.2e, observed orders %s" % (max(rel), ", ".join("%.2f" % o for o in orders)))
    assert max(rel) < 1e-3
    assert min(orders) >= 1.9


def test_c08_sectorial(record_property):
    prob = unit_interval(q2="0.5")
    sector = Sector.from_tan(1.0, 0.5)
    rep = sector_check(prob, "1", sector)
    spc = eigenvalues_sectorial(prob, Friedrichs(), (0.0, 100.0, -5.0, 5.0), max_count=3, sector=sector)
    err = [abs(e.value - (1 + 0.5j + (n * math.pi) ** 2)) for n, e in enumerate(spc, start=1)]
    in_sector = all(sector.contains(e.value, 1e-9) for e in spc)
    samples = numerical_range_samples(prob, "1")
    range_ok = all(sector.contains(z, 1e-9) for z in samples)
    quotients = []
    for e in spc:
        v = TrialFunction.from_trajectory(prob, eigenfunction(prob, Friedrichs(), e.value))
        quotients.append(rayleigh_check(prob, Friedrichs(), v))
    quot_ok = all(sector.contains(z, 1e-9) for z in quotients)
    lp = SLProblem.from_strings(0, "inf", q1="1", q2="0.5", truncation=CUTS)
    krein = sectorial_krein(lp, kernel_basis(lp))
    zero = eigenvalues_sectorial(lp, krein, (-0.5, 0.5, -0.5, 0.5), max_count=2)
    s = cmath.sqrt(1 - 0.5j)
    psi = eigenfunction(lp, krein, 0.0)
    psi_dev = max(abs(psi.value_at(x) / psi.value_at(0.0) - cmath.exp(-s * x)) for x in (0.5, 1.0, 3.0, 10.0))
    note(record_property, "8 sectorial Dirichlet, sector containment, sectorial Krein kernel",
         "sector ok %s, max err %.2e, eigenvalues in sector %s, %d range samples and %d quotients in sector %s, "
         "Krein lambda %.1e residual %.1e, psi deviation %.1e"
         % (rep.ok, max(err), in_sector, len(samples), len(quotients), range_ok and quot_ok, abs(zero[0].value),
            zero[0].residual, psi_dev))
    assert rep.ok
    assert len(spc) == 3 and max(err) < 1e-6
    assert in_sector and range_ok and quot_ok
    assert len(zero) == 1 and abs(zero[0].value) < 1e-8 and zero[0].residual < 1e-8
    assert psi_dev < 1e-8


def test_c09_form_consistency(record_property):
    prob = half_line()
    pair = principal_pair(prob)
    u = TrialFunction.from_expression(prob, "x*exp(-x)")
    vals = gauge_values(prob, u, {"1": "1", "h": "exp(-x/2)", "f": pair.f, "g": pair.g})
    ref = vals["1"].value
    spread = max(abs(v.value - ref) / abs(ref) for v in vals.values())
    basis = kernel_basis(prob)
    mism = []
    for l in L_GRID:
        spec = lp_family(prob, basis, l)
        lam = eigenvalues_real(prob, spec)[0].value
        v = TrialFunction.from_trajectory(prob, eigenfunction(prob, spec, lam))
        rq = rayleigh_check(prob, spec, v, psi=basis.psi).real
        mism.append(abs(rq - lam) / max(abs(lam), 1.0))
    reg = unit_interval()
    for e in eigenvalues_real(reg, Friedrichs(), (None, 300.0), max_count=5):
        v = TrialFunction.from_trajectory(reg, eigenfunction(reg, Friedrichs(), e.value))
        mism.append(abs(rayleigh_check(reg, Friedrichs(), v).real - e.value) / e.value)
    note(record_property, "9 gauge independence of t_F and Rayleigh quotients",
         "gauge spread %.1e, max quotient mismatch %.1e" % (spread, max(mism)))
    assert spread < 1e-6
    assert max(mism) < 1e-5


def test_c10_kalf_criterion(record_property):
    prob = half_line()
    rep = kalf_check(prob, GaugeFunction(prob, h="exp(-x/2)"), 0.75)
    spc = eigenvalues_real(prob, Friedrichs())
    bottom = spc[0].value if len(spc) else spc.floor
    note(record_property, "10 Kalf inequality with mu = 3/4 and Friedrichs bottom >= mu",
         "holds %s (mu_max %.3f, principal type %s), bottom of spectrum %.3f"
         % (rep.holds, rep.mu_max, rep.principal_type, bottom))
    assert rep.holds and rep.principal_type
    assert bottom >= 0.75
    assert bottom == pytest.approx(1.0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
