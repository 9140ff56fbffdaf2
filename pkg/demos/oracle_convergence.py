"""Shooting against second-order finite differences on [0, 1] and on the half line."""

import math

from kreinlab import SLProblem, TruncationPolicy, eigenvalues_real, kernel_basis, lp_family
from kreinlab.extensions import Friedrichs
from kreinlab.oracle import Robin, convergence_order, discretize, eigenvalues_discrete

reg = SLProblem.from_strings(0, 1, q1="1")
shoot = eigenvalues_real(reg, Friedrichs(), (None, 300.0), max_count=3).values
print("Dirichlet on [0,1]")
for n in (250, 500, 1000, 2000):
    fd = eigenvalues_discrete(discretize(reg, 1.0, n), 3)
    print("  n = %5d  " % n + "  ".join("%.3e" % abs(d - s) for d, s in zip(fd, shoot)))
errs = [eigenvalues_discrete(discretize(reg, 1.0, n), 1)[0] - (1 + math.pi ** 2) for n in (250, 500, 1000, 2000)]
print("  orders", ["%.2f" % o for o in convergence_order(errs)])

half = SLProblem.from_strings(0, "inf", q1="1", truncation=TruncationPolicy(cutoffs=(2.5, 5, 10, 20, 40)))
spec = lp_family(half, kernel_basis(half), 1.0)
lam = eigenvalues_real(half, spec)[0].value
print("Robin member l = 1 on [0, 40], shooting gives %.12f" % lam)
errs = []
for n in (1000, 2000, 4000, 8000):
    d = eigenvalues_discrete(discretize(half, 40.0, n, Robin(spec.theta)), 1)[0]
    errs.append(d - lam)
    print("  n = %5d  %.12f" % (n, d))
print("  orders", ["%.2f" % o for o in convergence_order(errs)])
