"""Limit-circle end at x = 1 for q = -(3/16)/(1-x)^2, compared with Bessel zeros.

The principal solution is sqrt(t) J_{1/4}(k t) with t = 1 - x, so every
member of the scalar family reduces to a Robin condition at 0 whose
eigenvalues are roots of an explicit Bessel expression.
"""

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from kreinlab import SLProblem, classify_endpoint, eigenvalues_real, kernel_basis, principal_pair
from kreinlab.extensions import lc_scalar_family

prob = SLProblem.from_strings(0, 1, q1="-(3/16)/(1-x)^2")
print("endpoint at 1:", classify_endpoint(prob).kind.value)

basis = kernel_basis(prob)
pair = principal_pair(prob)


def bessel_eigenvalues(theta, count, kmax=10.0):
    def miss(k):
        du = 0.5 * jv(0.25, k) + 0.5 * k * (jv(-0.75, k) - jv(1.25, k))
        return -du - theta * jv(0.25, k)

    ks = np.linspace(0.05, kmax, 5000)
    vals = miss(ks)
    roots = [brentq(miss, ks[i], ks[i + 1]) ** 2 for i in range(len(ks) - 1) if vals[i] * vals[i + 1] < 0]
    return roots[:count]


for beta in (0.0, 1.0, 10.0):
    spec = lc_scalar_family(prob, basis, beta=beta, pair=pair)
    spc = eigenvalues_real(prob, spec, (-50.0, 60.0), max_count=3)
    # beta = 0 is the Krein extension: lambda = 0 is the kernel, not a Bessel root
    exact = bessel_eigenvalues(spec.reduced_theta, 3)
    if beta == 0.0:
        exact = [0.0] + exact[:2]
    print("beta = %g (theta = %.6f)" % (beta, spec.reduced_theta))
    for e, x in zip(spc, exact):
        print("   %.10f  vs  %.10f" % (e.value, x))
