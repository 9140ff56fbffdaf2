"""Lowest eigenvalue of -u'' + u on the half line across the Robin family.

Writes robin_sweep.csv next to this script and prints the closed form
1 - (1 - l/2)^2 alongside.  Above l = 2 the eigenvalue merges into the
essential spectrum [1, inf).
"""

import csv
from pathlib import Path

import numpy as np

from kreinlab import SLProblem, TruncationPolicy, eigenvalues_real, kernel_basis, lp_family

prob = SLProblem.from_strings(0, "inf", q1="1", truncation=TruncationPolicy(cutoffs=(2.5, 5, 10, 20, 40)))
basis = kernel_basis(prob)  # shared by every member of the family

rows = []
for l in np.linspace(0.0, 2.5, 11):
    spc = eigenvalues_real(prob, lp_family(prob, basis, l))
    exact = 1 - (1 - l / 2) ** 2 if l < 2 else None
    lam = spc[0].value if len(spc) else None
    rows.append((l, lam, exact))
    if lam is None:
        print("l = %.2f  no eigenvalue below the floor %.3f" % (l, spc.floor))
    else:
        print("l = %.2f  lambda_1 = %.12f  exact %.12f  err %.1e" % (l, lam, exact, abs(lam - exact)))

out = Path(__file__).with_suffix(".csv")
with out.open("w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["l", "lambda_1", "closed_form"])
    w.writerows(rows)
print("wrote", out)
