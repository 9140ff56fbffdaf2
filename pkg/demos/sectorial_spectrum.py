"""Complex potential q = 1 + 0.5i on [0, 1]: eigenvalues, sector and numerical range."""

import math

from kreinlab import SLProblem, eigenvalues_sectorial, sector_check
from kreinlab.extensions import Friedrichs
from kreinlab.forms import Sector, numerical_range_samples

prob = SLProblem.from_strings(0, 1, q1="1", q2="0.5")
sector = Sector.from_tan(1.0, 0.5)
print("sector check:", sector_check(prob, "1", sector).ok)

spc = eigenvalues_sectorial(prob, Friedrichs(), (0.0, 100.0, -5.0, 5.0), max_count=3, sector=sector)
for n, e in enumerate(spc, start=1):
    exact = 1 + 0.5j + (n * math.pi) ** 2
    print("lambda_%d = %s  err %.1e" % (n, e.value, abs(e.value - exact)))

pts = numerical_range_samples(prob, "1")
print("%d numerical-range samples, all in sector: %s" % (len(pts), all(sector.contains(z, 1e-9) for z in pts)))
