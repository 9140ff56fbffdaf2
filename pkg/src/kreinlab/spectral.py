"""Eigenvalues and eigenfunctions of an (SLProblem, ExtensionSpec) pair."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .classify import EndpointKind, classify_endpoint, principal_pair
from .errors import (NonConvergent, NotAnEigenvalue, StepFailure, TruncationUnconverged, UnsupportedCase,
                     WindingMismatch, WindowExhausted)
from .extensions import (BracketMatrix, BracketScalar, ExtensionSpec, Friedrichs, RobinLP, SectorialArlinskii,
                         SectorialKrein, ratio_at_m)
from .ode import DEFAULT_TOL, Trajectory, norm_extra, run
from .problem import SLProblem

EIG_TOL = 1e-10
DRIFT_TOL = 1e-6
RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class Eigenvalue:
    index: int
    value: complex
    residual: float
    drift: float = 0.0
    converged: bool = True
    multiplicity: int = 1
    in_sector: Optional[bool] = None

    @property
    def real(self) -> float:
        return float(np.real(self.value))


@dataclass
class Spectrum:
    eigenvalues: list
    window: tuple
    floor: Optional[float] = None
    mode: str = "real"
    stats: dict = field(default_factory=dict)

    @property
    def values(self):
        return [e.value for e in self.eigenvalues]

    def __len__(self):
        return len(self.eigenvalues)

    def __iter__(self):
        return iter(self.eigenvalues)

    def __getitem__(self, i):
        return self.eigenvalues[i]

    def rows(self, family_param=""):
        out = []
        for e in self.eigenvalues:
            z = complex(e.value)
            out.append((family_param, e.index, z.real, z.imag, e.residual, e.converged))
        return out

    def to_dict(self):
        return {
            "mode": self.mode,
            "window": [_jsonable(w) for w in self.window],
            "floor": self.floor,
            "eigenvalues": [
                {"n": e.index, "re": complex(e.value).real, "im": complex(e.value).imag, "residual": e.residual,
                 "drift": e.drift, "converged": e.converged, "multiplicity": e.multiplicity,
                 "in_sector": e.in_sector}
                for e in self.eigenvalues
            ],
            "stats": self.stats,
        }


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


# ---------------------------------------------------------------------------
# Real spectra by Prufer matching


def essential_floor(prob: SLProblem, samples: int = 64) -> Optional[float]:
    """min q/k over the outer quarter of the truncated domain (limit-point ends only)."""
    if prob.closed_at_m:
        return None
    a, X = prob.a, prob.right_end
    xs = np.linspace(a + 0.75 * (X - a), X, samples)
    return float(min(prob.q1(x) / prob.k(x) for x in xs))


def left_data(spec: ExtensionSpec):
    """(u, pu) at a and the Prufer angle of the left boundary condition."""
    if spec.dirichlet_at_a:
        return (0.0, 1.0), 0.0
    theta = spec.robin_theta
    if theta is None:
        raise UnsupportedCase("%s has no separated condition at a" % type(spec).__name__)
    theta = float(np.real(theta))
    return (1.0, theta), math.atan2(1.0, theta)


def decaying_angle(prob: SLProblem, X: float, lam: float) -> float:
    """Prufer angle of the decaying WKB solution at X, in (0, pi]."""
    z = prob.p(X) * (prob.q1(X) - lam * prob.k(X))
    if z <= 0:
        return math.pi
    return math.atan2(1.0, -math.sqrt(z))


class _RealMatcher:
    """Delta(lam) = theta_L(xc) - theta_R(xc); eigenvalue n (1-based) at Delta = (n-1) pi."""

    def __init__(self, prob: SLProblem, spec: ExtensionSpec, X: float, tol: float):
        self.prob, self.spec, self.X, self.tol = prob, spec, X, tol
        self.data, self.alpha = left_data(spec)
        a = prob.a
        if prob.closed_at_m:
            self.xc = 0.5 * (a + X)
        else:
            cuts = [c for c in prob.cutoffs if c < X]
            self.xc = cuts[0] if cuts else 0.5 * (a + X)
        self.evals = 0

    def right_angle(self, lam):
        if self.prob.closed_at_m:
            return math.pi
        return decaying_angle(self.prob, self.X, lam)

    def delta(self, lam: float) -> float:
        self.evals += 1
        prob = self.prob
        tl = run(prob, lam, prob.a, [self.data], self.xc, self.tol, record=False, theta0=[self.alpha])[0]
        beta = self.right_angle(lam)
        tr = run(prob, lam, self.X, [(math.sin(beta), math.cos(beta))], self.xc, self.tol, record=False,
                 theta0=[beta])[0]
        return float(tl.theta[-1] - tr.theta[-1])

    def count(self, lam: float) -> int:
        d = self.delta(lam)
        return max(0, math.ceil(d / math.pi - 1e-12)) if d > 0 else 0


def eigenvalues_real(prob: SLProblem, spec: ExtensionSpec, window=(None, None), max_count: int = 10,
                     tol: float = DEFAULT_TOL, floor: Optional[float] = None, check_truncation: bool = True,
                     grid: int = 200) -> Spectrum:
    """Real eigenvalues in ``window`` of a separated self-adjoint extension."""
    if prob.sectorial:
        raise UnsupportedCase("use eigenvalues_sectorial for complex potentials")
    if not isinstance(spec, (RobinLP, Friedrichs)) and not (isinstance(spec, BracketScalar) and spec.degenerate):
        if isinstance(spec, (BracketScalar, BracketMatrix)):
            return eigenvalues_bracket(prob, spec, window, max_count, tol=tol, grid=grid)
        raise UnsupportedCase("eigenvalues_real handles Robin, Friedrichs and Krein specs")
    kind = None if prob.closed_at_m else classify_endpoint(prob).kind
    if kind == EndpointKind.LIMIT_CIRCLE or isinstance(spec, BracketScalar):
        return _eigen_principal_ratio(prob, spec, window, max_count, tol, grid)

    lo, hi = window
    est = essential_floor(prob)
    fl = est if floor is None else floor
    if lo is None:
        lo = _lower_bound(prob, spec)
    if hi is None:
        if fl is None:
            raise ValueError("an upper window bound is required for problems without an essential floor")
        hi = fl
    if fl is not None and hi >= fl:
        hi = fl - 1e-9 * max(1.0, abs(fl))
    if hi <= lo:
        raise WindowExhausted("window [%r, %r] lies above the essential-spectrum floor %r" % (window[0], window[1], fl))

    X = prob.right_end
    main = _RealMatcher(prob, spec, X, tol)
    alt = None
    if check_truncation and not prob.closed_at_m:
        cuts = [c for c in prob.cutoffs if c < X]
        if len(cuts) >= 2:
            alt = _RealMatcher(prob, spec, cuts[-1], tol)

    d_lo, d_hi = main.delta(lo), main.delta(hi)
    n_lo = _count(d_lo)
    n_hi = _count(d_hi)
    out = []
    left = lo
    for j in range(n_lo, min(n_hi, n_lo + max_count)):
        target = j * math.pi
        f = lambda lam: main.delta(lam) - target
        lam = brentq(f, left, hi, xtol=1e-13, rtol=EIG_TOL * 1e-2, maxiter=200)
        resid = abs(math.sin(main.delta(lam)))
        drift = 0.0
        if alt is not None:
            g = lambda x: alt.delta(x) - target
            a_lo, a_hi = _expand(g, lam, lo, hi)
            lam2 = brentq(g, a_lo, a_hi, xtol=1e-13, rtol=EIG_TOL * 1e-2, maxiter=200)
            drift = abs(lam - lam2)
            if drift > DRIFT_TOL * max(1.0, abs(lam)):
                raise TruncationUnconverged("eigenvalue %d drifts by %.3g between cutoffs %r and %r"
                                            % (j + 1, drift, alt.X, X))
        out.append(Eigenvalue(j + 1, lam, resid, drift, resid < RESIDUAL_TOL))
        left = lam
    stats = {"evaluations": main.evals + (alt.evals if alt else 0), "matching_point": main.xc,
             "count_below_window": n_lo}
    return Spectrum(out, (lo, hi), fl, "real", stats)


def _count(d):
    return max(0, math.ceil(d / math.pi - 1e-12)) if d > 0 else 0


def _expand(g, lam, lo, hi):
    w = 1e-6 * max(1.0, abs(lam))
    for _ in range(60):
        a, b = max(lo, lam - w), min(hi, lam + w)
        if g(a) <= 0 <= g(b):
            return a, b
        w *= 4
    raise TruncationUnconverged("eigenvalue not bracketed at the alternate cutoff")


def _lower_bound(prob: SLProblem, spec: ExtensionSpec) -> float:
    """A value below the lowest eigenvalue: min q/k minus a Robin allowance."""
    a, X = prob.a, prob.right_end
    xs = np.linspace(a, X, 257)[:-1] if prob.closed_at_m else np.linspace(a, X, 257)
    qk = min(prob.q1(x) / prob.k(x) for x in xs[1:]) if not prob.closed_at_m else min(
        prob.q1(x) / prob.k(x) for x in xs)
    theta = None if spec.dirichlet_at_a else spec.robin_theta
    extra = 0.0
    if theta is not None and np.real(theta) < 0:
        pa, ka = prob.p(a), prob.k(a)
        extra = 4.0 * float(np.real(theta)) ** 2 / (pa * ka) + 1.0
    return float(qk - extra - 1.0)


def _eigen_principal_ratio(prob, spec, window, max_count, tol, grid):
    """Left condition at a, (v/g)(m) = 0 at a limit-circle m (Friedrichs behaviour)."""
    lo, hi = window
    if lo is None or hi is None:
        raise ValueError("a finite window is required at a limit-circle end")
    pair = principal_pair(prob)
    g = spec.g if isinstance(spec, BracketScalar) else pair.g
    data, _ = left_data(spec) if not isinstance(spec, BracketScalar) else ((1.0, spec.robin_theta), None)
    X = prob.right_end
    cuts = [c for c in prob.cutoffs if c < X]

    def miss(lam):
        t = run(prob, lam, prob.a, [data], X, tol, checkpoints=cuts)[0]
        return float(np.real(ratio_at_m(t, g).value))

    lams = np.linspace(lo, hi, grid)
    vals = [miss(l) for l in lams]
    roots = []
    for i in range(len(lams) - 1):
        if vals[i] == 0:
            roots.append(lams[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(miss, lams[i], lams[i + 1], xtol=1e-13, rtol=EIG_TOL * 1e-2))
        if len(roots) >= max_count:
            break
    out = []
    for lam in roots:
        zeros = run(prob, lam, prob.a, [data], X, tol)[0].sign_changes()
        scale = max(1.0, abs(data[0] / g.state_at(prob.a).u))
        out.append(Eigenvalue(zeros + 1, lam, abs(miss(lam)) / scale, 0.0, True))
    return Spectrum(out, (lo, hi), None, "principal-ratio", {"grid": grid})


# ---------------------------------------------------------------------------
# Bracket families: det M(lambda)


def condition_matrix(prob: SLProblem, spec, lam: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Rows: the two conditions of ``spec``; columns: solutions with data (1,0), (0,1) at a."""
    X = prob.right_end
    cuts = [c for c in prob.cutoffs if c < X]
    fs = run(prob, lam, prob.a, [(1.0, 0.0), (0.0, 1.0)], X, tol, checkpoints=cuts)
    M = np.zeros((2, 2))
    for j, v in enumerate(fs):
        M[:, j] = np.real(np.array(spec.conditions(v)))
    return M


def rank_deficiency(M: np.ndarray, scale: float, rel: float = 1e-8) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.count_nonzero(s < rel * scale))


def eigenvalues_bracket(prob: SLProblem, spec, window, max_count: int = 10, tol: float = DEFAULT_TOL,
                        grid: int = 200) -> Spectrum:
    """Roots of det M(lambda) on ``window``; multiplicity from the rank of M."""
    if not isinstance(spec, (BracketScalar, BracketMatrix)):
        raise UnsupportedCase("eigenvalues_bracket needs a bracket family spec")
    lo, hi = window
    if lo is None or hi is None:
        raise ValueError("a finite window is required for bracket families")
    lams = np.linspace(lo, hi, grid)
    if lo < 0 < hi and not np.any(lams == 0):
        lams = np.sort(np.append(lams, 0.0))
    Ms = [condition_matrix(prob, spec, l, tol) for l in lams]
    scale = max(np.linalg.svd(M, compute_uv=False)[0] for M in Ms)
    if scale == 0:
        raise NonConvergent("condition matrix vanishes on the whole window")
    dets = np.array([np.linalg.det(M) for M in Ms]) / scale ** 2

    def det(l):
        return np.linalg.det(condition_matrix(prob, spec, l, tol)) / scale ** 2

    found = []
    for i in range(len(lams) - 1):
        if dets[i] == 0:
            found.append(lams[i])
        elif dets[i] * dets[i + 1] < 0:
            found.append(brentq(det, lams[i], lams[i + 1], xtol=1e-13, rtol=EIG_TOL * 1e-2))
    # even-order roots: local minima of |det| where M loses rank
    ad = np.abs(dets)
    for i in range(1, len(lams) - 1):
        if ad[i] <= ad[i - 1] and ad[i] <= ad[i + 1]:
            if any(abs(lams[i] - r) <= (lams[1] - lams[0]) for r in found):
                continue
            if lams[i] == 0 or rank_deficiency(Ms[i], scale) > 0:
                found.append(lams[i])
                continue
            res = minimize_scalar(lambda l: abs(det(l)), bounds=(lams[i - 1], lams[i + 1]), method="bounded",
                                  options={"xatol": 1e-12})
            if rank_deficiency(condition_matrix(prob, spec, res.x, tol), scale, 1e-6) > 0:
                found.append(float(res.x))
    merged = []
    for lam in sorted(found):
        if merged and abs(lam - merged[-1]) <= 1e-8 * max(1.0, abs(lam)):
            if abs(lam) < abs(merged[-1]):
                merged[-1] = lam
            continue
        merged.append(lam)
    found = merged[:max_count]
    out = []
    for i, lam in enumerate(found):
        M = condition_matrix(prob, spec, lam, tol)
        s = np.linalg.svd(M, compute_uv=False)
        mult = max(1, rank_deficiency(M, scale))
        out.append(Eigenvalue(i + 1, float(lam), float(s[-1] / scale), 0.0, s[-1] < RESIDUAL_TOL * scale, mult))
    return Spectrum(out, (lo, hi), None, "bracket", {"grid": len(lams), "scale": scale})


# ---------------------------------------------------------------------------
# Sectorial spectra: argument principle on an analytic miss function


def miss_function(prob: SLProblem, spec: ExtensionSpec, tol: float = DEFAULT_TOL) -> Callable[[complex], complex]:
    """D(lambda), analytic in lambda, vanishing exactly at the eigenvalues."""
    a = prob.a
    if prob.closed_at_m:
        if not isinstance(spec, Friedrichs) and spec.robin_theta is None:
            raise UnsupportedCase("only separated conditions are supported on a closed interval")
        data = (0.0, 1.0) if spec.dirichlet_at_a else (1.0, complex(spec.robin_theta))

        def D(lam):
            t = run(prob, complex(lam), a, [data], prob.m, tol, record=False, force_complex=True)[0]
            return complex(t.end.u)
        return D

    X = prob.right_end
    if isinstance(spec, Friedrichs):
        def D(lam):
            kap = _branch_sqrt(prob, X, lam)
            t = run(prob, complex(lam), X, [(1.0 + 0j, -kap)], a, tol, record=False, force_complex=True)[0]
            return complex(t.end.u) * _growth(prob, X, lam)
        return D
    if isinstance(spec, (SectorialKrein, SectorialArlinskii)):
        return _integral_miss(prob, spec, tol)
    if spec.robin_theta is not None:
        theta = complex(spec.robin_theta)

        def D(lam):
            kap = _branch_sqrt(prob, X, lam)
            t = run(prob, complex(lam), X, [(1.0 + 0j, -kap)], a, tol, record=False, force_complex=True)[0]
            e = t.end
            return complex(e.pu - theta * e.u) * _growth(prob, X, lam)
        return D
    raise UnsupportedCase("no miss function for %s" % type(spec).__name__)


def _growth(prob, X, lam):
    """exp(-s (X - a)) with s the decay rate at X: removes the analytic growth of
    a solution integrated back from X without adding zeros."""
    s = _branch_sqrt(prob, X, lam) / prob.p(X)
    return cmath.exp(-s * (X - prob.a))


def _branch_sqrt(prob, X, lam, adjoint=False):
    z = complex(prob.p(X) * (prob.q(X, adjoint) - lam * prob.k(X)))
    r = cmath.sqrt(z)
    return r if r.real >= 0 else -r


def _integral_miss(prob, spec, tol):
    """D = -(c + w) phi(a) + lam int k (psi - 2y) phi, psi(a) = 1, phi decaying."""
    a, X = prob.a, prob.right_end
    P, K = prob.p, prob.k
    y = getattr(spec, "y", None)
    y = None if (y is None or y.is_zero()) else y
    if isinstance(spec, SectorialKrein):
        shift = 0.0
    else:
        shift = complex(spec.w) + (0.0 if spec.drop_unit_term else 1.0)
    sig = _branch_sqrt(prob, X, 0.0, adjoint=True)

    def D(lam):
        lam = complex(lam)
        kap = _branch_sqrt(prob, X, lam)

        def rhs(x, s):
            p, k = P(x), K(x)
            q = prob.q(x)
            qa = prob.q(x, adjoint=True)
            phi, pphi, psi, ppsi = s[0], s[1], s[2], s[3]
            out = [pphi / p, (q - lam * k) * phi, ppsi / p, qa * psi, k * psi * phi, 0j]
            if y is not None:
                out[5] = k * y(x) * phi
            return out

        s0 = np.array([1 + 0j, -kap, 1 + 0j, -sig, 0j, 0j])
        sol = solve_ivp(rhs, (X, a), s0, method="DOP853", rtol=tol, atol=tol * 1e-6)
        if not sol.success:
            raise StepFailure("miss-function integration failed: %s" % sol.message, float(sol.t[-1]))
        phi_a, _, psi_a, _, I_psi, I_y = sol.y[:, -1]
        # both integrals were accumulated from X down to a
        I_psi, I_y = -I_psi, -I_y
        tail = K(X) / (sig + kap)  # int_X^inf k psi phi with psi(X) = phi(X) = 1
        return complex(-shift * phi_a + lam * ((I_psi + tail) / psi_a - 2.0 * I_y)) * _growth(prob, X, lam)

    return D


@dataclass(frozen=True)
class Rect:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def corners(self):
        return (complex(self.re_lo, self.im_lo), complex(self.re_hi, self.im_lo),
                complex(self.re_hi, self.im_hi), complex(self.re_lo, self.im_hi))

    def contains(self, z, pad=0.0):
        return (self.re_lo - pad <= z.real <= self.re_hi + pad) and (self.im_lo - pad <= z.imag <= self.im_hi + pad)

    @property
    def size(self):
        return max(self.re_hi - self.re_lo, self.im_hi - self.im_lo)

    def split(self, fr=0.5173, fi=0.4827):
        xm = self.re_lo + fr * (self.re_hi - self.re_lo)
        ym = self.im_lo + fi * (self.im_hi - self.im_lo)
        return [Rect(self.re_lo, xm, self.im_lo, ym), Rect(xm, self.re_hi, self.im_lo, ym),
                Rect(xm, self.re_hi, ym, self.im_hi), Rect(self.re_lo, xm, ym, self.im_hi)]


class _Winder:
    def __init__(self, D, max_depth=14):
        self.D = D
        self.cache = {}
        self.max_depth = max_depth

    def f(self, z):
        z = complex(round(z.real, 14), round(z.imag, 14))
        if z not in self.cache:
            self.cache[z] = self.D(z)
        return self.cache[z]

    def _edge(self, z0, z1, f0, f1, depth):
        if f0 == 0 or f1 == 0:
            raise NonConvergent("miss function vanishes on the contour at %r" % (z0 if f0 == 0 else z1))
        d = cmath.phase(f1 / f0)
        if abs(d) < math.pi / 4 and depth >= 2:
            return d
        if depth >= self.max_depth:
            if abs(d) < math.pi / 2:
                return d
            raise NonConvergent("contour too close to a root near %r" % ((z0 + z1) / 2))
        zm = 0.5 * (z0 + z1)
        fm = self.f(zm)
        return self._edge(z0, zm, f0, fm, depth + 1) + self._edge(zm, z1, fm, f1, depth + 1)

    def winding(self, rect: Rect) -> int:
        c = rect.corners()
        fs = [self.f(z) for z in c]
        total = 0.0
        for i in range(4):
            total += self._edge(c[i], c[(i + 1) % 4], fs[i], fs[(i + 1) % 4], 0)
        w = total / (2 * math.pi)
        n = int(round(w))
        if abs(w - n) > 1e-3:
            raise NonConvergent("winding number %.4f is not an integer" % w)
        return n


def _newton(D, z, mult=1, tol=1e-13, maxiter=60):
    for _ in range(maxiter):
        h = 1e-6 * max(1.0, abs(z))
        f = D(z)
        df = (D(z + h) - D(z - h)) / (2 * h)
        if df == 0:
            break
        step = mult * f / df
        z = z - step
        if abs(step) <= tol * max(1.0, abs(z)):
            return z, True
    return z, abs(D(z)) == 0


def _roots(winder, D, rect, count, depth=0):
    if count == 0:
        return []
    if count == 1 or rect.size < 1e-6 or depth > 24:
        z, ok = _newton(D, complex(0.5 * (rect.re_lo + rect.re_hi), 0.5 * (rect.im_lo + rect.im_hi)), count)
        if ok and rect.contains(z, 1e-9 * max(1.0, abs(z))):
            return [(z, count)]
        if count == 1 and rect.size < 1e-6:
            return [(z, count)]
    for fr, fi in ((0.5173, 0.4827), (0.4611, 0.5389), (0.5531, 0.4469)):
        try:
            subs = rect.split(fr, fi)
            ws = [winder.winding(s) for s in subs]
        except NonConvergent:
            continue
        if sum(ws) == count:
            out = []
            for s, w in zip(subs, ws):
                out.extend(_roots(winder, D, s, w, depth + 1))
            return out
    raise WindingMismatch("subdivision of %r does not account for %d roots" % (rect, count))


def eigenvalues_sectorial(prob: SLProblem, spec: ExtensionSpec, rect, max_count: int = 10,
                          tol: float = DEFAULT_TOL, sector=None) -> Spectrum:
    """Complex eigenvalues inside ``rect`` = (re_lo, re_hi, im_lo, im_hi)."""
    rect = rect if isinstance(rect, Rect) else Rect(*rect)
    D = miss_function(prob, spec, tol)
    winder = _Winder(D)
    total = winder.winding(rect)
    found = _roots(winder, D, rect, total)
    if sum(m for _, m in found) != total:
        raise WindingMismatch("polished %d roots, winding number %d" % (sum(m for _, m in found), total))
    found.sort(key=lambda r: (round(r[0].real, 9), r[0].imag))
    out = []
    scale = max(abs(v) for v in winder.cache.values())
    for i, (z, mult) in enumerate(found[:max_count]):
        resid = abs(D(z)) / scale
        ins = None
        if sector is not None:
            ins = sector.contains(z)
        out.append(Eigenvalue(i + 1, complex(z), resid, 0.0, resid < RESIDUAL_TOL, mult, ins))
    return Spectrum(out, (rect.re_lo, rect.re_hi, rect.im_lo, rect.im_hi), None, "sectorial",
                    {"winding": total, "evaluations": len(winder.cache)})


# ---------------------------------------------------------------------------
# Eigenfunctions


def eigenfunction(prob: SLProblem, spec: ExtensionSpec, lam, tol: float = DEFAULT_TOL) -> Trajectory:
    """Eigenfunction with unit weighted norm; NotAnEigenvalue when the residual is too large."""
    if isinstance(spec, SectorialKrein):
        if abs(lam) > 1e-12:
            raise UnsupportedCase("sectorial Krein eigenfunctions are provided for lambda = 0 only")
        return _unit_norm(prob, spec.psi, tol)
    if isinstance(spec, SectorialArlinskii):
        raise UnsupportedCase("eigenfunctions of the pair family are not provided")
    if isinstance(spec, (BracketScalar, BracketMatrix)) and not (isinstance(spec, BracketScalar) and spec.degenerate):
        return _bracket_eigenfunction(prob, spec, float(np.real(lam)), tol)
    if prob.sectorial or isinstance(lam, complex) and lam.imag != 0:
        return _complex_eigenfunction(prob, spec, complex(lam), tol)
    lam = float(np.real(lam))
    kind = None if prob.closed_at_m else classify_endpoint(prob).kind
    if kind == EndpointKind.LIMIT_CIRCLE or isinstance(spec, BracketScalar):
        raise UnsupportedCase("eigenfunctions at a limit-circle end are not provided")
    m = _RealMatcher(prob, spec, prob.right_end, tol)
    d = m.delta(lam)
    resid = abs(math.sin(d))
    if resid > RESIDUAL_TOL:
        raise NotAnEigenvalue("lambda=%r is not an eigenvalue (matching residual %.3g)" % (lam, resid))
    return _stitched(prob, m, lam, tol)


def _stitched(prob, m: _RealMatcher, lam, tol):
    X, xc, a = m.X, m.xc, prob.a
    inner = [c for c in prob.cutoffs if a < c < xc]
    outer = [c for c in prob.cutoffs if xc < c < X]
    left = run(prob, lam, a, [m.data], xc, tol, extras=[norm_extra(0, "norm")], checkpoints=inner,
               theta0=[m.alpha])[0]
    beta = m.right_angle(lam)
    right = run(prob, lam, X, [(math.sin(beta), math.cos(beta))], xc, tol, extras=[norm_extra(0, "norm")],
                checkpoints=outer, theta0=[beta])[0]
    ul, pl, ll = left.scaled_at(xc)
    ur, pr, lr = right.scaled_at(xc)
    c = (ul * ur + pl * pr) / (ur * ur + pr * pr)
    right = right._rescaled(math.copysign(1.0, c), math.log(abs(c)) + ll - lr)
    shift = round((left.theta[-1] - right.theta[-1]) / math.pi) * math.pi
    xs = np.concatenate([left.xs, right.xs[::-1][1:]])
    u = np.concatenate([left.u, right.u[::-1][1:]])
    pu = np.concatenate([left.pu, right.pu[::-1][1:]])
    ls = np.concatenate([left.log_scale, right.log_scale[::-1][1:]])
    th = np.concatenate([left.theta, (right.theta + shift)[::-1][1:]])
    segs = {"norm": (left.segment("norm") + right.segment("norm")[::-1], ((0, 2),), True)}
    bounds = list(left.segment_bounds) + list(right.segment_bounds)[::-1]
    t = Trajectory(prob, lam, tol, False, xs, u, pu, ls, th, left.stats, segs, bounds)
    return _unit_norm(prob, t, tol, tail_from_right=True)


def _unit_norm(prob, t: Trajectory, tol, tail_from_right=False):
    if "norm" in t.segments:
        total = float(np.real(sum(t.segment("norm"))))
    else:
        r = run(prob, t.lam, prob.a, [(t.start.u, t.start.pu)], prob.right_end, tol,
                extras=[norm_extra(0, "norm")], record=False, force_complex=t.is_complex, adjoint=t.adjoint)[0]
        total = float(np.real(sum(r.segment("norm"))))
    if not prob.closed_at_m:
        e = t.state_at(prob.right_end) if t.xs[-1] != prob.right_end else t.end
        kap = abs(_branch_sqrt(prob, prob.right_end, t.lam, t.adjoint).real) or 1.0
        total += prob.k(prob.right_end) * abs(e.u) ** 2 / (2 * kap / math.sqrt(prob.p(prob.right_end)))
    if not total > 0:
        raise NonConvergent("eigenfunction norm is not positive")
    s = 1.0 / math.sqrt(total)
    first = t.u[1] if abs(t.u[0]) < 1e-300 else t.u[0]
    if np.real(first) < 0:
        s = -s
    return t.scaled(s)


def _bracket_eigenfunction(prob, spec, lam, tol):
    M = condition_matrix(prob, spec, lam, tol)
    _, s, vh = np.linalg.svd(M)
    scale = max(1.0, s[0])
    if s[-1] > RESIDUAL_TOL * scale and s[-1] > 1e-8:
        raise NotAnEigenvalue("lambda=%r: smallest singular value of M is %.3g" % (lam, s[-1]))
    c = vh[-1]
    t = run(prob, lam, prob.a, [(c[0], c[1])], prob.right_end, tol, extras=[norm_extra(0, "norm")])[0]
    return _unit_norm(prob, t, tol)


def _complex_eigenfunction(prob, spec, lam, tol):
    if not prob.closed_at_m:
        raise UnsupportedCase("complex eigenfunctions are provided on closed intervals")
    D = miss_function(prob, spec, tol)
    data = (0.0, 1.0) if spec.dirichlet_at_a else (1.0, complex(spec.robin_theta))
    t = run(prob, lam, prob.a, [data], prob.m, tol, extras=[norm_extra(0, "norm")], force_complex=True)[0]
    umax = float(np.max(np.abs(t.true_values()[0])))
    if abs(D(lam)) > RESIDUAL_TOL * umax:
        raise NotAnEigenvalue("lambda=%r: boundary residual %.3g" % (lam, abs(D(lam)) / umax))
    total = float(np.real(sum(t.segment("norm"))))
    return t.scaled(1.0 / math.sqrt(total))
