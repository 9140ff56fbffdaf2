"""Quadratic forms of the extensions, sectoriality and the divergence-form identity."""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .classify import GaugeFunction, sample_grid
from .errors import DecompositionError, InequalityViolation, NonConvergent, UnsupportedCase
from .expr import parse
from .extensions import (BracketMatrix, BracketScalar, Friedrichs, RobinLP, SectorialArlinskii, SectorialKrein,
                         ratio_at_m)
from .ode import Trajectory, run
from .problem import SLProblem, improper_integral

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def _ev(fn, x):
    """Evaluate a scalar callable on a scalar or an array."""
    if np.ndim(x) == 0:
        return fn(x)
    vals = [fn(float(t)) for t in np.ravel(x)]
    return np.array(vals).reshape(np.shape(x))


class _Sampled:
    """Cubic Hermite interpolant of (u, u') built from exact ODE states."""

    def __init__(self, xs, u, du):
        self.xs = np.asarray(xs, dtype=float)
        self.cplx = np.iscomplexobj(u)
        if self.cplx:
            self._re = CubicHermiteSpline(self.xs, np.real(u), np.real(du))
            self._im = CubicHermiteSpline(self.xs, np.imag(u), np.imag(du))
        else:
            self._re = CubicHermiteSpline(self.xs, u, du)

    def value(self, x):
        v = self._re(x)
        return v + 1j * self._im(x) if self.cplx else v

    def deriv(self, x):
        v = self._re(x, 1)
        return v + 1j * self._im(x, 1) if self.cplx else v


def sample_trajectory(t: Trajectory, n: int = 4000, lo: Optional[float] = None, hi: Optional[float] = None) -> _Sampled:
    """Exact states of ``t`` on a uniform grid, re-integrated between stored points."""
    prob = t.prob
    x0, x1 = min(t.xs[0], t.xs[-1]), max(t.xs[0], t.xs[-1])
    lo = x0 if lo is None else max(lo, x0)
    hi = x1 if hi is None else min(hi, x1)
    grid = np.linspace(lo, hi, n + 1)
    order = np.argsort(t.xs)
    sx = t.xs[order]
    su, spu, sl = t.u[order], t.pu[order], t.log_scale[order]
    us = np.zeros(len(grid), dtype=complex if t.is_complex else float)
    pus = np.zeros_like(us)
    j = 0
    for i in range(len(sx) - 1):
        a, b = sx[i], sx[i + 1]
        pts = []
        while j < len(grid) and grid[j] <= b:
            if grid[j] >= a:
                pts.append(j)
            j += 1
        if not pts:
            continue
        inner = [grid[k] for k in pts if a < grid[k] < b]
        sub = run(prob, t.lam, a, [(su[i], spu[i])], b, t.tol, adjoint=t.adjoint, checkpoints=inner,
                  force_complex=t.is_complex)[0]
        for k in pts:
            x = grid[k]
            if x == a:
                uu, pp, ll = su[i], spu[i], sl[i]
            elif x == b:
                uu, pp, ll = su[i + 1], spu[i + 1], sl[i + 1]
            else:
                m = int(np.argmin(np.abs(sub.xs - x)))
                uu, pp, ll = sub.u[m], sub.pu[m], sub.log_scale[m] + sl[i]
            f = math.exp(ll) if ll < 700 else math.inf
            us[k], pus[k] = uu * f, pp * f
    ps = np.array([prob.p(x) for x in grid])
    return _Sampled(grid, us, pus / ps)


class TrialFunction:
    """A function on [a, m) with value and derivative accessors.

    Built from an Expression (exact derivative, improper quadrature with
    tail extrapolation) or from a Trajectory (sampled on a uniform grid and
    integrated on the sampled range only).
    """

    def __init__(self, prob: SLProblem, expr=None, trajectory: Optional[Trajectory] = None, samples: int = 4000,
                 check: bool = True):
        if (expr is None) == (trajectory is None):
            raise ValueError("give exactly one of an expression or a trajectory")
        self.prob = prob
        self.trajectory = trajectory
        if expr is not None:
            self.expr = parse(expr)
            self._d = self.expr.derivative()
            self.support = None
            self._s = None
        else:
            self.expr = None
            self._s = sample_trajectory(trajectory, samples)
            self.support = (float(self._s.xs[0]), float(self._s.xs[-1]))
        self.value_at_a = complex(self.value(prob.a))
        if self.value_at_a.imag == 0:
            self.value_at_a = self.value_at_a.real
        self.vanishes_at_a = abs(self.value_at_a) <= 1e-10 * max(1.0, self.scale())
        self.finite_energy = None
        if check:
            self.finite_energy = self._energy_finite()

    @classmethod
    def from_expression(cls, prob, expr, **kw):
        return cls(prob, expr=expr, **kw)

    @classmethod
    def from_trajectory(cls, prob, trajectory, **kw):
        return cls(prob, trajectory=trajectory, **kw)

    @property
    def is_sampled(self):
        return self._s is not None

    def value(self, x):
        if self._s is not None:
            return self._s.value(x)
        return _ev(self.expr, x)

    def deriv(self, x):
        if self._s is not None:
            return self._s.deriv(x)
        return _ev(self._d, x)

    def scale(self):
        if self._s is not None:
            return float(np.max(np.abs(self._s.value(self._s.xs))))
        return 1.0

    def _energy_finite(self):
        prob = self.prob
        f = lambda x: (_ev(prob.p, x) * abs(self.deriv(x)) ** 2
                       + (abs(_ev(prob.q1, x)) + _ev(prob.k, x)) * abs(self.value(x)) ** 2)
        try:
            return bool(integrate(prob, f, [self]).converges)
        except Exception:
            return False

    def __repr__(self):
        src = str(self.expr) if self.expr is not None else "sampled on [%g, %g]" % self.support
        return "TrialFunction(%s)" % src


class _Combo:
    """u = v - sum c_i eta_i, with the same accessors as a TrialFunction."""

    def __init__(self, base, parts):
        self.base = base
        self.parts = [(c, t) for c, t in parts if c != 0]
        self.support = _common_support([base] + [t for _, t in self.parts])
        self.is_sampled = self.support is not None

    def value(self, x):
        out = self.base.value(x)
        for c, t in self.parts:
            out = out - c * t.value(x)
        return out

    def deriv(self, x):
        out = self.base.deriv(x)
        for c, t in self.parts:
            out = out - c * t.deriv(x)
        return out


def _common_support(trials):
    sup = [t.support for t in trials if getattr(t, "support", None) is not None]
    if not sup:
        return None
    return (max(s[0] for s in sup), min(s[1] for s in sup))


@dataclass(frozen=True)
class FormValue:
    value: complex
    error: float
    converges: bool = True

    def __complex__(self):
        return complex(self.value)

    def __float__(self):
        return float(np.real(self.value))


def integrate(prob: SLProblem, f: Callable, trials: Sequence, lo: Optional[float] = None) -> FormValue:
    """int_lo^m f: composite Gauss-Legendre on sampled ranges, adaptive quadrature otherwise.

    On the sampled path ``f`` receives arrays of nodes.
    """
    sup = _common_support(trials)
    lo = prob.a if lo is None else lo
    if sup is None:
        v = improper_integral(prob, f, start=lo)
        if not v.converges:
            return FormValue(math.inf, math.inf, False)
        return FormValue(v.value, v.error, True)
    a, b = max(lo, sup[0]), sup[1]
    grid = _grid_of(trials)
    edges = np.unique(np.concatenate([[a, b], grid[(grid > a) & (grid < b)]]))
    total = _gl(f, edges)
    coarse = _gl(f, np.unique(np.concatenate([edges[::2], [b]])))
    return FormValue(total, float(abs(total - coarse)), bool(np.isfinite(total)))


def _grid_of(trials):
    for t in trials:
        s = getattr(t, "_s", None)
        if s is None and isinstance(t, _Combo):
            for _, tt in [(1, t.base)] + t.parts:
                if getattr(tt, "_s", None) is not None:
                    return tt._s.xs
        if s is not None:
            return s.xs
    return np.array([])


def _gl(f, edges):
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    xs = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    vals = np.asarray(f(xs)).reshape(len(mid), len(_GL_NODES))
    return np.sum(half * (vals @ _GL_WEIGHTS))


def _gauge_accessors(prob, h):
    """(h, h') callables; a trajectory gauge is sampled once."""
    if h is None:
        return (lambda x: np.ones_like(x, dtype=float)), (lambda x: np.zeros_like(x, dtype=float)), \
            (lambda x: np.zeros_like(x, dtype=float))
    if not isinstance(h, GaugeFunction):
        h = GaugeFunction(prob, h=h)
    if h.expr is not None:
        dh = h.expr.derivative()
        return (lambda x: _ev(h.expr, x)), (lambda x: _ev(dh, x)), (lambda x: _ev(h.ratio, x))
    s = sample_trajectory(h.trajectory)
    return s.value, s.deriv, (lambda x: _ev(h.ratio, x))


def friedrichs_form(prob: SLProblem, h, u, v=None, lo: Optional[float] = None, adjoint: bool = False) -> FormValue:
    """int p h^2 (u/h)' conj((v/h)') + q_h u conj(v) in the gauge h (h=None means h = 1)."""
    v = u if v is None else v
    H, dH, ratio = _gauge_accessors(prob, h)
    P = prob.p

    def f(x):
        hx, dhx = H(x), dH(x)
        ux, vx = u.value(x), v.value(x)
        duh = (u.deriv(x) * hx - ux * dhx) / (hx * hx)
        dvh = (v.deriv(x) * hx - vx * dhx) / (hx * hx)
        qh = _ev(lambda t: prob.q(t, adjoint), x) - ratio(x)
        return _ev(P, x) * hx * hx * duh * np.conj(dvh) + qh * ux * np.conj(vx)

    return integrate(prob, f, [u, v], lo)


def weighted_inner(prob: SLProblem, u, v=None) -> FormValue:
    v = u if v is None else v
    return integrate(prob, lambda x: _ev(prob.k, x) * u.value(x) * np.conj(v.value(x)), [u, v])


_PSI_TRIALS = weakref.WeakKeyDictionary()


def _kernel_trial(prob, psi: Trajectory) -> "TrialFunction":
    """Sampled kernel element, cached per trajectory (resampling dominates the cost)."""
    trial = _PSI_TRIALS.get(psi)
    if trial is None:
        trial = _PSI_TRIALS[psi] = TrialFunction.from_trajectory(prob, psi, check=False)
    return trial


def extension_form(prob: SLProblem, spec, v, w=None, psi: Optional[Trajectory] = None, psis=None) -> FormValue:
    """t_spec[v, w] = t_F[u_v, u_w] + boundary term, u = v - eta(v)."""
    w = v if w is None else w
    if isinstance(spec, Friedrichs) or (isinstance(spec, RobinLP) and math.isinf(spec.l)):
        for t in (v, w):
            if not t.vanishes_at_a:
                raise DecompositionError("v(a) != 0 is outside the Friedrichs form domain")
        return friedrichs_form(prob, None, v, w)
    va, wa = v.value_at_a, w.value_at_a
    if isinstance(spec, RobinLP):
        if psi is None:
            raise ValueError("Robin members need the kernel element psi")
        pt = _kernel_trial(prob, psi)
        uv, uw = _Combo(v, [(va, pt)]), _Combo(w, [(wa, pt)])
        tf = _checked(friedrichs_form(prob, None, uv, uw))
        return FormValue(tf.value + spec.l * va * np.conj(wa) * spec.psi_norm_sq, tf.error)
    if isinstance(spec, BracketScalar):
        pt = _kernel_trial(prob, spec.psi)
        uv, uw = _Combo(v, [(va, pt)]), _Combo(w, [(wa, pt)])
        tf = _checked(friedrichs_form(prob, None, uv, uw))
        return FormValue(tf.value + spec.beta * va * np.conj(wa) * spec.psi_norm_sq, tf.error)
    if isinstance(spec, BracketMatrix):
        pts = [_kernel_trial(prob, p) for p in spec.psis]
        cv, cw = _coefficients(prob, spec, v), _coefficients(prob, spec, w)
        uv = _Combo(v, list(zip(cv, pts)))
        uw = _Combo(w, list(zip(cw, pts)))
        tf = _checked(friedrichs_form(prob, None, uv, uw))
        return FormValue(tf.value + np.conj(cw) @ spec.B @ cv, tf.error)
    if isinstance(spec, SectorialKrein):
        pt = _kernel_trial(prob, spec.psi)
        uv, uw = _Combo(v, [(va, pt)]), _Combo(w, [(wa, pt)])
        return _checked(friedrichs_form(prob, None, uv, uw))
    if isinstance(spec, SectorialArlinskii):
        pt = _kernel_trial(prob, spec.psi)
        yt = TrialFunction.from_expression(prob, spec.y, check=False)
        uv = _Combo(v, [(va, pt), (-2.0 * va, yt)])
        uw = _Combo(w, [(wa, pt), (-2.0 * wa, yt)])
        tf = _checked(friedrichs_form(prob, None, uv, uw))
        return FormValue(tf.value + spec.w * va * np.conj(wa), tf.error)
    raise UnsupportedCase("no form for %s" % type(spec).__name__)


def _checked(fv: FormValue) -> FormValue:
    if not fv.converges:
        raise DecompositionError("the regular part u = v - eta has infinite energy")
    return fv


def _coefficients(prob, spec: BracketMatrix, v):
    """c solving (v/g)(a) = sum c_j (psi_j/g)(a), (v/g)(m) = sum c_j (psi_j/g)(m)."""
    g = spec.g
    ga = g.state_at(prob.a).u
    if prob.closed_at_m:
        vm = v.value(prob.m) / g.state_at(prob.m).u
    elif v.trajectory is not None:
        vm = ratio_at_m(v.trajectory, g).value
    else:
        from .extensions import LIMIT_SAMPLES, limit_along_cutoffs
        xs = list(prob.cutoffs[-LIMIT_SAMPLES:])
        vm = limit_along_cutoffs([v.value(x) / g.state_at(x).u for x in xs], xs).value
    return np.linalg.solve(spec.endpoint_matrix, np.array([v.value_at_a / ga, vm]))


def rayleigh_check(prob: SLProblem, spec, v, psi: Optional[Trajectory] = None) -> complex:
    """t_spec[v] / ||v||^2."""
    num = extension_form(prob, spec, v, psi=psi).value
    den = float(np.real(weighted_inner(prob, v).value))
    if not den > 0:
        raise NonConvergent("trial function has zero weighted norm")
    r = num / den
    return float(np.real(r)) if abs(np.imag(r)) <= 1e-14 * max(1.0, abs(r)) else complex(r)


# ---------------------------------------------------------------------------
# Sectors


@dataclass(frozen=True)
class Sector:
    """Theta(alpha, nu) = {z : Re z >= nu, |Im z| <= tan(alpha) (Re z - nu)}."""

    nu: float
    alpha: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not 0 < self.alpha < math.pi / 2:
            raise ValueError("alpha must lie in (0, pi/2)")

    @classmethod
    def from_tan(cls, nu: float, tan_alpha: float) -> "Sector":
        return cls(nu, math.atan(tan_alpha))

    @property
    def tan_alpha(self):
        return math.tan(self.alpha)

    def contains(self, z, tol: float = 1e-8) -> bool:
        z = complex(z)
        t = tol * max(1.0, abs(z))
        return z.real >= self.nu - t and abs(z.imag) <= self.tan_alpha * (z.real - self.nu) + t


@dataclass
class SectorReport:
    ok: bool
    sector: Sector
    min_margin_nu: float
    min_margin_angle: float
    samples: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)

    def to_dict(self):
        return {
            "ok": self.ok,
            "nu": self.sector.nu,
            "tan_alpha": self.sector.tan_alpha,
            "min_margin_nu": self.min_margin_nu,
            "min_margin_angle": self.min_margin_angle,
            "sampled_numerical_range": [[complex(z).real, complex(z).imag] for z in self.samples],
            "witnesses": self.witnesses,
        }


def trial_family(prob: SLProblem, J: int = 6):
    """Polynomials (x - a)^j (X - x)^2 on [a, X], j = 1..J (zero beyond X)."""
    a, X = prob.a, prob.right_end
    L = X - a
    out = []
    for j in range(1, J + 1):
        out.append(parse("((x - %r)/%r)^%d * ((%r - x)/%r)^2" % (a, L, j, X, L)))
    return out


def numerical_range_samples(prob: SLProblem, h=None, J: int = 6, count: int = 64, seed: int = 0, n: int = 400):
    """Rayleigh quotients of deterministic combinations of the trial family."""
    a, X = prob.a, prob.right_end
    fam = trial_family(prob, J)
    edges = np.linspace(a, X, n + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    xs = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    H, dH, ratio = _gauge_accessors(prob, h)
    hx, dhx = H(xs), dH(xs)
    P, K = _ev(prob.p, xs), _ev(prob.k, xs)
    qh = _ev(prob.q, xs) - ratio(xs)
    U = np.array([_ev(e, xs) for e in fam])
    dU = np.array([_ev(e.derivative(), xs) for e in fam])
    D = (dU * hx - U * dhx) / (hx * hx)
    A = (D * (w * P * hx * hx)) @ D.T + (U * (w * qh)) @ U.T
    G = (U * (w * K)) @ U.T
    rng = np.random.default_rng(seed)
    out = [complex(A[i, i] / G[i, i]) for i in range(len(fam))]
    for _ in range(count):
        c = rng.standard_normal(len(fam)) + 1j * rng.standard_normal(len(fam))
        out.append(complex(np.conj(c) @ A @ c / np.real(np.conj(c) @ G @ c)))
    return out


def sector_check(prob: SLProblem, h, sector: Sector, grid: int = 400, J: int = 6, tol: float = 1e-10,
                 sample_range: bool = True) -> SectorReport:
    """Pointwise q_{1,h} >= nu k and |q2| <= tan(alpha) q_{1,h}, then the sampled numerical range."""
    g = h if isinstance(h, GaugeFunction) else GaugeFunction(prob, h=h if h is not None else "1")
    xs = sample_grid(prob, prob.a, grid)
    witnesses = []
    m_nu = math.inf
    m_ang = math.inf
    for x in xs:
        q1h = g.q1_h(x)
        k = prob.k(x)
        q2 = prob.q2(x) if prob.q2 is not None else 0.0
        d_nu = q1h - sector.nu * k
        d_ang = sector.tan_alpha * q1h - abs(q2)
        m_nu, m_ang = min(m_nu, d_nu / k), min(m_ang, d_ang / k)
        if d_nu < -tol * max(1.0, abs(q1h)):
            witnesses.append((float(x), "q_1h - nu k", d_nu))
        if d_ang < -tol * max(1.0, abs(q2)):
            witnesses.append((float(x), "tan(alpha) q_1h - |q2|", d_ang))
    if witnesses:
        raise InequalityViolation("sector inequalities fail at %d grid points (first x=%r)"
                                  % (len(witnesses), witnesses[0][0]), witnesses)
    samples = numerical_range_samples(prob, g, J) if sample_range else []
    outside = [z for z in samples if not sector.contains(z, 1e-8)]
    if outside:
        raise InequalityViolation("sampled numerical range leaves the sector", [(z.real, z.imag) for z in outside])
    return SectorReport(True, sector, float(m_nu), float(m_ang), samples, [])


# ---------------------------------------------------------------------------
# Divergence form


def divergence_residual(prob: SLProblem, h, u, sample_xs: Sequence[float]) -> float:
    """max |conj(q_h) u - (1/h)[p h^2 (u/h)']' - tau+ u| (k cancels on both sides)."""
    hx = h.expr if isinstance(h, GaugeFunction) else parse(h)
    if hx is None:
        raise ValueError("the divergence-form check needs an expression gauge")
    ue = parse(u)
    p, q1 = prob.p, prob.q1
    q2 = prob.q2 if prob.sectorial else parse(0)
    ratio = (p * hx.derivative()).derivative() / hx
    # L1* Q* L2 u, real and imaginary parts
    lhs_re = (q1 - ratio) * ue - (p * hx * hx * (ue / hx).derivative()).derivative() / hx
    lhs_im = -(q2 * ue)
    # tau+ u
    rhs_re = -(p * ue.derivative()).derivative() + q1 * ue
    rhs_im = -(q2 * ue)
    worst = 0.0
    for x in sample_xs:
        worst = max(worst, abs(complex(lhs_re(x) - rhs_re(x), lhs_im(x) - rhs_im(x))))
    return worst


# ---------------------------------------------------------------------------
# Gauge comparison


def gauge_values(prob: SLProblem, u, gauges: dict, lo: Optional[float] = None) -> dict:
    """t_F[u] under each named gauge (expressions, GaugeFunctions or trajectories)."""
    out = {}
    for name, h in gauges.items():
        if isinstance(h, Trajectory):
            h = GaugeFunction.from_trajectory(prob, h)
        out[name] = friedrichs_form(prob, h, u, lo=lo)
    return out
