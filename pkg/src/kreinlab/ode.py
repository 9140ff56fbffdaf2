"""Quasi-derivative integration of tau u = lambda u.

The unknowns are ``u`` and the quasi-derivative ``pu = p u'``::

    u'  = pu / p
    pu' = (q - lambda k) u

Several solutions can be carried through one adaptive run so that
integrals coupling them (norms, Gram entries, reduction-of-order
integrals) are accumulated on the same step sequence.  Growing solutions
are rescaled whenever they leave [1e-100, 1e100]; each solution keeps
its own log-scale so that true values are ``stored * exp(log_scale)``.
In real arithmetic the Prufer angle

    theta' = cos^2(theta)/p + (lambda k - q) sin^2(theta)

with ``u = r sin(theta)``, ``pu = r cos(theta)`` is integrated alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import ode as _scipy_ode

from .errors import DomainError, IntegrationOverflow, StepFailure
from .problem import SLProblem

BIG = 1e100
SMALL = 1e-100
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class QuasiState:
    x: float
    u: complex
    pu: complex

    def __post_init__(self):
        for v in (self.u, self.pu):
            if not np.isfinite(v):
                raise ValueError("non-finite quasi-state component at x=%r" % self.x)

    @property
    def angle(self) -> float:
        """Prufer angle in [0, pi) (real states only)."""
        th = math.atan2(float(np.real(self.u)), float(np.real(self.pu)))
        return th + math.pi if th < 0 else th


@dataclass(frozen=True)
class Extra:
    """Integrand accumulated along a run.

    ``fn(x, U, PU, co)`` receives the stored (rescaled) states of all
    solutions and the coefficient values ``co = (p, k, q)``; ``exponents``
    gives the homogeneity degree in each solution so the accumulated value
    can be restored to true units.
    """

    name: str
    fn: Callable
    exponents: tuple
    modulus: bool = False  # depends on |u| only (phase-free)


def norm_extra(i: int = 0, name: Optional[str] = None) -> Extra:
    def fn(x, U, PU, co):
        u = U[i]
        return (u.real * u.real + u.imag * u.imag) * co[1]

    return Extra(name or "norm%d" % i, fn, _exps(i, 2), True)


def inv_pu2_extra(i: int = 0, name: Optional[str] = None) -> Extra:
    def fn(x, U, PU, co):
        return 1.0 / (co[0] * U[i] * U[i])

    return Extra(name or "invpu2_%d" % i, fn, _exps(i, -2))


def cross_extra(i: int, j: int, conjugate: bool = False, name: Optional[str] = None) -> Extra:
    """k u_i u_j (or k u_i conj(u_j))."""

    def fn(x, U, PU, co):
        return co[1] * U[i] * (np.conj(U[j]) if conjugate else U[j])

    e = {}
    e[i] = e.get(i, 0) + 1
    e[j] = e.get(j, 0) + 1
    return Extra(name or "cross%d%d" % (i, j), fn, tuple(sorted(e.items())), conjugate and i == j)


def _exps(i, e):
    return ((i, e),)


def _safe_scale(value, logf):
    """value * exp(logf) without spurious overflow of the exponential alone."""
    if value == 0 or logf == 0.0:
        return value
    mag = abs(value)
    if not math.isfinite(mag):
        return value
    lg = math.log(mag) + logf
    if lg > 709.0:
        return complex(math.inf, 0) if isinstance(value, complex) else math.copysign(math.inf, value)
    return value / mag * math.exp(lg)


class Trajectory:
    """One solution along an adaptive run.

    ``u``, ``pu`` hold rescaled values; ``log_scale[i]`` converts them to
    true units.  ``theta`` is the continuous Prufer angle (real runs only).
    """

    def __init__(self, prob, lam, tol, adjoint, xs, u, pu, log_scale, theta, stats, segments, bounds):
        self.prob = prob
        self.lam = lam
        self.tol = tol
        self.adjoint = adjoint
        self.xs = xs
        self.u = u
        self.pu = pu
        self.log_scale = log_scale
        self.theta = theta
        self.stats = stats
        self.segments = segments
        self.segment_bounds = bounds

    def __len__(self):
        return len(self.xs)

    @property
    def is_complex(self):
        return np.iscomplexobj(self.u)

    @property
    def increasing(self):
        return self.xs[-1] > self.xs[0]

    def _true(self, i):
        f = math.exp(self.log_scale[i]) if abs(self.log_scale[i]) < 700 else math.inf
        return self.u[i] * f, self.pu[i] * f

    @property
    def start(self) -> QuasiState:
        u, pu = self._true(0)
        return QuasiState(self.xs[0], u, pu)

    @property
    def end(self) -> QuasiState:
        u, pu = self._true(-1)
        return QuasiState(self.xs[-1], u, pu)

    def states(self):
        return [QuasiState(self.xs[i], *self._true(i)) for i in range(len(self.xs))]

    def true_values(self):
        """Arrays (u, pu) in true units (may overflow to inf)."""
        ls = np.clip(self.log_scale, -745, 709)
        f = np.exp(ls)
        return self.u * f, self.pu * f

    def scaled_at(self, x: float):
        """(u, pu, log_scale) at x; re-integrates from the nearest stored point."""
        lo, hi = min(self.xs[0], self.xs[-1]), max(self.xs[0], self.xs[-1])
        if not lo - 1e-14 * max(1, abs(lo)) <= x <= hi + 1e-14 * max(1, abs(hi)):
            raise ValueError("x=%r outside trajectory range [%r, %r]" % (x, lo, hi))
        i = int(np.argmin(np.abs(self.xs - x)))
        if self.xs[i] == x:
            return self.u[i], self.pu[i], self.log_scale[i]
        sub = run(self.prob, self.lam, self.xs[i], [(self.u[i], self.pu[i])], x, self.tol,
                  adjoint=self.adjoint, record=False, force_complex=self.is_complex)[0]
        return sub.u[-1], sub.pu[-1], sub.log_scale[-1] + self.log_scale[i]

    def state_at(self, x: float) -> QuasiState:
        u, pu, ls = self.scaled_at(x)
        return QuasiState(x, _safe_scale(u, ls), _safe_scale(pu, ls))

    def value_at(self, x: float):
        return self.state_at(x).u

    def theta_at(self, x: float) -> float:
        if self.theta is None:
            raise ValueError("Prufer angle is only tracked in real runs")
        i = int(np.argmin(np.abs(self.xs - x)))
        if self.xs[i] == x:
            return float(self.theta[i])
        sub = run(self.prob, self.lam, self.xs[i], [(self.u[i], self.pu[i])], x, self.tol,
                  adjoint=self.adjoint, record=False, theta0=[self.theta[i]])[0]
        return float(sub.theta[-1])

    def scaled(self, factor) -> "Trajectory":
        """The same solution multiplied by ``factor`` (complex allowed)."""
        mag = abs(factor)
        if mag == 0 or not np.isfinite(mag):
            raise ValueError("scale factor must be finite and non-zero")
        return self._rescaled(factor / mag, math.log(mag))

    def normalized(self, x: float, value=1.0) -> "Trajectory":
        """Rescaled so that u(x) = value."""
        u, _, ls = self.scaled_at(x)
        if u == 0:
            raise ZeroDivisionError("solution vanishes at x=%r" % x)
        factor = value / u
        return self._rescaled(factor / abs(factor), math.log(abs(factor)) - ls)

    def _rescaled(self, phase, log_mag) -> "Trajectory":
        u = self.u * phase
        pu = self.pu * phase
        if not self.is_complex and not (isinstance(phase, complex) and phase.imag != 0):
            u, pu = np.real(u), np.real(pu)
        segs = {}
        for name, (vals, exps, modulus) in self.segments.items():
            if all(j == 0 for j, _ in exps):
                e = sum(v for _, v in exps)
                ph = 1.0 if modulus else phase ** e
                if not np.iscomplexobj(u):
                    ph = float(np.real(ph))
                segs[name] = ([_safe_scale(v * ph, e * log_mag) for v in vals], exps, modulus)
        return Trajectory(self.prob, self.lam, self.tol, self.adjoint, self.xs, u, pu,
                          self.log_scale + log_mag, self.theta, self.stats, segs, self.segment_bounds)

    def segment(self, name: str):
        return list(self.segments[name][0])

    def sign_changes(self) -> int:
        s = np.sign(np.real(self.u))
        s = s[s != 0]
        return int(np.count_nonzero(s[1:] != s[:-1]))

    def __repr__(self):
        return "Trajectory(%d points, x: %r -> %r, lambda=%r)" % (len(self.xs), self.xs[0], self.xs[-1], self.lam)


class _Stop(Exception):
    pass


def run(prob: SLProblem, lam, x0: float, data: Sequence, x1: float, tol: float = DEFAULT_TOL, *,
        adjoint: bool = False, extras: Sequence[Extra] = (), checkpoints: Sequence[float] = (),
        record: bool = True, renormalize: bool = True, force_complex: bool = False,
        theta0: Optional[Sequence[float]] = None, max_steps: int = 200000):
    """Integrate ``len(data)`` solutions of tau u = lam u from x0 to x1.

    ``data`` is a list of ``(u, pu)`` pairs at x0.  Returns one Trajectory
    per solution; accumulated ``extras`` are split into segments at the
    ``checkpoints`` and stored (in true units, oriented as integrals from
    the smaller to the larger end of each segment) on every trajectory.
    """
    n = len(data)
    cplx = bool(force_complex or prob.sectorial or isinstance(lam, complex) and lam.imag != 0
                or any(isinstance(v, complex) and v.imag != 0 for d in data for v in d))
    lam_c = complex(lam) if cplx else float(np.real(lam))
    for d in data:
        if d[0] == 0 and d[1] == 0:
            raise ValueError("initial data (0, 0) gives the trivial solution")
    direction = 1.0 if x1 >= x0 else -1.0
    a, right = prob.a, prob.right_end
    for x in (x0, x1):
        if x < a - 1e-12 or x > right + 1e-12 * max(1.0, abs(right)):
            raise ValueError("x=%r outside the integration range [%r, %r]" % (x, a, right))
    stops = sorted({float(c) for c in checkpoints if (c - x0) * direction > 0 and (x1 - c) * direction > 0},
                   reverse=direction < 0)
    stops.append(float(x1))

    P, K = prob.p, prob.k
    Q1, Q2 = prob.q1, (prob.q2 if prob.sectorial else None)
    sgn2 = -1.0 if adjoint else 1.0
    prufer = not cplx
    ne = len(extras)

    # layout
    if cplx:
        U0 = np.array([complex(d[0]) for d in data])
        PU0 = np.array([complex(d[1]) for d in data])
    else:
        U0 = np.array([float(np.real(d[0])) for d in data])
        PU0 = np.array([float(np.real(d[1])) for d in data])
    logs = np.zeros(n)
    # pre-scale extreme initial data; logs0 remembers it for the first record
    for i in range(n):
        mag = max(abs(U0[i]), abs(PU0[i]))
        if mag > BIG or mag < SMALL:
            U0[i] /= mag
            PU0[i] /= mag
            logs[i] += math.log(mag)
    logs0 = logs.copy()

    probe_err = []

    def coeffs(x):
        p = P(x)
        k = K(x)
        q = Q1(x)
        if Q2 is not None:
            q = complex(q, sgn2 * Q2(x))
        return p, k, q

    extra_cplx = []
    if ne:
        co = coeffs(x0)
        for e in extras:
            v = e.fn(x0, U0, PU0, co)
            extra_cplx.append(bool(np.iscomplexobj(v)) or cplx)
    eslots = [2 if c else 1 for c in extra_cplx]
    eoff = np.concatenate([[0], np.cumsum(eslots)]).astype(int) if ne else np.array([0])

    if cplx:
        nstate = 4 * n
    else:
        nstate = 3 * n if prufer else 2 * n
    ntot = nstate + int(eoff[-1])

    def pack(U, PU, TH):
        y = np.zeros(ntot)
        if cplx:
            y[0:n], y[n:2 * n] = U.real, U.imag
            y[2 * n:3 * n], y[3 * n:4 * n] = PU.real, PU.imag
        else:
            y[0:n], y[n:2 * n] = U, PU
            if prufer:
                y[2 * n:3 * n] = TH
        return y

    def unpack(y):
        if cplx:
            return y[0:n] + 1j * y[n:2 * n], y[2 * n:3 * n] + 1j * y[3 * n:4 * n]
        return y[0:n], y[n:2 * n]

    def rhs(x, y):
        if probe_err:
            return np.zeros(ntot)
        try:
            p, k, q = coeffs(x)
        except DomainError as exc:
            probe_err.append(exc)
            return np.zeros(ntot)
        U, PU = unpack(y)
        dU = PU / p
        dPU = (q - lam_c * k) * U
        dy = np.empty(ntot)
        if cplx:
            dy[0:n], dy[n:2 * n] = dU.real, dU.imag
            dy[2 * n:3 * n], dy[3 * n:4 * n] = dPU.real, dPU.imag
        else:
            dy[0:n], dy[n:2 * n] = dU, dPU
            if prufer:
                th = y[2 * n:3 * n]
                s, c = np.sin(th), np.cos(th)
                dy[2 * n:3 * n] = c * c / p + (lam_c * k - q) * s * s
        if ne:
            co = (p, k, q)
            for j, e in enumerate(extras):
                v = e.fn(x, U, PU, co)
                o = nstate + eoff[j]
                if eslots[j] == 2:
                    dy[o], dy[o + 1] = np.real(v), np.imag(v)
                else:
                    dy[o] = v
        return dy

    rec_x, rec_u, rec_pu, rec_th, rec_log = [], [], [], [], []
    flags = {"rescale": False, "t": None, "h": 0.0}

    def solout(t, y):
        if probe_err:
            return -1
        if flags["t"] is not None and t != flags["t"]:
            flags["h"] = abs(t - flags["t"])
        flags["t"] = t
        U, PU = unpack(y)
        if record:
            if not rec_x or t != rec_x[-1]:
                rec_x.append(t)
                rec_u.append(U.copy())
                rec_pu.append(PU.copy())
                rec_log.append(logs.copy())
                if prufer:
                    rec_th.append(y[2 * n:3 * n].copy())
        mags = np.maximum(np.abs(U), np.abs(PU))
        if np.any(mags > BIG) or np.any(mags < SMALL):
            flags["rescale"] = True
            return -1
        return 0

    solver = _scipy_ode(rhs).set_integrator("dop853", rtol=tol, atol=tol * 1e-4, nsteps=max_steps)
    solver.set_solout(solout)

    TH0 = np.zeros(n)
    if prufer:
        if theta0 is not None:
            TH0 = np.array([float(t) for t in theta0])
        else:
            TH0 = np.array([QuasiState(x0, U0[i], PU0[i]).angle for i in range(n)])

    x = float(x0)
    y = pack(U0, PU0, TH0)
    seg_totals = [[] for _ in range(ne)]
    acc = [0.0] * ne
    bounds = []
    nsteps_total = 0
    nrescale = 0

    def extra_values(yv):
        out = []
        for j in range(ne):
            o = nstate + eoff[j]
            out.append(complex(yv[o], yv[o + 1]) if eslots[j] == 2 else float(yv[o]))
        return out

    def flush(yv):
        vals = extra_values(yv)
        for j, e in enumerate(extras):
            logf = sum(ex * logs[i] for i, ex in e.exponents)
            acc[j] = acc[j] + direction * _safe_scale(vals[j], logf)
        yv[nstate:] = 0.0

    seg_start = x
    for stop in stops:
        while True:
            if x == stop:
                break
            flags["rescale"] = False
            flags["t"] = None
            solver.set_initial_value(y, x)
            # restarts reuse the last accepted step: the automatic first-step
            # heuristic breaks down when an accumulator restarts from zero
            solver._integrator.work[6] = direction * min(flags["h"], abs(stop - x))
            solver._integrator.iwork[3] = -1  # no stiffness heuristic
            solver.integrate(stop)
            nsteps_total += 1
            if probe_err:
                raise StepFailure("coefficient evaluation failed: %s" % probe_err[0], solver.t)
            if not solver.successful():
                raise StepFailure("adaptive integrator failed", float(solver.t))
            x, y = float(solver.t), solver.y.copy()
            if not flags["rescale"]:
                # dop853 stops exactly at the requested point
                x = stop
                break
            if not renormalize:
                raise IntegrationOverflow("solution magnitude left [%g, %g] at x=%r" % (SMALL, BIG, x))
            flush(y)
            U, PU = unpack(y)
            for i in range(n):
                mag = max(abs(U[i]), abs(PU[i]))
                if mag > BIG or mag < SMALL:
                    U[i] /= mag
                    PU[i] /= mag
                    logs[i] += math.log(mag)
            nrescale += 1
            TH = y[2 * n:3 * n].copy() if prufer else None
            ynew = pack(U, PU, TH)
            y = ynew
            if record and rec_x and rec_x[-1] == x:
                rec_u[-1], rec_pu[-1], rec_log[-1] = U.copy(), PU.copy(), logs.copy()
        flush(y)
        for j in range(ne):
            seg_totals[j].append(acc[j])
            acc[j] = 0.0
        bounds.append((min(seg_start, stop), max(seg_start, stop)))
        seg_start = stop
        if record:
            U, PU = unpack(y)
            if rec_x and rec_x[-1] == stop:
                rec_u[-1], rec_pu[-1], rec_log[-1] = U.copy(), PU.copy(), logs.copy()
                if prufer:
                    rec_th[-1] = y[2 * n:3 * n].copy()
            else:
                rec_x.append(stop)
                rec_u.append(U.copy())
                rec_pu.append(PU.copy())
                rec_log.append(logs.copy())
                if prufer:
                    rec_th.append(y[2 * n:3 * n].copy())

    U, PU = unpack(y)
    if not record or not rec_x:
        rec_x = [float(x0), x]
        rec_u = [U0.copy(), U.copy()]
        rec_pu = [PU0.copy(), PU.copy()]
        rec_log = [logs0, logs.copy()]
        rec_th = [TH0, y[2 * n:3 * n].copy()] if prufer else []
    xs = np.array(rec_x)
    Ua, PUa, La = np.array(rec_u), np.array(rec_pu), np.array(rec_log)
    THa = np.array(rec_th) if prufer else None
    stats = {"restarts": nsteps_total, "rescales": nrescale, "points": len(xs)}
    trajs = []
    for i in range(n):
        segs = {}
        for j, e in enumerate(extras):
            segs[e.name] = (list(seg_totals[j]), tuple((jj - i, ex) for jj, ex in e.exponents), e.modulus)
        trajs.append(Trajectory(prob, lam_c, tol, adjoint, xs, Ua[:, i].copy(), PUa[:, i].copy(), La[:, i].copy(),
                                None if THa is None else THa[:, i].copy(), stats, segs, list(bounds)))
    return trajs


def integrate(prob: SLProblem, lam, start: QuasiState, target_x: float, tol: float = DEFAULT_TOL, **kw) -> Trajectory:
    """Solve tau u = lam u from ``start`` to ``target_x``."""
    return run(prob, lam, start.x, [(start.u, start.pu)], target_x, tol, **kw)[0]


def wronskian(t1: Trajectory, t2: Trajectory, x: float):
    """p (u1 u2' - u1' u2)(x) = u1 pu2 - pu1 u2."""
    u1, p1, l1 = t1.scaled_at(x)
    u2, p2, l2 = t2.scaled_at(x)
    return _safe_scale(u1 * p2 - p1 * u2, l1 + l2)


def count_multiples_of_pi(theta0: float, theta1: float, slack: float = 1e-7) -> int:
    """#{k : theta0 < k pi < theta1}, ignoring crossings within ``slack`` of the ends."""
    lo, hi = theta0 + slack, theta1 - slack
    if hi <= lo:
        return 0
    return max(0, math.ceil(hi / math.pi) - 1 - math.floor(lo / math.pi))


def prufer_zero_count(prob: SLProblem, lam: float, over, bc_angle: float, tol: float = DEFAULT_TOL) -> int:
    """Interior zeros on ``over`` of the solution starting at Prufer angle ``bc_angle``."""
    if prob.sectorial:
        raise ValueError("Prufer counting needs a real potential")
    x0, x1 = over
    t = run(prob, float(lam), x0, [(math.sin(bc_angle), math.cos(bc_angle))], x1, tol,
            record=False, theta0=[bc_angle])[0]
    th0, th1 = float(t.theta[0]), float(t.theta[-1])
    if x1 < x0:
        th0, th1 = th1, th0
    return count_multiples_of_pi(th0, th1)
