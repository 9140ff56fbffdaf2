"""Endpoint classification, oscillation, principal solutions and gauges."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import Inconclusive, InequalityViolation, OscillatoryError
from .expr import parse
from .ode import DEFAULT_TOL, Trajectory, count_multiples_of_pi, inv_pu2_extra, norm_extra, run
from .problem import DivergenceVerdict, SLProblem, aitken_limit, improper_integral, judge_pieces


class EndpointKind(str, Enum):
    REGULAR = "regular"
    LIMIT_POINT = "limit-point"
    LIMIT_CIRCLE = "limit-circle"


@dataclass
class EndpointReport:
    kind: EndpointKind
    lambda0: float
    oscillatory_at: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    confidence: str = "high"

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "lambda0": self.lambda0,
            "oscillatory_at": {repr(k): v for k, v in self.oscillatory_at.items()},
            "evidence": self.evidence,
            "confidence": self.confidence,
        }


def _verdict_summary(v: DivergenceVerdict):
    return {
        "converges": v.converges,
        "value": _jsonable(v.value),
        "confidence": v.confidence,
        "reason": v.reason,
    }


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag] if v.imag else v.real
    return float(v)


def _regularity(prob: SLProblem):
    """Integrability of k, 1/p and |q| up to m; None for an undecided test."""
    if prob.closed_at_m:
        return True, {"closed": "all coefficients finite at m"}
    out = {}
    regular = True
    tests = (
        ("k", prob.k),
        ("1/p", lambda x: 1.0 / prob.p(x)),
        ("|q|", lambda x: abs(prob.q(x))),
    )
    for name, fn in tests:
        try:
            v = improper_integral(prob, fn)
            out[name] = _verdict_summary(v)
            regular = regular and v.converges
        except Inconclusive as exc:
            out[name] = {"converges": None, "reason": str(exc)}
            regular = False
    return regular, out


def classify_endpoint(prob: SLProblem, lambda0: float = 0.0, tol: float = DEFAULT_TOL,
                      oscillation_lambdas: Sequence[float] = ()) -> EndpointReport:
    """Regular / limit-point / limit-circle character of m."""
    regular, reg_evidence = _regularity(prob)
    evidence = {"regularity": reg_evidence}
    osc = {}
    for lam in oscillation_lambdas:
        try:
            osc[lam] = oscillation_test(prob, lam)
        except Inconclusive:
            osc[lam] = None
    if regular:
        return EndpointReport(EndpointKind.REGULAR, lambda0, osc, evidence, "high")

    cuts = prob.cutoffs
    trajs = run(prob, lambda0, prob.a, [(1.0, 0.0), (0.0, 1.0)], cuts[-1], tol,
                extras=[norm_extra(0, "n0"), norm_extra(1, "n1")], checkpoints=cuts, record=False)
    counts = 0
    confidence = "high"
    sols = {}
    for name, label in (("n0", "(1,0)"), ("n1", "(0,1)")):
        pieces = trajs[0].segment(name)
        v = judge_pieces(cuts, pieces, tol=tol)
        sols[label] = _verdict_summary(v)
        counts += bool(v.converges)
        if v.confidence != "high":
            confidence = "moderate"
    evidence["square_integrable"] = sols
    evidence["l2_count"] = counts
    kind = EndpointKind.LIMIT_CIRCLE if counts == 2 else EndpointKind.LIMIT_POINT
    return EndpointReport(kind, lambda0, osc, evidence, confidence)


def oscillation_test(prob: SLProblem, lam: float, window_count: int = 3, tol: float = DEFAULT_TOL) -> bool:
    """True when zeros keep accumulating on successive windows towards m."""
    if prob.sectorial:
        raise ValueError("oscillation is tested on real problems only")
    if prob.closed_at_m:
        return False
    cuts = prob.cutoffs
    if len(cuts) < window_count + 1:
        raise ValueError("need at least %d cutoffs" % (window_count + 1))
    t = run(prob, float(lam), prob.a, [(0.0, 1.0)], cuts[-1], tol, checkpoints=cuts)[0]
    theta = [t.theta_at(c) for c in cuts]
    counts = [count_multiples_of_pi(t0, t1) for t0, t1 in zip(theta, theta[1:])]
    last = counts[-window_count:]
    if all(c == 0 for c in last):
        return False
    if all(c > 0 for c in last):
        return True
    raise Inconclusive("zero counts per window do not settle: %s" % counts, evidence={"counts": counts})


# ---------------------------------------------------------------------------
# Principal / non-principal pair


@dataclass
class PrincipalPair:
    f: Trajectory
    g: Trajectory
    s: float
    f_divergence: DivergenceVerdict
    g_convergence: DivergenceVerdict
    ratio_xs: tuple
    ratios: tuple
    checks: dict

    @property
    def verified(self):
        return all(self.checks.values())


def _positive_from(t: Trajectory):
    """Index after the last sign change of the stored solution (in x order)."""
    order = np.argsort(t.xs)
    u = np.real(t.u[order])
    xs = t.xs[order]
    neg = np.nonzero(np.sign(u[:-1]) * np.sign(u[1:]) < 0)[0]
    if len(neg) == 0:
        return xs[0], np.sign(u[np.nonzero(u)[0][0]]) if np.any(u) else 1.0
    i = neg[-1] + 1
    # one stored step beyond the last sign change
    j = min(i + 1, len(xs) - 1)
    return xs[j], np.sign(u[j])


def principal_pair(prob: SLProblem, tol: float = DEFAULT_TOL, min_windows: int = 4) -> PrincipalPair:
    """Principal f and non-principal g of tau u = 0 near m, with W(f, g) = 1."""
    if prob.sectorial:
        raise ValueError("principal solutions are defined for the real equation")
    if oscillation_test(prob, 0.0):
        raise OscillatoryError("tau u = 0 is oscillatory at m")
    X = prob.right_end
    cuts = [c for c in prob.cutoffs if c < X]
    # 1/(p f^2) is stiff next to the zero of the Dirichlet candidate at X
    near = [c for c in cuts if X - c >= 1e-5 * (X - prob.a)]
    inner = near[-1] if near else cuts[0]

    # candidate initial data at X: Dirichlet (the limit characterisation of the
    # principal solution), then (1, 0), then a scan over the Prufer angle
    angles = [0.0, math.pi / 2] + [math.pi * j / 16 for j in range(1, 16) if j != 8]
    attempt = None
    for ang in angles:
        data = (math.sin(ang), -math.cos(ang)) if ang == 0.0 else (math.sin(ang), math.cos(ang))
        whole, head = _from_right(prob, data, X, inner, cuts, tol)
        if np.any(np.sign(np.real(head.u[1:])) * np.sign(np.real(head.u[:-1])) < 0) and ang != 0.0:
            continue
        s, sign = _positive_from(whole)
        usable = [c for c in cuts if c > s]
        if len(usable) >= min_windows:
            attempt = (ang, whole.scaled(float(sign)), s)
            break
    if attempt is None:
        raise Inconclusive("no solution of tau u = 0 stays positive over %d cutoff windows" % min_windows)
    ang, f_raw, s = attempt

    # f normalised to f(s) = 1; pieces of int 1/(p f^2) beyond s, towards m
    f = f_raw.normalized(s)
    fs_pu = float(np.real(f.scaled_at(s)[1] * math.exp(f.scaled_at(s)[2])))
    fpieces, fcuts = _pieces_beyond(f, s, fs_pu)
    f_verdict = judge_pieces(fcuts, fpieces, tol=tol, final=False)
    if f_verdict is None:
        raise Inconclusive("divergence of the reduction-of-order integral undecided",
                           evidence={"pieces": fpieces})

    g = run(prob, 0.0, s, [(1.0, fs_pu + 1.0)], X, tol,
            extras=[inv_pu2_extra(0, "ipg")], checkpoints=[c for c in cuts if c > s])[0]

    # Dirichlet data at a finite X leave a multiple of g in f; at algebraic
    # singularities that remnant decays slowly, so remove its limit
    L = None if prob.closed_at_m else _remnant(f, g, [c for c in cuts if c > s] + [X])
    if L is not None:
        fwd = run(prob, 0.0, s, [(1.0 - L, fs_pu - L * (fs_pu + 1.0))], X, tol)[0]
        u_X, pu_X, _ = fwd.scaled_at(X)
        whole, _ = _from_right(prob, (float(np.real(u_X)), float(np.real(pu_X))), X, inner, cuts, tol)
        f = whole.scaled(float(np.sign(whole.state_at(s).u))).normalized(s)
        fs_pu = float(np.real(f.scaled_at(s)[1] * math.exp(f.scaled_at(s)[2])))
        fpieces, fcuts = _pieces_beyond(f, s, fs_pu)
        f_verdict = judge_pieces(fcuts, fpieces, tol=tol, final=False)
        if f_verdict is None:
            raise Inconclusive("divergence of the reduction-of-order integral undecided",
                               evidence={"pieces": fpieces})
        g = run(prob, 0.0, s, [(1.0, fs_pu + 1.0)], X, tol,
                extras=[inv_pu2_extra(0, "ipg")], checkpoints=[c for c in cuts if c > s])[0]
    gp = g.segment("ipg")
    gcuts = [c for c in cuts if c > s] + [X]
    if prob.closed_at_m:
        g_verdict = DivergenceVerdict(True, sum(gp), 0.0, tuple(gcuts), tuple(np.cumsum(gp)), "high", "closed interval")
    else:
        g_verdict = judge_pieces(gcuts, gp, tol=tol, final=False)
        if g_verdict is None:
            raise Inconclusive("convergence of int 1/(p g^2) undecided", evidence={"pieces": gp})

    # f/g at the cutoffs beyond s; at a singular end f(X) = 0 is imposed, so X is left out
    rx = [c for c in cuts if c > s] + ([X] if prob.closed_at_m else [])
    ratios = []
    for c in rx:
        fu = f.state_at(c).u
        gu = g.state_at(c).u
        ratios.append(fu / gu)
    fx = f.xs >= s
    gx = g.xs >= s
    checks = {
        "f_positive": bool(np.all(np.real(f.u[fx][f.xs[fx] < X]) > 0)),
        "g_positive": bool(np.all(np.real(g.u[gx]) > 0)),
        "f_integral_diverges": bool(f_verdict.diverges),
        "g_integral_converges": bool(g_verdict.converges),
        "ratio_decreasing": bool(all(b <= a_ + 1e-12 for a_, b in zip(ratios, ratios[1:])) and ratios[-1] < 0.1 * ratios[0]),
    }
    # reduction-of-order cross-check: g/f - 1 = int_s^x 1/(p f^2)
    cum = np.cumsum(fpieces)
    red = []
    for c, I in zip(fcuts, cum):
        red.append(abs(g.state_at(c).u / f.state_at(c).u - 1.0 - I) / (1.0 + abs(I)))
    checks["reduction_of_order"] = bool(not red or max(red) < 1e-6)
    pair = PrincipalPair(f, g, float(s), f_verdict, g_verdict, tuple(rx), tuple(ratios), checks)
    if not pair.verified:
        failed = [k for k, v in checks.items() if not v]
        raise Inconclusive("principal pair checks failed: %s" % ", ".join(failed), evidence=checks)
    return pair


def _from_right(prob, data, X, inner, cuts, tol):
    head = run(prob, 0.0, X, [data], inner, tol)[0]
    # the reduction-of-order integrand is singular at X for Dirichlet data,
    # so it is accumulated only from the last inner cutoff
    body = run(prob, 0.0, inner, [(head.u[-1], head.pu[-1])], prob.a, tol,
               extras=[inv_pu2_extra(0, "ipf")], checkpoints=cuts)[0]
    return _join(head, body), head


def _remnant(f: Trajectory, g: Trajectory, xs, floor: float = 1e-12):
    """Limit of f/g at m from its values at the cutoffs, or None if negligible."""
    vals = [float(np.real(f.state_at(c).u / g.state_at(c).u)) for c in xs]
    d = [abs(y - x) for x, y in zip(vals, vals[1:])]
    if len(vals) < 3 or not d[-1] < d[-2]:
        return None
    lim, _ = aitken_limit(vals[-5:])
    return lim if abs(lim) > floor else None


def _join(head: Trajectory, body: Trajectory) -> Trajectory:
    """Concatenate two consecutive runs of the same solution."""
    shift = head.log_scale[-1]
    xs = np.concatenate([head.xs, body.xs[1:]])
    u = np.concatenate([head.u, body.u[1:]])
    pu = np.concatenate([head.pu, body.pu[1:]])
    ls = np.concatenate([head.log_scale, body.log_scale[1:] + shift])
    th = None
    if head.theta is not None and body.theta is not None:
        th = np.concatenate([head.theta, body.theta[1:] - body.theta[0] + head.theta[-1]])
    # body started from head's stored (rescaled) end state
    segs = {k: ([_rescale(val, e, shift) for val in vals], e, mod) for k, (vals, e, mod) in body.segments.items()}
    return Trajectory(body.prob, body.lam, body.tol, body.adjoint, xs, u, pu, ls, th,
                      body.stats, segs, body.segment_bounds)


def _rescale(val, exps, shift):
    from .ode import _safe_scale

    return _safe_scale(val, sum(e for _, e in exps) * shift)


def _pieces_beyond(f: Trajectory, s, fs_pu):
    """Pieces of int 1/(p f^2) between successive cutoffs beyond s (towards m)."""
    out, right = [], []
    for (lo, hi), v in sorted(zip(f.segment_bounds, f.segment("ipf"))):
        if hi <= s:
            continue
        if lo < s:
            sub = run(f.prob, 0.0, s, [(1.0, fs_pu)], hi, f.tol, extras=[inv_pu2_extra(0, "ipf")])[0]
            v = sub.segment("ipf")[0]
        out.append(v)
        right.append(hi)
    return out, right


def _state_tuple(t: Trajectory, x):
    st = t.state_at(x)
    return (st.u, st.pu)


# ---------------------------------------------------------------------------
# Gauges


class GaugeFunction:
    """Positive h with accessors h, ph', (ph')' and q_h = q - (ph')'/h."""

    def __init__(self, prob: SLProblem, h=None, trajectory: Optional[Trajectory] = None, lam_h: float = 0.0):
        if (h is None) == (trajectory is None):
            raise ValueError("give exactly one of an expression or a trajectory")
        self.prob = prob
        self.trajectory = trajectory
        self.lam_h = float(lam_h if trajectory is None else np.real(trajectory.lam))
        if h is not None:
            self.expr = parse(h)
            dh = self.expr.derivative()
            self._ph = prob.p * dh
            self._dph = self._ph.derivative()
        else:
            self.expr = None

    @classmethod
    def from_expression(cls, prob, h):
        return cls(prob, h=h)

    @classmethod
    def from_trajectory(cls, prob, trajectory):
        return cls(prob, trajectory=trajectory)

    def h(self, x):
        if self.expr is not None:
            return self.expr(x)
        return float(np.real(self.trajectory.state_at(x).u))

    def ph_prime(self, x):
        if self.expr is not None:
            return self._ph(x)
        return float(np.real(self.trajectory.state_at(x).pu))

    def dph_prime(self, x):
        """(ph')'; for a solution of the real equation this is (q1 - lam_h k) h."""
        if self.expr is not None:
            return self._dph(x)
        return (self.prob.q1(x) - self.lam_h * self.prob.k(x)) * self.h(x)

    def ratio(self, x):
        """(ph')'/h."""
        if self.expr is not None:
            return self._dph(x) / self.expr(x)
        return self.prob.q1(x) - self.lam_h * self.prob.k(x)

    def q_h(self, x, adjoint=False):
        return self.prob.q(x, adjoint) - self.ratio(x)

    def q1_h(self, x):
        return self.prob.q1(x) - self.ratio(x)

    def describe(self):
        return str(self.expr) if self.expr is not None else "solution trajectory (lambda=%g)" % self.lam_h


def sample_grid(prob: SLProblem, s: float, n: int):
    hi = prob.right_end
    if not prob.closed_at_m:
        hi = prob.cutoffs[-1]
    return np.linspace(s, hi, n)


@dataclass
class KalfReport:
    holds: bool
    mu: float
    mu_max: float
    coercive: bool
    principal_type: Optional[bool]
    friedrichs_description: str
    divergence: Optional[DivergenceVerdict]
    witnesses: list

    def to_dict(self):
        return {
            "holds": self.holds,
            "mu": self.mu,
            "mu_max": self.mu_max,
            "coercive": self.coercive,
            "principal_type": self.principal_type,
            "friedrichs_description": self.friedrichs_description,
            "witnesses": self.witnesses,
        }


def kalf_check(prob: SLProblem, h: GaugeFunction, mu: float, s: Optional[float] = None,
               grid: int = 400, tol: float = 1e-12) -> KalfReport:
    """Check q >= (ph')'/h + mu k on a grid over [s, m) and type the gauge."""
    s = prob.a if s is None else float(s)
    xs = sample_grid(prob, s, grid)
    worst = math.inf
    witnesses = []
    for x in xs:
        hv = h.h(x)
        if not hv > 0:
            witnesses.append((float(x), "h <= 0", hv))
            continue
        k = prob.k(x)
        margin = h.q1_h(x) / k
        worst = min(worst, margin)
        if margin < mu - tol * max(1.0, abs(mu)):
            witnesses.append((float(x), "q - (ph')'/h - mu k", (margin - mu) * k))
    try:
        v = improper_integral(prob, lambda x: 1.0 / (prob.p(x) * h.h(x) ** 2), s)
        principal = bool(v.diverges)
    except Inconclusive:
        v, principal = None, None
    desc = {True: "principal-type gauge: Friedrichs domain by finite weighted Dirichlet integral",
            False: "non-principal-type gauge: Friedrichs domain requires u/h -> 0 at m",
            None: "gauge type undecided"}[principal]
    report = KalfReport(not witnesses, float(mu), float(worst), bool(worst > 0), principal, desc, v, witnesses)
    if witnesses:
        raise InequalityViolation("Kalf inequality fails at %d grid points (first x=%r)" % (len(witnesses), witnesses[0][0]),
                                  witnesses)
    return report


def jacobi_residual(prob: SLProblem, h, u, sample_xs: Sequence[float]) -> float:
    """max |(-(pu')' + ((ph')'/h) u) - (-(1/h)[p h^2 (u/h)']')| over the samples."""
    hx = h.expr if isinstance(h, GaugeFunction) else parse(h)
    if hx is None:
        raise ValueError("the Jacobi identity check needs an expression gauge")
    ue = parse(u)
    p = prob.p
    lhs = -(p * ue.derivative()).derivative() + ((p * hx.derivative()).derivative() / hx) * ue
    rhs = -(p * hx * hx * (ue / hx).derivative()).derivative() / hx
    worst = 0.0
    for x in sample_xs:
        worst = max(worst, abs(lhs(x) - rhs(x)))
    return worst
