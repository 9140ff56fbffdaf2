"""Sturm-Liouville problem data and weighted quadrature up to a singular end.

The expression is ``tau u = (1/k) {-(p u')' + q u}`` on ``[a, m)`` with
``a`` regular and ``m`` finite or infinite.  Limits ``x -> m`` are replaced
by a cutoff sequence (``TruncationPolicy``) and improper integrals are
judged from the partial integrals along that sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, Inconclusive, NonConvergent, ValidationError
from .expr import Expression, parse

INF = math.inf


@dataclass(frozen=True)
class TruncationPolicy:
    """Cutoffs X_1 < X_2 < ... < m standing in for the limit x -> m.

    With ``cutoffs`` unset the sequence is generated: for finite m,
    X_{n+1} = m - (m - X_n)/4 starting at the midpoint of [a, m]; for
    m = inf, X_{n+1} = a + 2 (X_n - a) starting at a + 1.  The default
    count is 10 at a finite m (limits there converge like a power of
    m - X) and 8 at infinity.
    """

    cutoffs: Optional[tuple] = None
    first: Optional[float] = None
    max_cutoffs: Optional[int] = None
    tol: float = 1e-10

    def sequence(self, a: float, m: float) -> tuple:
        if self.cutoffs is not None:
            xs = tuple(float(c) for c in self.cutoffs)
        else:
            xs = []
            if math.isinf(m):
                x = a + 1.0 if self.first is None else float(self.first)
                for _ in range(self.max_cutoffs or 8):
                    xs.append(x)
                    x = a + 2.0 * (x - a)
            else:
                x = a + 0.5 * (m - a) if self.first is None else float(self.first)
                for _ in range(self.max_cutoffs or 10):
                    xs.append(x)
                    x = m - (m - x) / 4.0
            xs = tuple(xs)
        if not xs:
            raise ValueError("empty cutoff sequence")
        if any(b <= c for c, b in zip(xs, xs[1:])):
            raise ValueError("cutoffs must be strictly increasing: %r" % (xs,))
        if xs[0] <= a or xs[-1] >= m:
            raise ValueError("cutoffs must lie strictly inside (a, m): %r" % (xs,))
        return xs


def _as_expr(value) -> Expression:
    return parse(value)


@dataclass(frozen=True)
class SLProblem:
    a: float
    m: float
    k: Expression
    p: Expression
    q1: Expression
    q2: Optional[Expression] = None
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)

    def __post_init__(self):
        for name in ("k", "p", "q1"):
            object.__setattr__(self, name, _as_expr(getattr(self, name)))
        if self.q2 is not None:
            object.__setattr__(self, "q2", _as_expr(self.q2))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "m", float(self.m))
        if not self.a < self.m:
            raise ValidationError("need a < m, got a=%r m=%r" % (self.a, self.m))

    @classmethod
    def from_strings(cls, a, m, k="1", p="1", q1="0", q2=None, truncation=None):
        m = INF if str(m).strip().lower() in ("inf", "+inf", "infinity") else float(m)
        return cls(
            a=float(a),
            m=m,
            k=parse(k),
            p=parse(p),
            q1=parse(q1),
            q2=None if q2 is None else parse(q2),
            truncation=truncation or TruncationPolicy(),
        )

    def with_truncation(self, policy: TruncationPolicy) -> "SLProblem":
        return replace(self, truncation=policy)

    # --- coefficients ---------------------------------------------------

    @property
    def sectorial(self) -> bool:
        return self.q2 is not None and not self.q2.is_zero()

    def q(self, x: float, adjoint: bool = False):
        """Potential at x; the conjugate potential for ``adjoint``."""
        re = self.q1(x)
        if not self.sectorial:
            return re
        im = self.q2(x)
        return complex(re, -im if adjoint else im)

    # --- truncation -----------------------------------------------------

    @cached_property
    def cutoffs(self) -> tuple:
        return self.truncation.sequence(self.a, self.m)

    @cached_property
    def closed_at_m(self) -> bool:
        """True when m is finite and every coefficient is finite there."""
        if math.isinf(self.m):
            return False
        try:
            k, p = self.k(self.m), self.p(self.m)
            self.q1(self.m)
            if self.q2 is not None:
                self.q2(self.m)
        except DomainError:
            return False
        return k > 0 and p > 0

    @property
    def right_end(self) -> float:
        """Furthest point the integrators are allowed to reach."""
        return self.m if self.closed_at_m else self.cutoffs[-1]

    def describe(self) -> dict:
        return {
            "a": self.a,
            "m": "inf" if math.isinf(self.m) else self.m,
            "k": str(self.k),
            "p": str(self.p),
            "q1": str(self.q1),
            "q2": None if self.q2 is None else str(self.q2),
            "cutoffs": list(self.cutoffs),
        }


# ---------------------------------------------------------------------------
# Quadrature


def quad_segment(f: Callable[[float], complex], lo: float, hi: float, tol: float = 1e-10):
    """Adaptive Gauss-Kronrod on [lo, hi]; complex integrands split in parts.

    Returns ``(value, error_estimate)``.
    """
    if hi == lo:
        return 0.0, 0.0
    probe = f(0.5 * (lo + hi))
    opts = dict(limit=400, epsabs=tol * 1e-3, epsrel=tol, full_output=1)
    if isinstance(probe, complex):
        re = integrate.quad(lambda x: f(x).real, lo, hi, **opts)
        im = integrate.quad(lambda x: f(x).imag, lo, hi, **opts)
        return complex(re[0], im[0]), math.hypot(re[1], im[1])
    out = integrate.quad(f, lo, hi, **opts)
    return out[0], out[1]


@dataclass(frozen=True)
class DivergenceVerdict:
    """Outcome of an improper integral along the cutoff sequence.

    ``value`` is the extrapolated limit (``inf`` when divergent), ``partial``
    the partial integrals up to each cutoff.
    """

    converges: bool
    value: complex
    error: float
    cutoffs: tuple
    partial: tuple
    confidence: str
    reason: str
    last_ratio: float = math.nan

    @property
    def diverges(self):
        return not self.converges


def _ratio(d_next, d_prev):
    if d_prev == 0:
        return 0.0 if d_next == 0 else INF
    return d_next / d_prev


def judge_pieces(cutoffs: Sequence[float], pieces: Sequence[complex], errors=None,
                 growth_factor: float = 10.0, tol: float = 1e-10,
                 final: bool = True) -> Optional[DivergenceVerdict]:
    """Decide convergence from the integral pieces between cutoffs.

    ``pieces[0]`` is the integral up to ``cutoffs[0]`` and ``pieces[i]``
    that over ``[cutoffs[i-1], cutoffs[i]]``.  Returns ``None`` when no
    verdict is possible yet and ``final`` is False; raises Inconclusive when
    it is.
    """
    pieces = list(pieces)
    errs = list(errors) if errors is not None else [0.0] * len(pieces)
    partial = tuple(np.cumsum(pieces).tolist())
    cut = tuple(cutoffs[: len(pieces)])

    def verdict(conv, value, err, conf, reason):
        return DivergenceVerdict(conv, value, err, cut, partial, conf, reason)

    if any(not np.isfinite(d) for d in pieces):
        return verdict(False, INF, INF, "high", "non-finite partial integral")

    tail = pieces[1:]
    ratios = [_ratio(tail[i + 1], tail[i]) for i in range(len(tail) - 1)]
    real_ratios = [r.real if isinstance(r, complex) else r for r in ratios]
    total = partial[-1] if partial else 0.0
    qerr = sum(errs)

    if len(ratios) >= 3:
        last = real_ratios[-3:]
        if all(r >= 0.98 for r in last):
            return verdict(False, INF, INF, "moderate", "partial integrals grow without decay (ratios %s)" % _fmt(last))
        if len(partial) >= 4:
            p0, p3 = abs(partial[-4]), abs(partial[-1])
            if p0 > 0 and p3 >= growth_factor * p0 and real_ratios[-1] >= 1.0:
                return verdict(False, INF, INF, "moderate", "partial integrals grew %.3g-fold over three cutoffs" % (p3 / p0))
        mags = [abs(r) for r in ratios[-3:]]
        if all(r <= 0.9 for r in mags):
            return _converged(verdict, tail, ratios, total, qerr, tol)
    if len(ratios) >= 2:
        if all(r >= growth_factor for r in real_ratios[-2:]):
            return verdict(False, INF, INF, "moderate", "pieces grow explosively (ratios %s)" % _fmt(real_ratios[-2:]))
        # negligible trailing pieces: settle early
        if all(abs(r) <= 0.5 for r in ratios[-2:]) and abs(tail[-1]) <= tol * max(abs(total), 1e-300):
            return _converged(verdict, tail, ratios, total, qerr, tol)
    if len(ratios) >= 1 and pieces and all(d == 0 for d in tail[-2:]):
        return verdict(True, total, qerr, "high", "integrand vanishes near m")
    if not final:
        return None
    raise Inconclusive(
        "no convergence verdict after %d cutoffs (piece ratios %s)" % (len(pieces), _fmt(real_ratios)),
        evidence={"cutoffs": cut, "partial": partial},
    )


def _fmt(values):
    return "[" + ", ".join("%.3g" % v for v in values) + "]"


def _converged(verdict, tail, ratios, total, qerr, tol):
    r = ratios[-1]
    d = tail[-1]
    extra = d * r / (1 - r) if abs(r) < 1 else 0.0
    value = total + extra
    r_prev = ratios[-2] if len(ratios) >= 2 else r
    alt = d * r_prev / (1 - r_prev) if abs(r_prev) < 1 else 0.0
    err = abs(extra - alt) + abs(extra) * 0.1 + qerr + tol * abs(value)
    conf = "high" if abs(r) < 0.5 else "moderate"
    return replace(verdict(True, value, err, conf, "geometric tail, last ratio %.3g" % abs(r)), last_ratio=abs(r))


def _delta2(vals):
    out = []
    for v0, v1, v2 in zip(vals, vals[1:], vals[2:]):
        d1, d2 = v1 - v0, v2 - v1
        if d2 == d1 or not abs(d2) < abs(d1):
            return None
        out.append(v2 - d2 * d2 / (d2 - d1))
    return out


def aitken_limit(vals, passes: int = 2):
    """(limit, error) of a sequence by repeated Aitken delta-squared.

    Each pass removes one geometric mode, so a power series in a geometric
    sequence (the typical behaviour at an algebraic singularity) is summed
    to high order.  Only the last 2*passes + 1 terms are used, since early
    terms are not yet asymptotic; passes stop when a level fails to contract.
    """
    vals = list(vals)[-(2 * passes + 1):]
    if len(vals) < 3:
        return vals[-1], math.inf
    levels = [vals]
    while len(levels[-1]) >= 3:
        nxt = _delta2(levels[-1])
        if nxt is None:
            break
        levels.append(nxt)
    if len(levels) == 1:
        return vals[-1], abs(vals[-1] - vals[-2])
    lim = levels[-1][-1]
    return lim, abs(lim - levels[-2][-1]) + 1e-3 * abs(vals[-1] - vals[-2]) * (len(levels) == 2)


def improper_integral(prob: SLProblem, integrand, start: Optional[float] = None,
                      growth_factor: float = 10.0, tol: Optional[float] = None) -> DivergenceVerdict:
    """Integral of ``integrand`` from ``start`` (default a) to m.

    ``integrand`` is an Expression or a callable.  On a problem closed at m
    the integral is taken to m directly.
    """
    tol = prob.truncation.tol if tol is None else tol
    lo = prob.a if start is None else float(start)
    f = integrand
    if prob.closed_at_m:
        val, err = quad_segment(f, lo, prob.m, tol)
        return DivergenceVerdict(True, val, err, (prob.m,), (val,), "high", "closed interval")
    cuts = [c for c in prob.cutoffs if c > lo]
    if not cuts:
        raise ValueError("start %r lies beyond the last cutoff" % lo)
    pieces, errs = [], []
    prev = lo
    for c in cuts:
        val, err = quad_segment(f, prev, c, tol)
        pieces.append(val)
        errs.append(err)
        prev = c
        v = judge_pieces(cuts, pieces, errs, growth_factor, tol, final=False)
        # stop early only when the remaining budget cannot change the verdict
        if v is not None and len(pieces) >= 5 and (v.diverges or v.last_ratio <= 0.25):
            return v
    return judge_pieces(cuts, pieces, errs, growth_factor, tol, final=True)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    error: float
    verdict: DivergenceVerdict


def weighted_norm_sq(prob: SLProblem, u: Callable[[float], complex], start: Optional[float] = None) -> NormEstimate:
    """||u||^2 in L^2(k), with tail extrapolation when m is singular."""
    k = prob.k

    def integrand(x):
        val = u(x)
        return (val.real * val.real + val.imag * val.imag if isinstance(val, complex) else val * val) * k(x)

    try:
        v = improper_integral(prob, integrand, start)
    except Inconclusive as exc:
        raise NonConvergent("weighted norm: %s" % exc) from exc
    if not v.converges:
        raise NonConvergent("weighted norm diverges: %s" % v.reason)
    return NormEstimate(float(v.value), v.error, v)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    sectorial: bool
    positivity_violations: tuple
    integrability: dict
    notes: tuple = ()


def _left_integrable(prob: SLProblem, f: Callable[[float], float], tol: float):
    """Judge integrability of f at a+ along points approaching a geometrically."""
    span = prob.cutoffs[0] - prob.a
    pts = [prob.a + span / 4.0 ** j for j in range(9)]
    pieces, errs = [], []
    for hi, lo in zip(pts, pts[1:]):
        val, err = quad_segment(f, lo, hi, tol)
        pieces.append(val)
        errs.append(err)
    return judge_pieces(pts, pieces, errs, tol=tol, final=False)


def validate(prob: SLProblem, grid_points: int = 200, raise_on_error: bool = True) -> ValidationReport:
    a, X = prob.a, prob.right_end
    xs = np.linspace(a, X, grid_points + 2)[1:-1]
    bad = []
    for x in xs:
        for name, expr in (("k", prob.k), ("p", prob.p)):
            try:
                val = expr(x)
            except DomainError as exc:
                bad.append((float(x), name, str(exc)))
                continue
            if not val > 0:
                bad.append((float(x), name, val))
        for name, expr in (("q1", prob.q1), ("q2", prob.q2)):
            if expr is None:
                continue
            try:
                expr(x)
            except DomainError as exc:
                bad.append((float(x), name, str(exc)))
    integ = {}
    notes = []
    if not bad:
        tol = 1e-8
        for name, fn in (("k", prob.k), ("1/p", lambda x: 1.0 / prob.p(x))):
            try:
                verdict = _left_integrable(prob, fn, tol)
            except DomainError as exc:
                verdict = None
                notes.append("%s: %s" % (name, exc))
            if verdict is None:
                integ[name] = "undecided"
            else:
                integ[name] = "integrable" if verdict.converges else "divergent"
            if verdict is not None and not verdict.converges:
                bad.append((a, name, "not integrable near the regular endpoint a"))
        # finite quadrature on [a, X_1] must succeed
        for name, fn in (("k", prob.k), ("1/p", lambda x: 1.0 / prob.p(x))):
            try:
                val, _ = quad_segment(fn, a, prob.cutoffs[0], tol)
                if not math.isfinite(val):
                    raise DomainError("non-finite integral")
            except DomainError as exc:
                bad.append((a, name, "quadrature failed: %s" % exc))
    report = ValidationReport(not bad, prob.sectorial, tuple(bad), integ, tuple(notes))
    if bad and raise_on_error:
        first = bad[0]
        raise ValidationError(
            "invalid problem: %s at x=%r (%s)%s" % (first[1], first[0], first[2], "" if len(bad) == 1 else " and %d more" % (len(bad) - 1)),
            witnesses=bad,
        )
    return report
