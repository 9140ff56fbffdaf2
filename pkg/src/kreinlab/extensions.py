"""Kernel of the maximal operator and the boundary conditions of each extension family.

Every family is reduced to data the spectral solver can use directly:
a Robin coefficient ``theta`` in ``(p v')(a) = theta v(a)``, a Dirichlet
flag, or linear functionals built from Wronskian brackets at a and m.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classify import EndpointKind, PrincipalPair, classify_endpoint, principal_pair
from .errors import (KernelAtA, NonCoerciveParameter, NonConvergent, NotLimitPoint,
                     SingularCoefficientMatrix, UnsupportedCase, ValidationError)
from .expr import Expression, parse
from .ode import DEFAULT_TOL, Trajectory, cross_extra, norm_extra, run, wronskian
from .problem import SLProblem, aitken_limit, improper_integral, judge_pieces

INF = math.inf
# cutoffs used for limits at a singular m
LIMIT_SAMPLES = 6


# ---------------------------------------------------------------------------
# Kernel basis


@dataclass
class KernelBasis:
    """Solutions of tau psi = 0 (tau+ in sectorial mode) spanning ker T*.

    ``elements[0]`` is the distinguished element with psi(a) = 1.  In
    dimension 2 the elements are the fundamental solutions with data (1, 0)
    and (0, 1) at a, and ``orthonormal`` holds a real orthonormal pair
    whose first vector is proportional to ``elements[0]``.
    """

    dimension: int
    kind: EndpointKind
    elements: list
    norms_sq: list
    norm_errors: list
    adjoint: bool
    orthonormal: Optional[list] = None
    gram: Optional[np.ndarray] = None
    transform: Optional[np.ndarray] = None

    @property
    def psi(self) -> Trajectory:
        return self.elements[0]

    def psi_a(self, i: int = 0):
        st = self.elements[i].state_at(self.elements[i].prob.a)
        return st.u, st.pu

    def to_dict(self):
        out = {
            "dimension": self.dimension,
            "endpoint": self.kind.value,
            "adjoint_equation": self.adjoint,
            "elements": [],
        }
        for i, el in enumerate(self.elements):
            u, pu = self.psi_a(i)
            out["elements"].append({
                "u_a": _num(u),
                "pu_a": _num(pu),
                "norm_sq": None if self.norms_sq[i] is None else _num(self.norms_sq[i]),
                "norm_sq_error": None if self.norm_errors[i] is None else float(self.norm_errors[i]),
            })
        if self.gram is not None:
            out["orthonormal_gram"] = self.gram.tolist()
            out["orthonormal_transform"] = self.transform.tolist()
        return out


def _num(v):
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return [v.real, v.imag] if v.imag != 0 else v.real
    return float(v)


def _segments_verdict(prob: SLProblem, pieces, tol):
    if prob.closed_at_m:
        return True, float(np.real(sum(pieces))), 0.0
    v = judge_pieces(prob.cutoffs, pieces, tol=max(tol, 1e-12), final=False)
    if v is None:
        return None, None, None
    return v.converges, v.value if v.converges else INF, v.error


def kernel_basis(prob: SLProblem, kind: Optional[EndpointKind] = None, tol: float = DEFAULT_TOL) -> KernelBasis:
    """ker T* as trajectories of the kernel equation."""
    if kind is None:
        kind = classify_endpoint(prob).kind
    adjoint = prob.sectorial
    if kind == EndpointKind.LIMIT_POINT:
        return _kernel_lp(prob, kind, adjoint, tol)
    return _kernel_two(prob, kind, adjoint, tol)


def _wkb_data(prob: SLProblem, x: float, lam=0.0, adjoint=False):
    """Data (1, -sqrt(p (q - lam k))) of the decaying WKB solution at x."""
    z = (prob.q(x, adjoint) - lam * prob.k(x)) * prob.p(x)
    if isinstance(z, complex) or isinstance(lam, complex):
        z = complex(z)
        if z.real <= 0 and abs(z.imag) <= 1e-14 * abs(z):
            return None
        r = cmath.sqrt(z)
        return (1.0 + 0j, -r)
    if z <= 0:
        return None
    return (1.0, -math.sqrt(z))


def _kernel_lp(prob, kind, adjoint, tol):
    X = prob.right_end
    data = _wkb_data(prob, X, 0.0, adjoint) or (1.0, 0.0)
    t = run(prob, 0.0, X, [data], prob.a, tol, adjoint=adjoint,
            extras=[norm_extra(0, "norm")], checkpoints=prob.cutoffs, force_complex=adjoint)[0]
    ua, pua, _ = t.scaled_at(prob.a)
    if abs(ua) < 1e-10 * max(abs(ua), abs(pua)):
        raise KernelAtA("kernel element vanishes at a (|psi(a)|/|(psi, p psi')(a)| = %.3g)" % (abs(ua) / max(abs(pua), 1e-300)))
    psi = t.normalized(prob.a)
    pieces = [v for _, v in sorted(zip(psi.segment_bounds, psi.segment("norm")))]
    conv, val, err = _segments_verdict(prob, pieces, tol)
    if not conv:
        val, err = None, None
    return KernelBasis(1, kind, [psi], [val], [err], adjoint)


def _kernel_two(prob, kind, adjoint, tol):
    X = prob.right_end
    cuts = [c for c in prob.cutoffs if c < X]
    extras = [norm_extra(0, "n0"), norm_extra(1, "n1"), cross_extra(0, 1, conjugate=adjoint, name="c01")]
    ts = run(prob, 0.0, prob.a, [(1.0, 0.0), (0.0, 1.0)], X, tol, adjoint=adjoint,
             extras=extras, checkpoints=cuts, force_complex=adjoint)
    vals, errs = {}, {}
    for name in ("n0", "n1", "c01"):
        pieces = ts[0].segment(name)
        if prob.closed_at_m:
            vals[name], errs[name] = sum(pieces), 0.0
        else:
            v = judge_pieces(list(cuts) + [X], pieces, tol=max(tol, 1e-12), final=False)
            if v is None or not v.converges:
                raise NonConvergent("kernel Gram entry %s does not converge at m" % name)
            vals[name], errs[name] = v.value, v.error
    basis = KernelBasis(2, kind, ts, [vals["n0"], vals["n1"]], [errs["n0"], errs["n1"]], adjoint)
    if adjoint:
        return basis
    G = np.array([[vals["n0"], vals["c01"]], [vals["c01"], vals["n1"]]], dtype=float)
    # modified Gram-Schmidt in the weighted inner product; first vector along (1, 0)
    C = np.zeros((2, 2))
    C[0, 0] = 1.0 / math.sqrt(G[0, 0])
    proj = G[1, 0] * C[0, 0]
    w = np.array([-proj * C[0, 0], 1.0])
    C[:, 1] = w / math.sqrt(w @ G @ w)
    data = [(C[0, j], C[1, j]) for j in range(2)]
    on = run(prob, 0.0, prob.a, data, X, tol, extras=extras, checkpoints=cuts)
    gram = np.zeros((2, 2))
    for name, (i, j) in (("n0", (0, 0)), ("n1", (1, 1)), ("c01", (0, 1))):
        pieces = on[0].segment(name)
        if prob.closed_at_m:
            gram[i, j] = sum(pieces)
        else:
            gram[i, j] = judge_pieces(list(cuts) + [X], pieces, tol=max(tol, 1e-12)).value
        gram[j, i] = gram[i, j]
    basis.orthonormal = on
    basis.gram = gram
    basis.transform = C
    return basis


# ---------------------------------------------------------------------------
# Brackets and regularised boundary values at m


@dataclass(frozen=True)
class LimitValue:
    value: float
    error: float
    samples: tuple
    xs: tuple


def limit_along_cutoffs(values, xs, scale: float = 1.0, rtol: float = 1e-6) -> LimitValue:
    """Limit of a sequence sampled at the cutoffs, with diagnostics."""
    values = [complex(v) if isinstance(v, complex) else float(v) for v in values]
    if len(values) < 3:
        return LimitValue(values[-1], math.inf, tuple(values), tuple(xs))
    lim, err = aitken_limit(values)
    d = [abs(b - a) for a, b in zip(values, values[1:])]
    contracting = d[-1] <= d[-2] or d[-1] <= rtol * max(scale, abs(values[-1]))
    if not contracting or not np.isfinite(lim):
        raise NonConvergent("sequence at the cutoffs does not settle (last differences %s)" % ", ".join("%.3g" % x for x in d[-3:]))
    return LimitValue(lim, err, tuple(values), tuple(xs))


def g_form(v_state, w_state, g_state, p: float):
    """p g^2 [(v/g)(w/g)' - (v/g)'(w/g)] from quasi-states (u, pu)."""
    (v, pv), (w, pw), (g, pg) = v_state, w_state, g_state
    vg = v / g
    wg = w / g
    dvg = (pv * g - v * pg) / (p * g * g)
    dwg = (pw * g - w * pg) / (p * g * g)
    return p * g * g * (vg * dwg - dvg * wg)


def _states_at(t: Trajectory, xs):
    out = []
    for x in xs:
        st = t.state_at(x)
        out.append((st.u, st.pu))
    return out


def bracket(v: Trajectory, w: Trajectory, g: Optional[Trajectory] = None, at: str = "a", xs: Optional[Sequence[float]] = None):
    """[v, w] = p (v w' - v' w) at a, or its g-regularised limit at m."""
    prob = v.prob
    if at == "a":
        return wronskian(v, w, prob.a)
    if at != "m":
        raise ValueError("at must be 'a' or 'm'")
    if prob.closed_at_m:
        return wronskian(v, w, prob.m)
    if g is None:
        raise ValueError("the bracket at a singular m needs the non-principal solution g")
    xs = list(prob.cutoffs[-LIMIT_SAMPLES:]) if xs is None else list(xs)
    seq = []
    for x, sv, sw, sg in zip(xs, _states_at(v, xs), _states_at(w, xs), _states_at(g, xs)):
        seq.append(g_form(sv, sw, sg, prob.p(x)))
    scale = max(abs(s) for s in seq)
    return limit_along_cutoffs(seq, xs, scale).value


def bracket_report(v, w, g, xs=None) -> LimitValue:
    prob = v.prob
    xs = list(prob.cutoffs[-LIMIT_SAMPLES:]) if xs is None else list(xs)
    seq = [g_form(sv, sw, sg, prob.p(x)) for x, sv, sw, sg in zip(xs, _states_at(v, xs), _states_at(w, xs), _states_at(g, xs))]
    return limit_along_cutoffs(seq, xs, max(abs(s) for s in seq))


def ratio_at_m(v: Trajectory, g: Trajectory, xs=None) -> LimitValue:
    """(v/g)(m) as a limit along the cutoffs (exact value at a closed m)."""
    prob = v.prob
    if prob.closed_at_m:
        val = v.state_at(prob.m).u / g.state_at(prob.m).u
        return LimitValue(val, 0.0, (val,), (prob.m,))
    xs = list(prob.cutoffs[-LIMIT_SAMPLES:]) if xs is None else list(xs)
    seq = [v.state_at(x).u / g.state_at(x).u for x in xs]
    return limit_along_cutoffs(seq, xs, max(max(abs(s) for s in seq), 1.0))


# ---------------------------------------------------------------------------
# Extension specifications


@dataclass(frozen=True)
class ExtensionSpec:
    variant = "abstract"

    @property
    def dirichlet_at_a(self) -> bool:
        return False

    @property
    def robin_theta(self):
        """theta in (p v')(a) = theta v(a); None when not of this form."""
        return None

    def to_dict(self) -> dict:
        return {"variant": self.variant}


@dataclass(frozen=True)
class Friedrichs(ExtensionSpec):
    """v(a) = 0, with the principal-solution (Friedrichs) behaviour at m."""

    variant = "friedrichs"

    @property
    def dirichlet_at_a(self):
        return True

    def to_dict(self):
        return {"variant": self.variant, "condition_a": "v(a) = 0"}


@dataclass(frozen=True)
class RobinLP(ExtensionSpec):
    l: float
    theta: Optional[float]
    theta_error: float
    psi_norm_sq: float
    p_psi_prime_a: float

    variant = "robin-lp"

    @property
    def is_krein(self):
        return self.l == 0

    @property
    def dirichlet_at_a(self):
        return math.isinf(self.l)

    @property
    def robin_theta(self):
        return None if math.isinf(self.l) else self.theta

    def to_dict(self):
        return {
            "variant": "krein" if self.is_krein else ("friedrichs" if self.dirichlet_at_a else self.variant),
            "l": "inf" if math.isinf(self.l) else self.l,
            "theta": None if self.theta is None else self.theta,
            "theta_error": self.theta_error,
            "psi_norm_sq": self.psi_norm_sq,
            "p_psi_prime_a": self.p_psi_prime_a,
            "condition_a": "v(a) = 0" if self.dirichlet_at_a else "(p v')(a) = theta v(a)",
        }


def lp_family(prob: SLProblem, basis: KernelBasis, l) -> RobinLP:
    """Robin member theta(l) = p(a) psi'(a) + l ||psi||^2 of the limit-point family."""
    if basis.dimension != 1 or basis.kind != EndpointKind.LIMIT_POINT:
        raise NotLimitPoint("the Robin family needs a limit-point end with a one-dimensional kernel")
    if basis.adjoint:
        raise UnsupportedCase("the Robin family is the self-adjoint construction; use sectorial_* for complex q")
    l = _parse_param(l)
    if l < 0:
        raise ValueError("l must be in [0, inf]")
    _, pua = basis.psi_a(0)
    pua = float(np.real(pua))
    nsq, nerr = basis.norms_sq[0], basis.norm_errors[0]
    if nsq is None:
        raise NonConvergent("||psi||^2 is not finite")
    if math.isinf(l):
        return RobinLP(l, None, 0.0, float(nsq), pua)
    theta = pua + l * float(nsq)
    return RobinLP(l, theta, l * float(nerr), float(nsq), pua)


def _parse_param(v):
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "infinity", "+inf", "oo"):
            return INF
        return float(s)
    return float(v)


@dataclass(frozen=True)
class BracketScalar(ExtensionSpec):
    beta: float
    psi: Trajectory = field(repr=False)
    g: Trajectory = field(repr=False)
    psi_norm_sq: float = 0.0
    psi_over_g_m: float = 0.0
    bracket_psi_g: float = 0.0
    remark_literal: bool = False

    variant = "bracket-scalar"

    @property
    def degenerate(self):
        """psi proportional to the principal solution: no contribution from m."""
        return abs(self.psi_over_g_m) <= 1e-8

    @property
    def reduced_theta(self):
        _, pua = self.psi.state_at(self.psi.prob.a).u, self.psi.state_at(self.psi.prob.a).pu
        return float(np.real(pua)) + self.beta * self.psi_norm_sq

    @property
    def literal_theta(self):
        return self.beta * self.psi_norm_sq

    @property
    def robin_theta(self):
        if not self.degenerate:
            return None
        return self.literal_theta if self.remark_literal else self.reduced_theta

    def conditions(self, v: Trajectory):
        """Residuals of the two linear conditions on a solution v."""
        prob = v.prob
        sa = v.state_at(prob.a)
        va = sa.u
        r_m = ratio_at_m(v, self.g).value
        c1 = r_m - va * self.psi_over_g_m
        if self.remark_literal and self.degenerate:
            return c1, sa.pu - self.literal_theta * va
        br = bracket(v, self.psi, self.g, "m") - bracket(v, self.psi, None, "a")
        c2 = br - self.beta * va * self.psi_norm_sq
        return c1, c2

    def to_dict(self):
        return {
            "variant": self.variant,
            "beta": self.beta,
            "psi_norm_sq": self.psi_norm_sq,
            "psi_over_g_at_m": self.psi_over_g_m,
            "degenerate_robin": self.degenerate,
            "reduced_theta": self.reduced_theta if self.degenerate else None,
            "remark_literal_theta": self.literal_theta if self.degenerate else None,
            "remark_literal": self.remark_literal,
        }


def _g_for(prob, pair):
    if pair is None:
        pair = principal_pair(prob)
    return pair


def _psi_from_principal(prob: SLProblem, pair: PrincipalPair, tol):
    """Kernel element proportional to f with psi(a) = 1, with its norm."""
    st = pair.f.state_at(prob.a)
    X = prob.right_end
    cuts = [c for c in prob.cutoffs if c < X]
    t = run(prob, 0.0, prob.a, [(1.0, st.pu / st.u)], X, tol, extras=[norm_extra(0, "norm")], checkpoints=cuts)[0]
    return t


def lc_scalar_family(prob: SLProblem, basis: KernelBasis, psi: Optional[Trajectory] = None, beta: float = 0.0,
                     pair: Optional[PrincipalPair] = None, remark_literal: bool = False,
                     tol: float = DEFAULT_TOL) -> BracketScalar:
    """One-parameter family for a regular or limit-circle m with dim N_B = 1.

    ``psi`` defaults to the kernel element proportional to the principal
    solution, for which the conditions reduce to a Robin condition at a.
    """
    if basis.dimension != 2:
        raise ValueError("bracket families need a regular or limit-circle end")
    if basis.adjoint:
        raise UnsupportedCase("bracket families are constructed for real q")
    beta = _parse_param(beta)
    if beta < 0:
        raise ValueError("beta must be >= 0")
    pair = _g_for(prob, pair)
    X = prob.right_end
    cuts = [c for c in prob.cutoffs if c < X]
    if psi is None:
        psi = _psi_from_principal(prob, pair, tol)
    else:
        ua = psi.state_at(prob.a).u
        if abs(ua - 1.0) > 1e-8:
            raise ValueError("psi must satisfy psi(a) = 1")
    if "norm" in psi.segments:
        pieces = psi.segment("norm")
    else:
        t = run(prob, 0.0, prob.a, [(1.0, psi.state_at(prob.a).pu)], X, tol, extras=[norm_extra(0, "norm")], checkpoints=cuts)[0]
        pieces = t.segment("norm")
    if prob.closed_at_m:
        nsq = float(sum(pieces))
    else:
        vv = judge_pieces(list(cuts) + [X], pieces, tol=max(tol, 1e-12))
        if not vv.converges:
            raise NonConvergent("||psi||^2 diverges")
        nsq = float(vv.value)
    r = ratio_at_m(psi, pair.g).value
    return BracketScalar(beta, psi, pair.g, nsq, float(np.real(r)), 0.0, remark_literal)


@dataclass(frozen=True)
class BracketMatrix(ExtensionSpec):
    B: np.ndarray = field(repr=False)
    psis: tuple = field(repr=False)
    g: Trajectory = field(repr=False)
    endpoint_matrix: np.ndarray = field(repr=False)
    condition_number: float = 1.0

    variant = "bracket-matrix"

    @property
    def is_krein(self):
        return not np.any(self.B)

    def coefficients(self, v: Trajectory):
        prob = v.prob
        ga = self.g.state_at(prob.a).u
        rhs = np.array([v.state_at(prob.a).u / ga, ratio_at_m(v, self.g).value])
        return np.linalg.solve(self.endpoint_matrix, rhs)

    def conditions(self, v: Trajectory):
        c = self.coefficients(v)
        out = []
        for kk in range(2):
            br = bracket(v, self.psis[kk], self.g, "m") - bracket(v, self.psis[kk], None, "a")
            out.append(br - self.B[kk] @ c)
        return tuple(out)

    def to_dict(self):
        return {
            "variant": "krein" if self.is_krein else self.variant,
            "B": np.asarray(self.B).tolist(),
            "endpoint_matrix": np.asarray(self.endpoint_matrix).tolist(),
            "endpoint_matrix_condition": self.condition_number,
        }


def lc_matrix_family(prob: SLProblem, basis: KernelBasis, B, pair: Optional[PrincipalPair] = None) -> BracketMatrix:
    """Two-condition family for dim N_B = 2 with a symmetric PSD 2x2 matrix B."""
    if basis.dimension != 2 or basis.orthonormal is None:
        raise ValueError("need an orthonormal two-dimensional real kernel basis")
    B = np.asarray(B, dtype=float)
    if B.shape != (2, 2):
        raise ValueError("B must be 2x2")
    if not np.allclose(B, B.T, rtol=0, atol=1e-12 * max(1.0, np.abs(B).max())):
        raise ValidationError("B must be symmetric")
    if np.linalg.eigvalsh(B).min() < -1e-12 * max(1.0, np.abs(B).max()):
        raise ValidationError("B must be positive semidefinite")
    pair = _g_for(prob, pair)
    g = pair.g
    psis = tuple(basis.orthonormal)
    E = np.zeros((2, 2))
    ga = g.state_at(prob.a).u
    for j in range(2):
        E[0, j] = psis[j].state_at(prob.a).u / ga
        E[1, j] = float(np.real(ratio_at_m(psis[j], g).value))
    cond = float(np.linalg.cond(E))
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularCoefficientMatrix("endpoint matrix is numerically singular (cond %.3g)" % cond)
    return BracketMatrix(B, psis, g, E, cond)


# ---------------------------------------------------------------------------
# Sectorial extensions


@dataclass(frozen=True)
class SectorialKrein(ExtensionSpec):
    """(p v')(a) = (p psi')(a) v(a); action T_N v = tau(v - v(a) psi)."""

    psi: Trajectory = field(repr=False)
    theta: complex = 0j

    variant = "sectorial-krein"

    @property
    def robin_theta(self):
        return self.theta

    def action(self, v_minus: Trajectory):
        return "tau(v - v(a) psi)"

    def to_dict(self):
        return {
            "variant": self.variant,
            "theta": _num(self.theta),
            "condition_a": "(p v')(a) = (p psi')(a) v(a)",
            "action": "T_N v = tau(v - v(a) psi)",
            "form": "t_N[v] = t_F[v - v(a) psi]",
        }


def sectorial_krein(prob: SLProblem, basis: KernelBasis) -> SectorialKrein:
    if basis.dimension != 1:
        raise UnsupportedCase("sectorial extensions are implemented for a one-dimensional kernel only")
    _, pua = basis.psi_a(0)
    return SectorialKrein(basis.psi, complex(pua))


@dataclass(frozen=True)
class CoercivityReport:
    t_r_of_y: float
    margin: float
    satisfied: bool
    detail: str


@dataclass(frozen=True)
class SectorialArlinskii(ExtensionSpec):
    """Pair <w, y>: (p v')(a) = theta v(a), action tau(v - (psi - 2y) v(a))."""

    w: complex = 0j
    y: Expression = None
    psi: Trajectory = field(default=None, repr=False)
    theta: complex = 0j
    drop_unit_term: bool = False
    coercivity: Optional[CoercivityReport] = None
    warning: str = ""

    variant = "sectorial-arlinskii"

    @property
    def robin_theta(self):
        return self.theta

    def to_dict(self):
        return {
            "variant": self.variant,
            "w": _num(self.w),
            "y": str(self.y),
            "theta": _num(self.theta),
            "drop_unit_term": self.drop_unit_term,
            "coercivity_margin": None if self.coercivity is None else self.coercivity.margin,
            "coercivity_satisfied": None if self.coercivity is None else self.coercivity.satisfied,
            "t_R_of_y": None if self.coercivity is None else self.coercivity.t_r_of_y,
            "warning": self.warning,
        }


UNIT_TERM_WARNING = ("the boundary term -(psi - 2y) v(a) adds a function value to a "
                     "quasi-derivative; for real q the reduced Robin coefficient differs from "
                     "the limit-point family's by the constant 1")


def real_form_of(prob: SLProblem, y: Expression):
    """t^R[y] = int p |y'|^2 + q1 |y|^2 (gauge h = 1, y(a) = 0)."""
    dy = y.derivative()

    def integrand(x):
        return prob.p(x) * dy(x) ** 2 + prob.q1(x) * y(x) ** 2

    return improper_integral(prob, integrand)


def sectorial_arlinskii(prob: SLProblem, basis: KernelBasis, w, y="0", drop_unit_term: bool = False):
    """Member <w, y> of the coercive m-sectorial family."""
    y = parse(y)
    w = _parse_complex(w)
    if abs(y(prob.a)) > 1e-12:
        raise ValidationError("y must vanish at a (y(a) = %r)" % y(prob.a))
    if y.is_zero() or (y.is_constant and y(prob.a) == 0):
        if w == 0:
            return sectorial_krein(prob, basis)
        if cmath.isinf(w):
            return Friedrichs()
    if cmath.isinf(w):
        raise UnsupportedCase("w = inf is only meaningful with y = 0 (Friedrichs)")
    if w.real <= 0:
        raise NonCoerciveParameter("Re w must be positive, got %r" % w)
    if basis.dimension != 1:
        raise UnsupportedCase("sectorial extensions are implemented for a one-dimensional kernel only")
    _, pua = basis.psi_a(0)
    dya = y.derivative()(prob.a)
    theta = complex(pua) - 2.0 * prob.p(prob.a) * dya + w + (0.0 if drop_unit_term else 1.0)
    try:
        tr = real_form_of(prob, y)
        if tr.converges:
            t_y = float(np.real(tr.value))
            rep = CoercivityReport(t_y, w.real - t_y, w.real > t_y, "max Re t^R[(2y - phi, phi)] = t^R[y]")
        else:
            rep = CoercivityReport(INF, -INF, False, "y has infinite energy (not in X_0)")
    except Exception as exc:  # reported, not assumed
        rep = CoercivityReport(math.nan, math.nan, False, "t^R[y] undecided: %s" % exc)
    return SectorialArlinskii(w, y, basis.psi, theta, drop_unit_term, rep,
                              "" if drop_unit_term else UNIT_TERM_WARNING)


def _parse_complex(w):
    if isinstance(w, str):
        s = w.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return complex(INF, 0)
        return complex(s.replace("i", "j"))
    return complex(w)


def krein(prob: SLProblem, basis: KernelBasis, pair: Optional[PrincipalPair] = None):
    """The Krein-von Neumann member of the appropriate family."""
    if basis.adjoint:
        return sectorial_krein(prob, basis)
    if basis.dimension == 1:
        return lp_family(prob, basis, 0.0)
    return lc_matrix_family(prob, basis, np.zeros((2, 2)), pair)
