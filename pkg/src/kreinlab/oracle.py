"""Finite-difference cross-check on regular or truncated problems.

Three-point finite-volume scheme: harmonic means of p at the midpoints,
nodal q and k, half cells at Robin ends.  The generalized problem
S u = lambda M u with diagonal M is symmetrised to M^-1/2 S M^-1/2 and
solved by Sturm-sequence bisection on the tridiagonal matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError, ValidationError
from .problem import SLProblem


@dataclass(frozen=True)
class Dirichlet:
    pass


@dataclass(frozen=True)
class Robin:
    """(p u')(end) = theta u(end), with the outward sign handled by the scheme."""

    theta: float


BC = Union[Dirichlet, Robin]


@dataclass(frozen=True)
class DiscreteOperator:
    nodes: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray
    h: float

    def symmetric(self):
        s = 1.0 / np.sqrt(self.mass)
        return self.diag * s * s, self.off * s[:-1] * s[1:]

    def dense(self):
        """Dense stiffness matrix (for tests and small n)."""
        n = len(self.diag)
        A = np.diag(self.diag)
        A[np.arange(n - 1), np.arange(1, n)] = self.off
        A[np.arange(1, n), np.arange(n - 1)] = self.off
        return A

    def rayleigh(self, v) -> float:
        v = np.asarray(v, dtype=float)
        Sv = self.diag * v
        Sv[:-1] += self.off * v[1:]
        Sv[1:] += self.off * v[:-1]
        return float(v @ Sv / (v @ (self.mass * v)))


def _as_bc(bc) -> BC:
    if bc is None or isinstance(bc, Dirichlet):
        return Dirichlet()
    if isinstance(bc, Robin):
        return bc
    if isinstance(bc, str) and bc.lower() == "dirichlet":
        return Dirichlet()
    return Robin(float(bc))


def discretize(prob: SLProblem, X: Optional[float] = None, n: int = 1000, bc_a=None, bc_X=None) -> DiscreteOperator:
    """Discretise on [a, X] with ``n`` cells.

    ``bc_a`` / ``bc_X``: Dirichlet() (default), Robin(theta) or a bare theta.
    At a, Robin means (pu')(a) = theta u(a); at X, (pu')(X) = -theta u(X).
    """
    if prob.sectorial:
        raise ValidationError("the oracle handles real potentials only")
    a = prob.a
    X = prob.right_end if X is None else float(X)
    if not X > a:
        raise ValueError("X must exceed a")
    if n < 2:
        raise ValueError("need at least two cells")
    bca, bcx = _as_bc(bc_a), _as_bc(bc_X)
    x = np.linspace(a, X, n + 1)
    h = (X - a) / n
    try:
        mids = 0.5 * (x[1:] + x[:-1])
        pm = np.array([prob.p(t) for t in mids])
        # harmonic mean of p over each cell from endpoint and midpoint samples
        pe = np.array([prob.p(t) for t in x])
        pm = 3.0 / (1.0 / pe[:-1] + 1.0 / pm + 1.0 / pe[1:])
        qn = np.array([prob.q1(t) for t in x])
        kn = np.array([prob.k(t) for t in x])
    except DomainError as exc:
        raise ValidationError("coefficient singular inside [a, X]: %s" % exc, [exc.x]) from exc
    if not (np.all(np.isfinite(pm)) and np.all(np.isfinite(qn)) and np.all(np.isfinite(kn))):
        raise ValidationError("non-finite coefficient samples inside [a, X]")
    if np.any(pm <= 0) or np.any(kn <= 0):
        raise ValidationError("p and k must be positive on [a, X]")

    c = pm / h
    diag = np.zeros(n + 1)
    diag[:-1] += c
    diag[1:] += c
    off = -c.copy()
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2
    diag += qn * w
    mass = kn * w
    if isinstance(bca, Robin):
        diag[0] += bca.theta
    if isinstance(bcx, Robin):
        diag[-1] += bcx.theta
    lo = 1 if isinstance(bca, Dirichlet) else 0
    hi = n if isinstance(bcx, Dirichlet) else n + 1
    return DiscreteOperator(x[lo:hi], diag[lo:hi], off[lo:hi - 1], mass[lo:hi], h)


def eigenvalues_discrete(op: DiscreteOperator, count: int = 5) -> list:
    """Smallest ``count`` generalized eigenvalues (Sturm-sequence bisection)."""
    d, e = op.symmetric()
    count = min(count, len(d))
    vals = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, count - 1),
                            lapack_driver="stebz", tol=np.finfo(float).tiny)
    return [float(v) for v in vals]


def sturm_count(op: DiscreteOperator, lam: float) -> int:
    """Number of discrete eigenvalues below ``lam`` (LDL^T pivot signs)."""
    d, e = op.symmetric()
    neg = 0
    piv = d[0] - lam
    for i in range(len(d)):
        if i:
            piv = d[i] - lam - e[i - 1] ** 2 / (piv if piv != 0 else 1e-300)
        if piv < 0:
            neg += 1
    return neg


def convergence_order(errors) -> list:
    """Observed orders log2(e_n / e_2n) for successive grid doublings."""
    return [math.log2(abs(a) / abs(b)) for a, b in zip(errors, errors[1:]) if a != 0 and b != 0]
