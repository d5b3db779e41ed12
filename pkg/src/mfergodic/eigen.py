"""Lowest eigenpair of a symmetric positive operator given only its action.

Single-vector locally optimal block preconditioned conjugate gradient:
each step does Rayleigh-Ritz on span{x, r, p}. Starting from a good trial
vector the Rayleigh quotient decreases monotonically, which the N-particle
energy bounds rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceError

Operator = Callable[[np.ndarray], np.ndarray]


@dataclass
class EigenResult:
    vector: np.ndarray
    value: float
    residual: float
    iterations: int
    history: list[float]


def _orth(v, Av, basis, Abasis):
    """Two passes of Gram-Schmidt against `basis`, applying the same combination to Av."""
    for _ in range(2):
        for b, Ab in zip(basis, Abasis):
            c = np.vdot(b, v)
            v = v - c * b
            Av = Av - c * Ab
    n = np.linalg.norm(v)
    return v, Av, n


def lowest_eigenpair(
    apply: Operator,
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 5000,
    precond: Operator | None = None,
    project: Operator | None = None,
    project_every: int = 10,
    refresh_every: int = 25,
) -> EigenResult:
    """Minimize <x, Ax>/<x, x> starting at x0.

    Stops when ||Ax - lambda x|| / ||x|| <= tol. `project` (a linear map
    commuting with A, e.g. a symmetrizer) is applied to the iterate and the
    search direction every `project_every` steps and at exit.
    """
    shape = x0.shape
    x = np.array(x0, dtype=float).ravel()
    x /= np.linalg.norm(x)

    def A(v):
        return apply(v.reshape(shape)).ravel()

    def P(v):
        return project(v.reshape(shape)).ravel() if project is not None else v

    Ax = A(x)
    lam = float(np.vdot(x, Ax))
    p = Ap = None
    history = [lam]
    res = np.inf
    for it in range(1, max_iter + 1):
        r = Ax - lam * x
        res = float(np.linalg.norm(r))
        if res <= tol:
            break
        w = precond(r.reshape(shape)).ravel() if precond is not None else r
        w = P(w) if project is not None and it % project_every == 0 else w
        Aw = A(w)
        basis, Abasis = [x], [Ax]
        w, Aw, nw = _orth(w, Aw, basis, Abasis)
        if nw <= 1e-300:
            break
        basis.append(w / nw)
        Abasis.append(Aw / nw)
        if p is not None:
            p0 = np.linalg.norm(p)
            p, Ap, np_ = _orth(p, Ap, basis, Abasis)
            if np_ > 1e-10 * p0:
                basis.append(p / np_)
                Abasis.append(Ap / np_)
        S = np.array([[np.vdot(b, Ab) for Ab in Abasis] for b in basis])
        S = 0.5 * (S + S.T)
        vals, vecs = np.linalg.eigh(S)
        c = vecs[:, 0]
        if c[0] < 0:
            c = -c
        p = sum(ci * b for ci, b in zip(c[1:], basis[1:]))
        Ap = sum(ci * Ab for ci, Ab in zip(c[1:], Abasis[1:]))
        x = c[0] * basis[0] + p
        Ax = c[0] * Abasis[0] + Ap
        if project is not None and it % project_every == 0:
            x, p = P(x), P(p)
            Ax, Ap = P(Ax), P(Ap)
        nx = np.linalg.norm(x)
        x, Ax = x / nx, Ax / nx
        if it % refresh_every == 0:
            Ax = A(x)
        lam = float(np.vdot(x, Ax))
        history.append(lam)
    else:
        raise ConvergenceError(
            f"eigensolver did not reach tol={tol:g} in {max_iter} iterations", last_residual=res
        )
    if project is not None:
        x = P(x)
        x /= np.linalg.norm(x)
    Ax = A(x)
    lam = float(np.vdot(x, Ax))
    res = float(np.linalg.norm(Ax - lam * x))
    if np.sum(x) < 0:
        x = -x
    return EigenResult(x.reshape(shape), lam, res, it, history)
