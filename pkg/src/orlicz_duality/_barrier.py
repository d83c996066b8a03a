"""Small dense log-barrier Newton solver for smooth convex programs.

minimize f(x)  subject to  A x = b,  g_i(x) <= 0

Problems here have at most a few dozen variables, so every Newton step
solves the full KKT system with a least-squares fallback for singular
Hessians (flat utility directions, redundant constraints).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# f(x) -> (value, gradient, hessian); value = +inf outside the domain
Objective = Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]


@dataclass
class Constraint:
    """Convex constraint g(x) <= 0 with gradient and Hessian."""

    fun: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]


def linear_constraints(C: np.ndarray, d: np.ndarray) -> list[Constraint]:
    """Rows of C x <= d as individual constraints."""
    out = []
    for row, rhs in zip(np.atleast_2d(C), np.atleast_1d(d)):
        r = np.array(row, dtype=float)
        out.append(Constraint(lambda x, r=r, rhs=float(rhs): (float(r @ x - rhs), r, np.zeros((len(r), len(r))))))
    return out


@dataclass
class BarrierResult:
    x: np.ndarray
    value: float
    iterations: int
    gap_bound: float
    history: list[float] = field(default_factory=list)


class DivergenceError(RuntimeError):
    """Iterates grew beyond the divergence guard."""


def _kkt_step(H: np.ndarray, grad: np.ndarray, A: np.ndarray | None) -> np.ndarray:
    n = len(grad)
    scale = max(1.0, float(np.max(np.abs(np.diag(H))))) if n else 1.0
    Hr = H + 1e-14 * scale * np.eye(n)
    if A is None or len(A) == 0:
        try:
            return np.linalg.solve(Hr, -grad)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(Hr, -grad, rcond=None)[0]
    m = A.shape[0]
    K = np.block([[Hr, A.T], [A, np.zeros((m, m))]])
    rhs = np.concatenate([-grad, np.zeros(m)])
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n]


def barrier_minimize(
    objective: Objective,
    x0: np.ndarray,
    constraints: Sequence[Constraint] = (),
    A_eq: np.ndarray | None = None,
    linear: tuple[np.ndarray, np.ndarray] | None = None,
    tol: float = 1e-11,
    t0: float = 1.0,
    mu: float = 50.0,
    max_newton: int = 200,
    divergence_guard: float = 1e9,
) -> BarrierResult:
    """Path-following barrier method from a strictly feasible ``x0``.

    ``A_eq`` rows define the equality constraints A x = A x0, which Newton
    steps preserve exactly.  ``linear`` = (C, d) adds the block C x <= d,
    evaluated in vectorized form.  ``gap_bound`` is m / t at termination, the
    standard suboptimality bound for the barrier method.
    """
    x = np.array(x0, dtype=float)
    C_lin = d_lin = None
    if linear is not None and len(linear[0]):
        C_lin = np.atleast_2d(np.asarray(linear[0], float))
        d_lin = np.asarray(linear[1], float)
    m = len(constraints) + (0 if C_lin is None else len(C_lin))
    A = None if A_eq is None or len(A_eq) == 0 else np.atleast_2d(np.asarray(A_eq, float))
    t = t0 if m else 1.0
    dec_tol = 1e-10 if m else 1e-24
    total_iters = 0
    history: list[float] = []

    def phi(z: np.ndarray, t: float, need_derivs: bool = True):
        f, g, H = objective(z)
        if not math.isfinite(f):
            return math.inf, None, None
        val = t * f
        grad = t * g
        hess = t * H
        if C_lin is not None:
            slack = d_lin - C_lin @ z
            if not np.all(slack > 0):
                return math.inf, None, None
            val -= float(np.sum(np.log(slack)))
            inv = 1.0 / slack
            grad = grad + C_lin.T @ inv
            hess = hess + (C_lin.T * inv**2) @ C_lin
        for c in constraints:
            gv, gg, gh = c.fun(z)
            if not gv < 0:
                return math.inf, None, None
            val -= math.log(-gv)
            grad = grad + gg / (-gv)
            hess = hess + np.outer(gg, gg) / gv**2 + gh / (-gv)
        return val, grad, hess

    while True:
        prev_dec = math.inf
        for _ in range(max_newton):
            val, grad, hess = phi(x, t)
            if not math.isfinite(val):
                raise RuntimeError("iterate left the domain")
            dx = _kkt_step(hess, grad, A)
            dec = float(-grad @ dx)
            total_iters += 1
            # dec / t bounds the centering error in objective units; once in the
            # quadratic region a non-decreasing decrement means rounding noise
            if dec <= dec_tol or not math.isfinite(dec) or (dec < 1e-3 and dec >= prev_dec):
                break
            prev_dec = dec
            s = 1.0
            accepted = False
            if dec < 0.25:
                # quadratic-convergence region: full step if it stays feasible
                cand = x + dx
                accepted = math.isfinite(phi(cand, t)[0])
            for _ in range(0 if accepted else 80):
                cand = x + s * dx
                cval, _, _ = phi(cand, t)
                if math.isfinite(cval) and cval <= val - 0.25 * s * dec:
                    accepted = True
                    break
                s *= 0.5
            if not accepted:
                # no measurable decrease left at this precision
                break
            x = cand
            if np.max(np.abs(x)) > divergence_guard:
                raise DivergenceError("iterates diverge")
        f_val = objective(x)[0]
        history.append(f_val)
        if m == 0 or m / t < tol:
            break
        t *= mu
    return BarrierResult(x=x, value=float(objective(x)[0]), iterations=total_iters, gap_bound=(m / t if m else 0.0), history=history)
