"""Reference solvers: Riemannian gradient descent, Riemannian L-BFGS and the
plain fixed-point iteration that the mixing methods accelerate.

RGD and RLBFGS use backtracking Armijo line search on ``f o R_x`` and stop
with ``Stalled`` once the accepted step size would drop below
``LineSearchConfig.min_step``.
"""

import math
import time
from dataclasses import dataclass

from .mixing import NUMERICAL_ERRORS, SolverReport, Status, TraceRow

__all__ = [
    "LineSearchConfig",
    "armijo",
    "rgd_step",
    "rlbfgs_direction",
    "rlbfgs_step",
    "fixed_point_step",
    "run_rgd",
    "run_rlbfgs",
    "run_fixed_point",
]


@dataclass(frozen=True)
class LineSearchConfig:
    initial_step: float = 1.0
    contraction: float = 0.5
    sufficient_decrease: float = 1e-4
    min_step: float = 1e-10

    def __post_init__(self):
        if self.min_step <= 0:
            raise ValueError("min_step must be positive")
        if not 0.0 < self.contraction < 1.0:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0.0 < self.sufficient_decrease < 1.0:
            raise ValueError("sufficient_decrease must lie in (0, 1)")


def armijo(problem, x, f, direction, slope, ls):
    """Backtrack along ``direction`` until ``f(R_x(t d)) <= f + c t slope``.

    ``slope`` is the directional derivative ``<grad f(x), d>`` (negative).
    Returns ``(y, f(y), t)``; ``y`` is ``None`` when ``t`` fell below
    ``ls.min_step``.
    """
    geom = problem.geometry
    t = ls.initial_step
    while t >= ls.min_step:
        try:
            y = geom.retract(x, t * direction)
            fy = problem.cost(y)
        except NUMERICAL_ERRORS:
            fy = math.inf
        if fy <= f + ls.sufficient_decrease * t * slope:
            return y, fy, t
        t *= ls.contraction
    return None, f, t


def rgd_step(problem, x, ls, f=None, g=None):
    """One steepest-descent step. Returns ``(x_next, step_size)``.

    A zero gradient returns ``x`` unchanged with the initial step size. If the
    line search fails, ``x`` is returned with the (sub-``min_step``) size.
    """
    geom = problem.geometry
    f = problem.cost(x) if f is None else f
    g = problem.grad(x) if g is None else g
    gg = geom.inner(x, g, g)
    if gg == 0.0:
        return x, ls.initial_step
    y, _, t = armijo(problem, x, f, -g, -gg, ls)
    return (x if y is None else y), t


def rlbfgs_direction(geom, x, g, pairs):
    """Two-loop recursion ``-H g`` over ``pairs = [(s, y, rho), ...]`` (oldest first), all based at ``x``."""
    q = g
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * geom.inner(x, s, q)
        alphas.append(a)
        q = q - a * y
    if pairs:
        s, y, _ = pairs[-1]
        q = (geom.inner(x, s, y) / geom.inner(x, y, y)) * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * geom.inner(x, y, q)
        q = q + (a - b) * s
    return -q


def rlbfgs_step(problem, x, pairs, ls, memory=10, f=None, g=None):
    """One L-BFGS step with cautious updates.

    ``pairs`` must be based at ``x``. Returns
    ``(x_next, new_pairs, step_size, step_norm)`` where ``new_pairs`` are
    based at ``x_next``. ``x_next is x`` signals a failed line search or a
    zero gradient.
    """
    geom = problem.geometry
    f = problem.cost(x) if f is None else f
    g = problem.grad(x) if g is None else g
    d = rlbfgs_direction(geom, x, g, pairs)
    slope = geom.inner(x, g, d)
    if not slope < 0.0:
        d = -g
        slope = -geom.inner(x, g, g)
    if slope == 0.0:
        return x, pairs, ls.initial_step, 0.0
    y_pt, _, t = armijo(problem, x, f, d, slope, ls)
    if y_pt is None:
        return x, pairs, t, 0.0
    step = t * d
    g_new = problem.grad(y_pt)
    moved = geom.transport_many(x, step, [step, g, *[u for s, yv, _ in pairs for u in (s, yv)]], y=y_pt)
    s_new, g_old = moved[0], moved[1]
    new_pairs = [(moved[2 + 2 * i], moved[3 + 2 * i], rho) for i, (_, _, rho) in enumerate(pairs)]
    y_new = g_new - g_old
    sy = geom.inner(y_pt, s_new, y_new)
    if sy > 1e-12 * geom.norm(y_pt, s_new) * geom.norm(y_pt, y_new):
        new_pairs.append((s_new, y_new, 1.0 / sy))
        new_pairs = new_pairs[-memory:]
    return y_pt, new_pairs, t, geom.norm(x, step)


def fixed_point_step(problem, x, lam):
    """``R_x(-lam * grad f(x))``."""
    g = problem.grad(x)
    return problem.geometry.retract(x, -lam * g)


def _loop(problem, x0, max_iter, tol, advance, solver, scale=1.0):
    geom = problem.geometry
    if not geom.check_point(x0):
        raise ValueError("initial point is not feasible")
    t0 = time.perf_counter()
    trace = []
    x = x0
    f = problem.cost(x)
    g = problem.grad(x)
    k = 0
    while True:
        gnorm = geom.norm(x, g)
        row = TraceRow(k, 0.0, gnorm, scale * gnorm, f)
        status = None
        if not (math.isfinite(f) and math.isfinite(gnorm)):
            status = Status.NUMERICAL_ERROR
        elif gnorm < tol:
            status = Status.CONVERGED
        elif k >= max_iter:
            status = Status.MAX_ITER
        if status is None:
            try:
                out = advance(x, f, g)
            except NUMERICAL_ERRORS:
                out = None
            if out is None:
                status = Status.NUMERICAL_ERROR
            else:
                y, step_norm, stalled = out
                row.step_norm = step_norm
                if stalled:
                    status = Status.STALLED
        row.elapsed_s = time.perf_counter() - t0
        trace.append(row)
        if status is not None:
            return SolverReport(status, x, trace, solver=solver)
        x = y
        f = problem.cost(x)
        g = problem.grad(x)
        k += 1


def run_rgd(problem, x0, ls=None, *, max_iter=1000, tol=1e-6):
    """Riemannian steepest descent with Armijo backtracking."""
    ls = ls or LineSearchConfig()
    geom = problem.geometry

    def advance(x, f, g):
        y, t = rgd_step(problem, x, ls, f=f, g=g)
        if t < ls.min_step:
            return x, 0.0, True
        return y, t * geom.norm(x, g), False

    return _loop(problem, x0, max_iter, tol, advance, "rgd")


def run_rlbfgs(problem, x0, ls=None, *, memory=10, max_iter=1000, tol=1e-6):
    """Riemannian L-BFGS; stored pairs are transported to each new iterate."""
    ls = ls or LineSearchConfig()
    state = {"pairs": []}

    def advance(x, f, g):
        y, pairs, _, step_norm = rlbfgs_step(problem, x, state["pairs"], ls, memory=memory, f=f, g=g)
        if y is x:
            return x, 0.0, True
        state["pairs"] = pairs
        return y, step_norm, False

    return _loop(problem, x0, max_iter, tol, advance, "rlbfgs")


def run_fixed_point(problem, x0, lam, *, max_iter=1000, tol=1e-6, grad_measure="unscaled"):
    """Iterate ``x <- R_x(-lam grad f(x))``.

    ``grad_measure="scaled"`` tests ``lam * ||grad f||`` against ``tol``.
    """
    geom = problem.geometry
    scale = lam if grad_measure == "scaled" else 1.0

    def advance(x, f, g):
        step = -lam * g
        return geom.retract(x, step), geom.norm(x, step), False

    return _loop(problem, x0, max_iter, tol / scale, advance, "fixedpoint", scale=lam)
