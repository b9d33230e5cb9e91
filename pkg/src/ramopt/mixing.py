"""Riemannian Anderson mixing and its regularized, safeguarded variant.

Both solvers treat ``r_k = -lam * grad f(x_k)`` as the residual of the
fixed-point map ``x -> R_x(-lam * grad f(x))``. Difference pairs
``(dx, dr)`` from the last ``m`` steps are carried into the current tangent
space by vector transport, a small least-squares problem in the manifold
metric picks extrapolation coefficients, and the mixed direction is
retracted. No inverse retraction is ever needed.
"""

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .manifolds import GeometryError, same_point
from .linalg import NotPositiveDefiniteError

__all__ = [
    "Status",
    "TraceRow",
    "SolverReport",
    "MixingConfig",
    "HistoryBuffer",
    "GammaSolution",
    "history_advance",
    "solve_gamma",
    "ram_direction",
    "rram_direction",
    "choose_alpha",
    "lambda_max_sym",
    "adaptive_delta",
    "step_bound",
    "run_mixing",
]

#: exceptions a geometry may raise on a degenerate step
NUMERICAL_ERRORS = (GeometryError, NotPositiveDefiniteError, np.linalg.LinAlgError, FloatingPointError)

STALL_STEP = 1e-14
STALL_COUNT = 5


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    STALLED = "Stalled"
    NUMERICAL_ERROR = "NumericalError"

    def __str__(self):
        return self.value


@dataclass
class TraceRow:
    """State at iterate ``iter``; the step fields describe the step taken from it."""

    iter: int
    elapsed_s: float
    grad_unscaled: float
    r_norm: float
    f: float
    step_norm: float = math.nan
    theta: float = math.nan
    alpha: float = math.nan
    delta: float = math.nan

    FIELDS = ("iter", "elapsed_s", "grad_unscaled", "r_norm", "f", "step_norm", "theta", "alpha", "delta")

    def astuple(self):
        return tuple(getattr(self, k) for k in self.FIELDS)


@dataclass
class SolverReport:
    status: Status
    x: object
    trace: list
    solver: str = ""
    #: counters for safeguards that fired during the run
    events: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return self.trace[-1].iter

    @property
    def grad_norm(self):
        return self.trace[-1].grad_unscaled

    @property
    def converged(self):
        return self.status is Status.CONVERGED

    @property
    def elapsed(self):
        return self.trace[-1].elapsed_s

    def column(self, name):
        return np.array([getattr(row, name) for row in self.trace])


@dataclass
class MixingConfig:
    """Settings for :func:`run_mixing`.

    ``variant`` is ``"ram"`` or ``"rram"``. For RRAM, ``alpha_mode`` is one of
    ``"descent_check"`` (try the full step, fall back to the plain residual
    step if it is not a descent direction), ``"exact_bound"`` (largest alpha
    keeping the step operator coercive with constant ``mu``) or ``"fixed"``
    (use ``alpha``). ``delta=None`` selects the adaptive regularization
    ``c1 * ||r_k|| / ||dx_{k-1}||``.
    """

    beta: float = 0.6
    memory: int = 3
    variant: str = "ram"
    alpha_mode: str = "descent_check"
    mu: float = 0.5
    alpha: float = 1.0
    delta: float = None
    delta_c1: float = 1e-7
    gamma_cap: float = 1e4
    max_iter: int = 1000
    tol: float = 1e-6
    scale: float = 1.0
    grad_measure: str = "unscaled"

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.memory < 1:
            raise ValueError(f"memory must be >= 1, got {self.memory}")
        if self.variant not in ("ram", "rram"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.alpha_mode not in ("descent_check", "exact_bound", "fixed"):
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must lie in (0, 1)")
        if self.tol < 0 or self.scale <= 0 or self.delta_c1 <= 0:
            raise ValueError("tol must be >= 0 and scale, delta_c1 > 0")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.grad_measure not in ("unscaled", "scaled"):
            raise ValueError(f"unknown grad_measure {self.grad_measure!r}")


@dataclass
class HistoryBuffer:
    """Difference pairs living in the tangent space at ``base``, oldest first."""

    base: object
    capacity: int
    dx: list = field(default_factory=list)
    dr: list = field(default_factory=list)

    def __len__(self):
        return len(self.dx)

    def cleared(self):
        return HistoryBuffer(self.base, self.capacity)


@dataclass
class GammaSolution:
    gamma: np.ndarray
    rbar: object
    theta: float
    fallback: bool = False


def _combine(cols, coeffs, zero):
    """``sum_i coeffs[i] * cols[i]``; returns ``zero`` for an empty combination."""
    out = zero
    for c, u in zip(coeffs, cols):
        out = out + float(c) * u
    return out


def history_advance(h, x_new, step, r_old, r_new, geom):
    """Move the history to ``x_new = R_{h.base}(step)`` and append the newest pair.

    Every retained column is transported once; the oldest pair is dropped
    first when the buffer is full.
    """
    geom.check_base(h.base, step, r_old)
    if not same_point(r_new.base, x_new):
        raise GeometryError("new residual is not based at the new iterate")
    keep = max(0, min(len(h), h.capacity - 1))
    old_dx = h.dx[len(h) - keep:]
    old_dr = h.dr[len(h) - keep:]
    moved = geom.transport_many(h.base, step, [*old_dx, *old_dr, step, r_old], y=x_new)
    new_dx = moved[:keep] + [moved[2 * keep]]
    new_dr = moved[keep:2 * keep] + [r_new - moved[2 * keep + 1]]
    return HistoryBuffer(x_new, h.capacity, new_dx, new_dr)


def solve_gamma(h, r, delta, geom):
    """Coefficients minimizing ``||r - R G||^2 + delta ||X G||^2`` in the metric at ``h.base``.

    Solved through the ``m_k x m_k`` normal equations. If the system is badly
    conditioned a tiny ridge is added; if it is still singular, or rounding
    makes the result worse than ``G = 0``, the zero vector is returned with
    ``fallback=True``.
    """
    geom.check_base(h.base, r)
    mk = len(h)
    r_norm = geom.norm(h.base, r)
    if mk == 0:
        return GammaSolution(np.zeros(0), r, 1.0)
    G = geom.gram(h.base, h.dr)
    if delta:
        G = G + delta * geom.gram(h.base, h.dx)
    b = np.array([geom.inner(h.base, d, r) for d in h.dr])

    def zero():
        return GammaSolution(np.zeros(mk), r, 1.0, fallback=True)

    if not np.all(np.isfinite(G)) or not np.all(np.isfinite(b)):
        return zero()
    trace = float(np.trace(G))
    if trace <= 0.0:
        return zero()
    if np.linalg.cond(G) > 1e14:
        G = G + (1e-12 * trace / mk) * np.eye(mk)
    try:
        gamma = np.linalg.solve(G, b)
    except np.linalg.LinAlgError:
        return zero()
    if not np.all(np.isfinite(gamma)):
        return zero()
    rbar = r - _combine(h.dr, gamma, geom.zero(h.base))
    rbar_norm = geom.norm(h.base, rbar)
    if r_norm == 0.0:
        return GammaSolution(gamma, rbar, 1.0)
    theta = rbar_norm / r_norm
    if theta > 1.0:
        return zero()
    return GammaSolution(gamma, rbar, theta)


def ram_direction(h, r, gamma, rbar, beta, geom):
    """``-X G + beta * rbar``."""
    return beta * rbar - _combine(h.dx, gamma, geom.zero(h.base))


def rram_direction(h, r, gamma, alpha, beta, geom, rbar=None):
    """``beta * r - alpha (X + beta R) G``.

    ``alpha = 1`` routes through :func:`ram_direction` so the two solvers
    agree to the last bit; ``alpha = 0`` is exactly ``beta * r``.
    """
    if alpha == 1.0:
        if rbar is None:
            rbar = r - _combine(h.dr, gamma, geom.zero(h.base))
        return ram_direction(h, r, gamma, rbar, beta, geom)
    if alpha == 0.0:
        return beta * r
    zero = geom.zero(h.base)
    mixed = _combine(h.dx, gamma, zero) + beta * _combine(h.dr, gamma, zero)
    return beta * r - alpha * mixed


def lambda_max_sym(h, beta, delta, geom):
    """Largest eigenvalue of the symmetric part of ``E(v) = (X + beta R) Gamma(v)``.

    ``Gamma(v)`` is the regularized least-squares coefficient map for
    right-hand side ``v``. The operator vanishes on the metric orthogonal
    complement of ``span(X, R)``, so the spectrum is computed from a dense
    ``2 m_k x 2 m_k`` problem assembled from Gram matrices. Raises
    ``LinAlgError`` when the regularized Gram system is singular.
    """
    mk = len(h)
    if mk == 0:
        raise np.linalg.LinAlgError("empty history")
    cols = [*h.dx, *h.dr]
    Gw = geom.gram(h.base, cols)
    G = Gw[mk:, mk:] + delta * Gw[:mk, :mk]
    if not np.all(np.isfinite(G)) or np.trace(G) <= 0.0 or np.linalg.cond(G) > 1e14:
        raise np.linalg.LinAlgError("singular least-squares Gram matrix")
    Ginv = np.linalg.inv(G)
    I = np.eye(mk)
    Pa = np.vstack([I, beta * I])
    Pr = np.vstack([np.zeros((mk, mk)), I])
    K = 0.5 * (Pa @ Ginv @ Pr.T + Pr @ Ginv @ Pa.T)
    d, Z = np.linalg.eigh(0.5 * (Gw + Gw.T))
    keep = d > 1e-12 * max(d[-1], 0.0)
    if not np.any(keep):
        raise np.linalg.LinAlgError("history columns are all zero")
    B = Z[:, keep] * np.sqrt(d[keep])
    S = B.T @ K @ B
    lam = float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])
    if int(keep.sum()) < geom.dim:
        lam = max(lam, 0.0)
    return lam


def choose_alpha(mode, grad, candidate, h, beta, geom, *, mu=0.5, delta=0.0, alpha=1.0):
    """Safeguard weight for the RRAM step.

    Returns ``(alpha, lambda_k)`` where ``lambda_k = lambda_max(E + E^*)`` is
    only computed in ``"exact_bound"`` mode (``None`` otherwise).
    """
    if mode == "descent_check":
        return (1.0 if geom.inner(h.base, grad, candidate) < 0.0 else 0.0), None
    if mode == "exact_bound":
        if len(h) == 0:
            return 1.0, None
        try:
            lam = 2.0 * lambda_max_sym(h, beta, delta, geom)
        except np.linalg.LinAlgError:
            return 0.0, None
        if lam <= 0.0:
            return 1.0, lam
        return min(1.0, 2.0 * beta * (1.0 - mu) / lam), lam
    if mode == "fixed":
        return min(1.0, max(0.0, float(alpha))), None
    raise ValueError(f"unknown alpha mode {mode!r}")


def adaptive_delta(r_norm, prev_step_norm, c1):
    """``c1 * ||r_k|| / ||dx_{k-1}||``, lagged one step; ``c1`` when there is no usable previous step."""
    if prev_step_norm is None or prev_step_norm <= 1e-300:
        return c1
    return c1 * r_norm / prev_step_norm


def step_bound(alpha, beta, delta):
    """Squared operator-norm bound ``2 [beta^2 (1 + 2 a^2 - 2 a) + a^2 / delta]`` of the RRAM step map."""
    return 2.0 * (beta**2 * (1.0 + 2.0 * alpha**2 - 2.0 * alpha) + alpha**2 / delta)


def _measure(cfg, gnorm):
    return gnorm if cfg.grad_measure == "unscaled" else cfg.scale * gnorm


def run_mixing(problem, x0, cfg, *, callback=None):
    """Run RAM or RRAM from ``x0``.

    Terminates with ``Converged`` when the gradient norm (unscaled unless
    ``cfg.grad_measure == "scaled"``) drops below ``cfg.tol``, ``MaxIter``
    after ``cfg.max_iter`` steps, ``Stalled`` after five consecutive steps
    shorter than 1e-14, and ``NumericalError`` when a geometric operation
    fails even with the history discarded.
    """
    geom = problem.geometry
    if not geom.check_point(x0):
        raise ValueError("initial point is not feasible")
    lam, beta = cfg.scale, cfg.beta
    rram = cfg.variant == "rram"
    events = {"gamma_fallback": 0, "gamma_cap": 0, "alpha_zero": 0, "retry": 0, "step_bound_violation": 0}
    trace = []
    t0 = time.perf_counter()

    x = x0
    f = problem.cost(x)
    g = problem.grad(x)
    gnorm = geom.norm(x, g)
    r = -lam * g
    h = HistoryBuffer(x, cfg.memory)
    prev_step_norm = None
    small_steps = 0
    k = 0

    def finish(status, row):
        row.elapsed_s = time.perf_counter() - t0
        trace.append(row)
        return SolverReport(status, x, trace, solver=cfg.variant, events=events)

    while True:
        row = TraceRow(k, 0.0, gnorm, lam * gnorm, f)
        if not (math.isfinite(f) and math.isfinite(gnorm)):
            return finish(Status.NUMERICAL_ERROR, row)
        if _measure(cfg, gnorm) < cfg.tol:
            return finish(Status.CONVERGED, row)
        if k >= cfg.max_iter:
            return finish(Status.MAX_ITER, row)
        if small_steps >= STALL_COUNT:
            return finish(Status.STALLED, row)

        r_norm = lam * gnorm
        alpha, delta, theta = 1.0, 0.0, 1.0
        if k == 0:
            step = r
            alpha = 0.0
        else:
            if rram:
                if cfg.delta is not None:
                    delta = cfg.delta
                else:
                    delta = adaptive_delta(r_norm, prev_step_norm, cfg.delta_c1)
            sol = solve_gamma(h, r, delta, geom)
            events["gamma_fallback"] += sol.fallback
            if sol.gamma.size and np.max(np.abs(sol.gamma)) > cfg.gamma_cap:
                events["gamma_cap"] += 1
                h = h.cleared()
                sol = GammaSolution(np.zeros(0), r, 1.0)
            if not rram:
                step = ram_direction(h, r, sol.gamma, sol.rbar, beta, geom)
                theta = sol.theta
            else:
                if cfg.alpha_mode == "fixed":
                    alpha, _ = choose_alpha("fixed", g, None, h, beta, geom, alpha=cfg.alpha)
                    step = rram_direction(h, r, sol.gamma, alpha, beta, geom, rbar=sol.rbar)
                elif cfg.alpha_mode == "descent_check":
                    step = rram_direction(h, r, sol.gamma, 1.0, beta, geom, rbar=sol.rbar)
                    alpha, _ = choose_alpha("descent_check", g, step, h, beta, geom)
                    if alpha == 0.0:
                        step = rram_direction(h, r, sol.gamma, 0.0, beta, geom)
                else:
                    alpha, _ = choose_alpha("exact_bound", g, None, h, beta, geom, mu=cfg.mu, delta=delta)
                    step = rram_direction(h, r, sol.gamma, alpha, beta, geom, rbar=sol.rbar)
                if alpha == 0.0:
                    events["alpha_zero"] += 1
                if alpha == 1.0:
                    theta = sol.theta
                elif alpha == 0.0 or r_norm == 0.0:
                    theta = 1.0
                else:
                    partial = r - alpha * _combine(h.dr, sol.gamma, geom.zero(h.base))
                    theta = geom.norm(x, partial) / r_norm

        step_norm = geom.norm(x, step)
        if rram and k > 0 and delta > 0.0:
            if step_norm**2 > step_bound(alpha, beta, delta) * r_norm**2 * (1.0 + 1e-10):
                events["step_bound_violation"] += 1

        try:
            y = geom.retract(x, step)
        except NUMERICAL_ERRORS:
            y = None
        if y is None and k > 0:
            # one retry with the plain residual step and no history
            events["retry"] += 1
            h = h.cleared()
            step, alpha, theta = beta * r, 0.0, 1.0
            step_norm = geom.norm(x, step)
            try:
                y = geom.retract(x, step)
            except NUMERICAL_ERRORS:
                y = None
        row.step_norm, row.theta, row.alpha, row.delta = step_norm, theta, alpha, delta
        if y is None:
            return finish(Status.NUMERICAL_ERROR, row)

        f_new = problem.cost(y)
        g_new = problem.grad(y)
        r_new = -lam * g_new
        try:
            h = history_advance(h, y, step, r, r_new, geom)
        except NUMERICAL_ERRORS:
            events["retry"] += 1
            h = HistoryBuffer(y, cfg.memory)

        row.elapsed_s = time.perf_counter() - t0
        trace.append(row)
        if callback is not None:
            callback(row)

        small_steps = small_steps + 1 if step_norm < STALL_STEP else 0
        x, f, g, r = y, f_new, g_new, r_new
        gnorm = geom.norm(x, g)
        prev_step_norm = step_norm
        k += 1
