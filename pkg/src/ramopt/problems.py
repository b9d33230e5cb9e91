"""Benchmark objectives and their seeded instance generators.

Each ``*_problem`` builder returns a :class:`ProblemInstance` bundling the
geometry with a cost and its Euclidean (or Riemannian) gradient. All costs
are minimized; the max-cut objective is negated once at construction.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .linalg import sym_eig, thin_qr
from .manifolds import (
    Tangent,
    fixedrank_geometry,
    oblique_geometry,
    sphere_geometry,
    spd_geometry,
    stiefel_geometry,
)
from .manifolds.spd import _sqrt_pair, _sym

__all__ = [
    "ProblemInstance",
    "maxcut_problem",
    "gen_maxcut",
    "brockett_problem",
    "gen_brockett",
    "karcher_problem",
    "gen_spd_set",
    "matcomp_problem",
    "gen_matcomp",
    "rayleigh_problem",
    "gen_rayleigh",
    "build_problem",
    "initial_point",
    "instance_header",
    "save_header",
    "load_instance",
    "PROBLEMS",
]

PROBLEMS = ("maxcut", "brockett", "karcher", "matcomp", "rayleigh")


@dataclass(frozen=True)
class ProblemInstance:
    """A cost on a manifold together with its gradient.

    ``egrad`` returns the Euclidean gradient of the cost in the geometry's
    ambient coordinates. When ``rgrad`` is given it is used directly as the
    Riemannian gradient instead of converting ``egrad``.
    """

    geometry: object
    cost: Callable
    egrad: Callable
    name: str
    dims: dict = field(default_factory=dict)
    seed: Optional[int] = None
    rgrad: Optional[Callable] = None
    #: shape of the matrix representing a point; sets the automatic scaling
    matrix_shape: tuple = ()
    data: dict = field(default_factory=dict, repr=False)

    def grad(self, x):
        """Riemannian gradient at ``x`` as a :class:`Tangent`."""
        if self.rgrad is not None:
            return self.rgrad(x)
        return self.geometry.egrad2rgrad(x, self.egrad(x))

    @property
    def auto_scale(self):
        """``1 / max(matrix dimensions)``, the default cost scaling for the mixing solvers."""
        return 1.0 / max(self.matrix_shape)


def _rng(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**63, *stream]))


# --- max-cut -------------------------------------------------------------------


def maxcut_problem(W, p, *, seed=None, tau=None):
    """Rank-``p`` relaxation of max-cut on the oblique manifold.

    Minimizes ``-tr(C V^T V)`` over ``V`` of shape ``(p, n)`` with unit
    columns, where ``C = (diag(W 1) - W) / 4``.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n) or not np.allclose(W, W.T, rtol=0, atol=1e-12 * max(1.0, np.abs(W).max())):
        raise ValueError("max-cut weight matrix must be square and symmetric")
    if np.any(np.diag(W) != 0):
        raise ValueError("max-cut weight matrix must have a zero diagonal")
    C = 0.25 * (np.diag(W.sum(axis=1)) - W)

    def cost(V):
        return -float(np.sum((V @ C) * V))

    def egrad(V):
        return -2.0 * (V @ C)

    dims = {"n": n, "p": int(p)}
    if tau is not None:
        dims["tau"] = float(tau)
    return ProblemInstance(
        geometry=oblique_geometry(n, p),
        cost=cost,
        egrad=egrad,
        name="maxcut",
        dims=dims,
        seed=seed,
        matrix_shape=(int(p), n),
        data={"W": W, "C": C},
    )


def gen_maxcut(n, tau, seed):
    """Random weighted graph: each edge kept with probability ``1 - tau``, weight ~ U(0, 1)."""
    if n < 2:
        raise ValueError("need at least two nodes")
    rng = _rng(seed, 0)
    keep = rng.random((n, n)) >= tau
    weights = rng.random((n, n))
    W = np.triu(np.where(keep, weights, 0.0), k=1)
    return W + W.T


# --- Brockett -------------------------------------------------------------------


def brockett_problem(A, p, *, seed=None):
    """Brockett cost ``tr(X^T A X N)`` on the Stiefel manifold, ``N = diag(p, ..., 1)``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("Brockett matrix must be square and symmetric")
    N = np.arange(p, 0, -1, dtype=float)

    def cost(X):
        return float(np.sum((A @ X) * X * N))

    def egrad(X):
        return 2.0 * (A @ X) * N

    return ProblemInstance(
        geometry=stiefel_geometry(n, p),
        cost=cost,
        egrad=egrad,
        name="brockett",
        dims={"n": n, "p": int(p)},
        seed=seed,
        matrix_shape=(n, int(p)),
        data={"A": A, "N": N},
    )


def gen_brockett(n, seed):
    C = _rng(seed, 0).standard_normal((n, n))
    return 0.5 * (C + C.T)


# --- Karcher mean ---------------------------------------------------------------


def karcher_problem(A_list, *, seed=None):
    """Sum of squared affine-invariant distances to a set of SPD matrices.

    The Riemannian gradient ``-2 sum_k Log_X(A_k)`` is supplied in closed
    form.
    """
    A_list = [np.asarray(A, dtype=float) for A in A_list]
    if not A_list:
        raise ValueError("Karcher mean needs at least one matrix")
    n = A_list[0].shape[0]
    geom = spd_geometry(n)
    for A in A_list:
        if not geom.check_point(A):
            raise ValueError("every Karcher mean input must be SPD")

    def _logs(X):
        Xs, Xis = _sqrt_pair(X)
        out = []
        for A in A_list:
            w, V = sym_eig(Xis @ A @ Xis)
            out.append((w, V))
        return Xs, Xis, out

    def cost(X):
        _, _, logs = _logs(X)
        return float(sum(np.sum(np.log(w) ** 2) for w, _ in logs))

    def rgrad(X):
        Xs, _, logs = _logs(X)
        S = sum((V * np.log(w)) @ V.T for w, V in logs)
        return Tangent(X, _sym(-2.0 * (Xs @ S @ Xs)))

    def egrad(X):
        _, Xis, logs = _logs(X)
        S = sum((V * np.log(w)) @ V.T for w, V in logs)
        return _sym(-2.0 * (Xis @ S @ Xis))

    return ProblemInstance(
        geometry=geom,
        cost=cost,
        egrad=egrad,
        rgrad=rgrad,
        name="karcher",
        dims={"n": n, "m": len(A_list)},
        seed=seed,
        matrix_shape=(n, n),
        data={"A_list": A_list},
    )


def gen_spd_set(n, m, seed):
    """``m`` random SPD matrices ``Q diag(u) Q^T`` with ``u ~ U[1, 10]``."""
    rng = _rng(seed, 0)
    out = []
    for _ in range(m):
        Q, _ = thin_qr(rng.standard_normal((n, n)))
        out.append(_sym((Q * rng.uniform(1.0, 10.0, n)) @ Q.T))
    return out


# --- matrix completion -----------------------------------------------------------


def matcomp_problem(A, omega, k, *, seed=None, sampling=None):
    """Low-rank completion ``1/2 ||P_Omega(X - A)||_F^2`` on the rank-``k`` manifold.

    ``omega`` is a pair of index arrays ``(rows, cols)``. Only the observed
    entries of ``A`` are retained. The cost samples ``U diag(s) V^T`` on
    ``omega`` without forming the dense matrix.
    """
    A = np.asarray(A, dtype=float)
    n, m = A.shape
    rows, cols = (np.asarray(a, dtype=np.int64) for a in omega)
    if rows.size == 0:
        raise ValueError("observation set is empty")
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    values = A[rows, cols]

    def residual(X):
        return np.einsum("ij,ij->i", X.U[rows] * X.s, X.V[cols]) - values

    def cost(X):
        res = residual(X)
        return 0.5 * float(res @ res)

    def egrad(X):
        return sp.csr_matrix((residual(X), (rows, cols)), shape=(n, m))

    return ProblemInstance(
        geometry=fixedrank_geometry(n, m, k),
        cost=cost,
        egrad=egrad,
        name="matcomp",
        dims={"n": n, "m": m, "k": int(k), **({"sampling": sampling} if sampling else {})},
        seed=seed,
        matrix_shape=(n, m),
        data={"A": A, "rows": rows, "cols": cols, "values": values},
    )


def gen_matcomp(n, m, k, seed, max_retries=10, sampling="uniform"):
    """Random rank-``k`` matrix ``A = L R`` and an observation set.

    With ``tau = 3 k (n + m - k) / (n m)``, entry ``(i, j)`` is observed when
    ``C_ij < tau``. ``sampling="uniform"`` draws ``C`` from U(0, 1), so each
    entry is seen with probability ``min(1, tau)`` (about three times the
    degrees of freedom). ``sampling="gaussian"`` draws ``C`` from N(0, 1),
    which observes roughly half of the matrix for small ``tau``. A draw with
    fewer than the ``k (n + m - k)`` degrees of freedom is redrawn from the
    next stream.
    """
    if not k <= min(n, m):
        raise ValueError("need k <= min(n, m)")
    if sampling not in ("uniform", "gaussian"):
        raise ValueError(f"sampling must be 'uniform' or 'gaussian', got {sampling!r}")
    rng = _rng(seed, 0)
    A = rng.standard_normal((n, k)) @ rng.standard_normal((k, m))
    tau = 3.0 * k * (m + n - k) / (m * n)
    need = k * (n + m - k)
    for attempt in range(max_retries):
        stream = _rng(seed, 1, attempt)
        C = stream.random((n, m)) if sampling == "uniform" else stream.standard_normal((n, m))
        mask = C < tau
        if mask.sum() >= need:
            rows, cols = np.nonzero(mask)
            return A, (rows, cols)
    raise RuntimeError(f"could not draw an observation set with >= {need} entries in {max_retries} tries")


# --- Rayleigh quotient -----------------------------------------------------------


def rayleigh_problem(A, *, seed=None):
    """``x^T A x`` on the unit sphere; minimizers are eigenvectors of the smallest eigenvalue."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]

    def cost(x):
        return float(x @ A @ x)

    def egrad(x):
        return 2.0 * (A @ x)

    return ProblemInstance(
        geometry=sphere_geometry(n),
        cost=cost,
        egrad=egrad,
        name="rayleigh",
        dims={"n": n},
        seed=seed,
        matrix_shape=(n, 1),
        data={"A": A},
    )


def gen_rayleigh(n, seed, gap=1.0):
    """Diagonal matrix with a spectral gap ``gap`` above its smallest eigenvalue."""
    rng = _rng(seed, 0)
    rest = np.sort(rng.uniform(1.0 + gap, 2.0 + gap, n - 1))
    return np.diag(np.concatenate([[1.0], rest]))


# --- registry ------------------------------------------------------------------


def build_problem(name, seed, **dims):
    """Generate an instance by name from its seed and dimensions.

    ``maxcut``: n, p, tau. ``brockett``: n, p. ``karcher``: n, m (number of
    matrices). ``matcomp``: n, k, and optionally m (defaults to n).
    ``rayleigh``: n.
    """
    if name == "maxcut":
        tau = dims.get("tau", 0.3)
        return maxcut_problem(gen_maxcut(dims["n"], tau, seed), dims["p"], seed=seed, tau=tau)
    if name == "brockett":
        return brockett_problem(gen_brockett(dims["n"], seed), dims["p"], seed=seed)
    if name == "karcher":
        return karcher_problem(gen_spd_set(dims["n"], dims["m"], seed), seed=seed)
    if name == "matcomp":
        n, k = dims["n"], dims["k"]
        m = dims.get("m") or n
        sampling = dims.get("sampling", "uniform")
        A, omega = gen_matcomp(n, m, k, seed, sampling=sampling)
        return matcomp_problem(A, omega, k, seed=seed, sampling=sampling)
    if name == "rayleigh":
        return rayleigh_problem(gen_rayleigh(dims["n"], seed), seed=seed)
    raise ValueError(f"unknown problem {name!r}; expected one of {PROBLEMS}")


def initial_point(problem, rng):
    """Starting point: the first input matrix for Karcher, a random feasible point otherwise."""
    if problem.name == "karcher":
        return problem.data["A_list"][0].copy()
    return problem.geometry.random_point(rng)


def instance_header(problem):
    header = {"name": problem.name, "dims": dict(problem.dims), "seed": problem.seed}
    if problem.name == "matcomp":
        header["observed"] = int(problem.data["rows"].size)
    return header


def save_header(problem, path):
    with open(path, "w") as fh:
        json.dump(instance_header(problem), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance(path):
    """Regenerate an instance from a header written by :func:`save_header`."""
    with open(path) as fh:
        header = json.load(fh)
    return build_problem(header["name"], header["seed"], **header["dims"])
