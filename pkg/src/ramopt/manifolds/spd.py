"""Symmetric positive definite matrices with the affine-invariant metric."""

import math

import numpy as np

from ..linalg import NotPositiveDefiniteError, spd_fn, sym_eig, thin_qr
from .base import Geometry, GeometryError, Tangent


def _sym(a):
    return 0.5 * (a + a.T)


def _sqrt_pair(X):
    """``(X^{1/2}, X^{-1/2})`` from a single eigendecomposition."""
    w, V = sym_eig(X)
    if w[0] <= 1e-14 * w[-1] or w[0] <= 0.0:
        raise GeometryError(f"matrix lost positive definiteness (lambda_min={w[0]:.3e})")
    r = np.sqrt(w)
    return _sym((V * r) @ V.T), _sym((V / r) @ V.T)


def _whiten(Xisqrt, U):
    return Xisqrt @ U @ Xisqrt


class SPD(Geometry):
    """Manifold of ``n x n`` SPD matrices.

    Metric ``<U, W>_X = tr(X^{-1} U X^{-1} W)``. The retraction is the exact
    exponential map and the transport is exact parallel transport along the
    connecting geodesic.
    """

    def __init__(self, n):
        if n < 1:
            raise ValueError(f"SPD manifold needs n >= 1, got {n}")
        self.n = int(n)
        self.dim = self.n * (self.n + 1) // 2
        self.name = f"spd(n={self.n})"

    def check_point(self, x, tol=1e-10):
        x = np.asarray(x)
        if x.shape != (self.n, self.n) or not np.all(np.isfinite(x)):
            return False
        if np.linalg.norm(x - x.T) > tol * max(1.0, np.linalg.norm(x)):
            return False
        return bool(sym_eig(x)[0][0] > 0.0)

    def feasibility_error(self, x):
        """Relative asymmetry; ``inf`` when ``x`` is not positive definite."""
        if sym_eig(x)[0][0] <= 0.0:
            return math.inf
        return float(np.linalg.norm(x - x.T) / np.linalg.norm(x))

    def random_point(self, rng):
        Q, _ = thin_qr(rng.standard_normal((self.n, self.n)))
        return _sym((Q * rng.uniform(1.0, 10.0, self.n)) @ Q.T)

    def random_tangent(self, x, rng):
        u = self.proj(x, rng.standard_normal((self.n, self.n)))
        return u / self.norm(x, u)

    def inner(self, x, u, v):
        self.check_base(x, u, v)
        a = np.linalg.solve(x, u.vec)
        b = np.linalg.solve(x, v.vec)
        return float(np.sum(a * b.T))

    def gram(self, x, us, vs=None):
        for u in us:
            self.check_base(x, u)
        _, Xis = _sqrt_pair(x)
        wu = np.array([_whiten(Xis, u.vec).ravel() for u in us])
        if vs is None:
            return wu @ wu.T
        for v in vs:
            self.check_base(x, v)
        wv = np.array([_whiten(Xis, v.vec).ravel() for v in vs])
        return wu @ wv.T

    def proj(self, x, a):
        return Tangent(x, _sym(np.asarray(a, dtype=float)))

    def egrad2rgrad(self, x, g):
        return Tangent(x, _sym(x @ _sym(np.asarray(g, dtype=float)) @ x))

    def exp(self, x, v):
        self.check_base(x, v)
        if not np.any(v.vec):
            return x
        Xs, Xis = _sqrt_pair(x)
        y = _sym(Xs @ spd_fn(_whiten(Xis, v.vec), "exp") @ Xs)
        if not np.all(np.isfinite(y)) or sym_eig(y)[0][0] <= 0.0:
            raise GeometryError("exponential map left the SPD cone numerically")
        return y

    retract = exp

    def log(self, x, y):
        """Riemannian logarithm ``Log_x(y)`` as a tangent at ``x``."""
        Xs, Xis = _sqrt_pair(x)
        try:
            L = spd_fn(_whiten(Xis, y), "log")
        except NotPositiveDefiniteError as e:
            raise GeometryError(str(e)) from e
        return Tangent(x, _sym(Xs @ L @ Xs))

    def _transport_operator(self, x, y):
        Xs, Xis = _sqrt_pair(x)
        mid = spd_fn(_whiten(Xis, y), "sqrt")
        return Xs @ mid @ Xis

    def parallel_transport(self, x, y, u):
        self.check_base(x, u)
        E = self._transport_operator(x, y)
        return Tangent(y, _sym(E @ u.vec @ E.T))

    def transport(self, x, d, u, y=None):
        return self.transport_many(x, d, [u], y=y)[0]

    def transport_many(self, x, d, us, y=None):
        self.check_base(x, d, *us)
        if y is None:
            y = self.retract(x, d)
        E = self._transport_operator(x, y)
        return [Tangent(y, _sym(E @ u.vec @ E.T)) for u in us]

    def dist(self, x, y):
        _, Xis = _sqrt_pair(x)
        w, _ = sym_eig(_whiten(Xis, y))
        if w[0] <= 0.0:
            raise GeometryError("distance to a non-SPD matrix")
        return float(np.sqrt(np.sum(np.log(w) ** 2)))


def spd_geometry(n):
    return SPD(n)
