"""Oblique manifold: matrices whose columns all have unit Euclidean norm.

A single column (1-D arrays) is the unit sphere. Every operation acts column
by column, so the same code serves both.
"""

import numpy as np

from .base import Geometry, GeometryError, Tangent


def _colnorms(a):
    return np.linalg.norm(a, axis=0, keepdims=True)


def _coldots(a, b):
    return np.sum(a * b, axis=0, keepdims=True)


class Oblique(Geometry):
    """Product of ``n`` unit spheres in ``R^p``; points have shape ``(p, n)``.

    The metric is the embedded one, the retraction normalizes columns and the
    vector transport projects onto the target tangent space. Parallel
    transport, the exponential map and the distance use the great-circle
    closed forms.
    """

    def __init__(self, n, p, *, vector=False):
        if n < 1 or p < 1:
            raise ValueError(f"oblique manifold needs n, p >= 1, got n={n}, p={p}")
        self.n, self.p = int(n), int(p)
        self.shape = (self.p,) if vector else (self.p, self.n)
        self.dim = self.n * (self.p - 1)
        self.name = f"sphere({self.p})" if vector else f"oblique(n={self.n}, p={self.p})"

    def check_point(self, x, tol=1e-10):
        x = np.asarray(x)
        if x.shape != self.shape or not np.all(np.isfinite(x)):
            return False
        return bool(np.all(np.abs(_colnorms(x) - 1.0) <= tol))

    def feasibility_error(self, x):
        return float(np.max(np.abs(_colnorms(x) - 1.0)))

    def random_point(self, rng):
        x = rng.standard_normal(self.shape)
        return x / _colnorms(x)

    def proj(self, x, a):
        a = np.asarray(a, dtype=float)
        return Tangent(x, a - x * _coldots(x, a))

    def retract(self, x, v):
        self.check_base(x, v)
        if not np.any(v.vec):
            return x
        y = x + v.vec
        nrm = _colnorms(y)
        if np.any(nrm == 0.0):
            raise GeometryError("oblique retraction hit a zero column")
        return y / nrm

    def transport(self, x, d, u, y=None):
        self.check_base(x, d, u)
        if y is None:
            y = self.retract(x, d)
        return Tangent(y, u.vec - y * _coldots(y, u.vec))

    def exp(self, x, v):
        self.check_base(x, v)
        t = _colnorms(v.vec)
        # sin(t)/t -> 1 as t -> 0
        sinc = np.sinc(t / np.pi)
        y = x * np.cos(t) + v.vec * sinc
        return y / _colnorms(y)

    def parallel_transport(self, x, y, u):
        self.check_base(x, u)
        denom = 1.0 + _coldots(x, y)
        if np.any(denom <= 1e-12):
            raise GeometryError("parallel transport between antipodal points is undefined")
        return Tangent(y, u.vec - (_coldots(y, u.vec) / denom) * (x + y))

    def col_dists(self, x, y):
        """Great-circle angle between matching columns of ``x`` and ``y``."""
        c = _coldots(x, y)
        s = _colnorms(y - x * c)
        return np.arctan2(s, c).ravel()

    def dist(self, x, y):
        return float(np.sqrt(np.sum(self.col_dists(x, y) ** 2)))


def oblique_geometry(n, p):
    """Oblique manifold of ``p x n`` matrices with unit columns."""
    return Oblique(n, p)


def sphere_geometry(d):
    """Unit sphere in ``R^d`` with points stored as 1-D arrays."""
    return Oblique(1, d, vector=True)
