import math

import numpy as np

from .base import Geometry, Tangent


class Euclidean(Geometry):
    """Flat space of arrays with a given shape.

    Transport is the identity, so the mixing solvers reduce to classical
    Euclidean Anderson mixing here. Mostly useful for tests.
    """

    def __init__(self, *shape):
        self.shape = tuple(int(s) for s in shape)
        self.dim = int(np.prod(self.shape))
        self.name = f"euclidean{self.shape}"

    def check_point(self, x, tol=1e-10):
        return np.shape(x) == self.shape and bool(np.all(np.isfinite(x)))

    def feasibility_error(self, x):
        return 0.0 if np.all(np.isfinite(x)) else math.inf

    def random_point(self, rng):
        return rng.standard_normal(self.shape)

    def proj(self, x, a):
        return Tangent(x, np.array(a, dtype=float, copy=True).reshape(self.shape))

    def retract(self, x, v):
        self.check_base(x, v)
        return x + v.vec

    exp = retract

    def transport(self, x, d, u, y=None):
        self.check_base(x, d, u)
        if y is None:
            y = self.retract(x, d)
        return Tangent(y, u.vec.copy())

    def parallel_transport(self, x, y, u):
        self.check_base(x, u)
        return Tangent(y, u.vec.copy())

    def dist(self, x, y):
        return float(np.linalg.norm(np.asarray(x) - np.asarray(y)))


def euclidean_geometry(*shape):
    return Euclidean(*shape)
