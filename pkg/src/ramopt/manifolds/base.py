"""Abstract manifold contract shared by every geometry and consumed by the solvers."""

from abc import ABC, abstractmethod

import numpy as np

__all__ = [
    "GeometryError",
    "BaseMismatchError",
    "UnsupportedOperation",
    "Tangent",
    "Geometry",
    "same_point",
]


class GeometryError(RuntimeError):
    """A geometric operation failed (domain violation, degenerate input, ...)."""


class BaseMismatchError(GeometryError, ValueError):
    """A tangent vector was used at a point other than its base point."""


class UnsupportedOperation(GeometryError, NotImplementedError):
    """The geometry has no closed form for the requested operation."""


def same_point(x, y):
    """Cheap identity check with an exact-equality fallback."""
    if x is y:
        return True
    if isinstance(x, np.ndarray) and isinstance(y, np.ndarray):
        return x.shape == y.shape and np.array_equal(x, y)
    if type(x) is type(y) and hasattr(x, "equals"):
        return x.equals(y)
    return False


class Tangent:
    """A tangent vector tagged with its base point.

    ``vec`` holds the ambient coordinates (an ndarray) or, on the fixed-rank
    manifold, a factored triple supporting the same arithmetic. Binary
    operations refuse to mix vectors from different tangent spaces.
    """

    __slots__ = ("base", "vec")
    __array_ufunc__ = None  # numpy scalars defer to __rmul__

    def __init__(self, base, vec):
        self.base = base
        self.vec = vec

    def _check(self, other):
        if not isinstance(other, Tangent):
            return NotImplemented
        if not same_point(self.base, other.base):
            raise BaseMismatchError("tangent vectors live in different tangent spaces")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Tangent(self.base, self.vec + other.vec)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Tangent(self.base, self.vec - other.vec)

    def __neg__(self):
        return Tangent(self.base, -self.vec)

    def __mul__(self, a):
        if isinstance(a, Tangent):
            return NotImplemented
        return Tangent(self.base, float(a) * self.vec)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return Tangent(self.base, self.vec / float(a))

    def __repr__(self):
        return f"Tangent(vec={self.vec!r})"


class Geometry(ABC):
    """A Riemannian manifold with a retraction and an associated vector transport.

    Geometries are immutable after construction. Points are plain ndarrays
    except on the fixed-rank manifold; tangents are :class:`Tangent`.
    """

    name = "geometry"
    #: intrinsic dimension of the manifold
    dim = 0

    # --- construction helpers -------------------------------------------------

    def tangent(self, x, vec):
        return Tangent(x, vec)

    def zero(self, x):
        return Tangent(x, np.zeros_like(x))

    def check_base(self, x, *tangents):
        for u in tangents:
            if not same_point(u.base, x):
                raise BaseMismatchError(f"{self.name}: tangent is not based at the given point")

    @abstractmethod
    def check_point(self, x, tol=1e-10):
        """Return True when ``x`` is feasible to within ``tol``."""

    def feasibility_error(self, x):
        """Size of the constraint violation of ``x`` (0 for an exactly feasible point)."""
        raise UnsupportedOperation(f"{self.name} does not report a constraint residual")

    def validate_point(self, x, tol=1e-10):
        if not self.check_point(x, tol):
            raise GeometryError(f"{self.name}: point is not feasible")

    @abstractmethod
    def random_point(self, rng):
        """A feasible point drawn from ``rng`` (a ``numpy.random.Generator``)."""

    def random_tangent(self, x, rng):
        """A unit-norm tangent vector at ``x``; redraws if the sample projects to zero."""
        while True:
            u = self.proj(x, rng.standard_normal(np.shape(x)))
            nu = self.norm(x, u)
            if nu > 0.0:
                return u / nu

    def to_ambient(self, u):
        """Dense ambient coordinates of a tangent vector."""
        return u.vec

    def ambient_point(self, x):
        """Dense ambient representation of a point."""
        return x

    # --- metric ----------------------------------------------------------------

    def inner(self, x, u, v):
        self.check_base(x, u, v)
        return float(np.vdot(u.vec, v.vec))

    def norm(self, x, u):
        return float(np.sqrt(max(self.inner(x, u, u), 0.0)))

    def gram(self, x, us, vs=None):
        """Matrix of pairwise inner products ``G[i, j] = <us[i], vs[j]>_x``."""
        vs = us if vs is None else vs
        G = np.empty((len(us), len(vs)))
        for i, u in enumerate(us):
            for j, v in enumerate(vs):
                if vs is us and j < i:
                    G[i, j] = G[j, i]
                else:
                    G[i, j] = self.inner(x, u, v)
        return G

    # --- maps -----------------------------------------------------------------

    @abstractmethod
    def proj(self, x, a):
        """Orthogonal projection of an ambient array onto the tangent space at ``x``."""

    @abstractmethod
    def retract(self, x, v):
        """Retraction ``R_x(v)``."""

    @abstractmethod
    def transport(self, x, d, u, y=None):
        """Vector transport of ``u`` along the retraction direction ``d``.

        ``y`` may be passed when ``retract(x, d)`` is already known; the result
        is then based at that exact object.
        """

    def transport_many(self, x, d, us, y=None):
        if y is None:
            y = self.retract(x, d)
        return [self.transport(x, d, u, y=y) for u in us]

    def egrad2rgrad(self, x, g):
        return self.proj(x, g)

    def parallel_transport(self, x, y, u):
        raise UnsupportedOperation(f"{self.name} has no closed-form parallel transport")

    def dist(self, x, y):
        raise UnsupportedOperation(f"{self.name} has no closed-form distance")

    def exp(self, x, v):
        raise UnsupportedOperation(f"{self.name} has no closed-form exponential map")

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"
