import numpy as np

from ..linalg import thin_qr
from .base import Geometry, GeometryError, Tangent


def _sym(a):
    return 0.5 * (a + a.T)


class Stiefel(Geometry):
    """Stiefel manifold ``{X in R^{n x p}: X^T X = I_p}``.

    Embedded (trace) metric, QR-based retraction, projection transport.
    """

    def __init__(self, n, p):
        if not n >= p >= 1:
            raise ValueError(f"Stiefel manifold needs n >= p >= 1, got n={n}, p={p}")
        self.n, self.p = int(n), int(p)
        self.dim = self.n * self.p - self.p * (self.p + 1) // 2
        self.name = f"stiefel(n={self.n}, p={self.p})"

    def check_point(self, x, tol=1e-10):
        x = np.asarray(x)
        if x.shape != (self.n, self.p) or not np.all(np.isfinite(x)):
            return False
        return bool(np.linalg.norm(x.T @ x - np.eye(self.p)) <= tol)

    def feasibility_error(self, x):
        return float(np.linalg.norm(x.T @ x - np.eye(self.p)))

    def random_point(self, rng):
        Q, _ = thin_qr(rng.standard_normal((self.n, self.p)))
        return Q

    def proj(self, x, a):
        a = np.asarray(a, dtype=float)
        return Tangent(x, a - x @ _sym(x.T @ a))

    def retract(self, x, v):
        self.check_base(x, v)
        if not np.any(v.vec):
            return x
        Q, R = thin_qr(x + v.vec)
        if np.any(np.diag(R) <= 1e-14 * max(1.0, np.abs(R).max())):
            raise GeometryError("QR retraction of a rank-deficient matrix")
        return Q

    def transport(self, x, d, u, y=None):
        self.check_base(x, d, u)
        if y is None:
            y = self.retract(x, d)
        return self.proj(y, u.vec)


def stiefel_geometry(n, p):
    return Stiefel(n, p)
