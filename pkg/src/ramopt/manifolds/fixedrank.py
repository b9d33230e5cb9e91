"""Embedded manifold of ``n x m`` matrices of fixed rank ``k``.

Points are stored as a thin SVD ``U diag(s) V^T``. A tangent vector at that
point is stored factored as ``(M, Up, Vp)`` and represents the ambient matrix
``U M V^T + Up V^T + U Vp^T`` with ``U^T Up = 0`` and ``V^T Vp = 0``.
Tangents are only densified in :meth:`FixedRank.to_ambient`.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..linalg import thin_qr, thin_svd
from .base import Geometry, GeometryError, Tangent


@dataclass(frozen=True, eq=False)
class FixedRankPoint:
    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def full(self):
        return (self.U * self.s) @ self.V.T

    def equals(self, other):
        return (
            np.array_equal(self.U, other.U)
            and np.array_equal(self.s, other.s)
            and np.array_equal(self.V, other.V)
        )


@dataclass(frozen=True, eq=False)
class FixedRankVector:
    M: np.ndarray
    Up: np.ndarray
    Vp: np.ndarray

    def __add__(self, o):
        return FixedRankVector(self.M + o.M, self.Up + o.Up, self.Vp + o.Vp)

    def __sub__(self, o):
        return FixedRankVector(self.M - o.M, self.Up - o.Up, self.Vp - o.Vp)

    def __neg__(self):
        return FixedRankVector(-self.M, -self.Up, -self.Vp)

    def __mul__(self, a):
        a = float(a)
        return FixedRankVector(a * self.M, a * self.Up, a * self.Vp)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return self * (1.0 / float(a))


class FixedRank(Geometry):
    """Rank-``k`` matrices in ``R^{n x m}`` with the embedded trace metric.

    The retraction is the metric projection (best rank-``k`` approximation of
    ``X + xi``); the vector transport is projection onto the target tangent
    space.
    """

    def __init__(self, n, m, k):
        if not 1 <= k <= min(n, m):
            raise ValueError(f"need 1 <= k <= min(n, m), got n={n}, m={m}, k={k}")
        self.n, self.m, self.k = int(n), int(m), int(k)
        self.dim = (self.n + self.m - self.k) * self.k
        self.name = f"fixedrank(n={self.n}, m={self.m}, k={self.k})"

    # --- points -----------------------------------------------------------------

    def check_point(self, x, tol=1e-10):
        if not isinstance(x, FixedRankPoint):
            return False
        U, s, V = x.U, x.s, x.V
        k = self.k
        if U.shape != (self.n, k) or V.shape != (self.m, k) or s.shape != (k,):
            return False
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(s)) and np.all(np.isfinite(V))):
            return False
        I = np.eye(k)
        return bool(
            np.linalg.norm(U.T @ U - I) <= tol
            and np.linalg.norm(V.T @ V - I) <= tol
            and np.all(s > 0.0)
        )

    def feasibility_error(self, x):
        """Orthonormality defect of the factors; ``inf`` if a singular value is not positive."""
        if not np.all(x.s > 0.0):
            return math.inf
        I = np.eye(self.k)
        return float(max(np.linalg.norm(x.U.T @ x.U - I), np.linalg.norm(x.V.T @ x.V - I)))

    def random_point(self, rng):
        U, _ = thin_qr(rng.standard_normal((self.n, self.k)))
        V, _ = thin_qr(rng.standard_normal((self.m, self.k)))
        s = np.sort(rng.uniform(1.0, 2.0, self.k))[::-1].copy()
        return FixedRankPoint(U, s, V)

    def from_matrix(self, A):
        """Best rank-``k`` approximation of a dense matrix, as a point."""
        U, s, V = thin_svd(A)
        k = self.k
        if s[k - 1] <= 0.0:
            raise GeometryError("matrix has rank below k")
        return FixedRankPoint(U[:, :k].copy(), s[:k].copy(), V[:, :k].copy())

    def ambient_point(self, x):
        return x.full()

    # --- tangents ---------------------------------------------------------------

    def zero(self, x):
        k = self.k
        return Tangent(x, FixedRankVector(np.zeros((k, k)), np.zeros((self.n, k)), np.zeros((self.m, k))))

    def to_ambient(self, u):
        x, t = u.base, u.vec
        return x.U @ t.M @ x.V.T + t.Up @ x.V.T + x.U @ t.Vp.T

    def inner(self, x, u, v):
        self.check_base(x, u, v)
        a, b = u.vec, v.vec
        return float(np.vdot(a.M, b.M) + np.vdot(a.Up, b.Up) + np.vdot(a.Vp, b.Vp))

    def _from_products(self, x, AV, AtU):
        """Tangent at ``x`` from ``A V`` and ``A^T U`` of an ambient matrix ``A``."""
        M = x.U.T @ AV
        return Tangent(x, FixedRankVector(M, AV - x.U @ M, AtU - x.V @ M.T))

    def proj(self, x, a):
        """Project an ambient matrix (dense or ``scipy.sparse``) onto ``T_x``."""
        AV = np.asarray(a @ x.V)
        AtU = np.asarray(a.T @ x.U)
        return self._from_products(x, AV, AtU)

    def random_tangent(self, x, rng):
        k = self.k
        vec = FixedRankVector(
            rng.standard_normal((k, k)),
            rng.standard_normal((self.n, k)),
            rng.standard_normal((self.m, k)),
        )
        # drop components outside the tangent space
        u = Tangent(x, FixedRankVector(vec.M, vec.Up - x.U @ (x.U.T @ vec.Up), vec.Vp - x.V @ (x.V.T @ vec.Vp)))
        return u / self.norm(x, u)

    # --- maps -------------------------------------------------------------------

    def retract(self, x, v):
        self.check_base(x, v)
        k, t = self.k, v.vec
        if not (np.any(t.M) or np.any(t.Up) or np.any(t.Vp)):
            return x
        if self.n >= 2 * k and self.m >= 2 * k:
            # X + xi = [U Up] [[S + M, I], [I, 0]] [V Vp]^T, so only a 2k x 2k SVD is needed
            Qa, Ra = thin_qr(np.hstack([x.U, t.Up]))
            Qb, Rb = thin_qr(np.hstack([x.V, t.Vp]))
            core = np.zeros((2 * k, 2 * k))
            core[:k, :k] = np.diag(x.s) + t.M
            core[:k, k:] = np.eye(k)
            core[k:, :k] = np.eye(k)
            Uc, s, Vc = thin_svd(Ra @ core @ Rb.T)
            Unew, Vnew = Qa @ Uc, Qb @ Vc
        else:
            Unew, s, Vnew = thin_svd(x.full() + self.to_ambient(v))
        if s[k - 1] <= 0.0:
            raise GeometryError("retraction dropped rank")
        if s.size > k and s[k - 1] - s[k] <= 1e-12 * s[0]:
            raise GeometryError(
                f"rank-{k} truncation is ambiguous: s[k-1]={s[k - 1]:.6e}, s[k]={s[k]:.6e}"
            )
        return FixedRankPoint(Unew[:, :k].copy(), s[:k].copy(), Vnew[:, :k].copy())

    def transport(self, x, d, u, y=None):
        self.check_base(x, d, u)
        if y is None:
            y = self.retract(x, d)
        t = u.vec
        VtV2 = x.V.T @ y.V
        UtU2 = x.U.T @ y.U
        # ambient A = U M V^T + Up V^T + U Vp^T, never formed
        AV2 = x.U @ (t.M @ VtV2 + t.Vp.T @ y.V) + t.Up @ VtV2
        AtU2 = x.V @ (t.M.T @ UtU2 + t.Up.T @ y.U) + t.Vp @ UtU2
        return self._from_products(y, AV2, AtU2)


def fixedrank_geometry(n, m, k):
    return FixedRank(n, m, k)
