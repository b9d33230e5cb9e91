"""Dense linear-algebra kernels.

Every matrix factorization used elsewhere in the package goes through one of
the four functions here, so the numeric backend (currently LAPACK via numpy)
is swappable in one place.
"""

import numpy as np

__all__ = [
    "NotPositiveDefiniteError",
    "thin_qr",
    "sym_eig",
    "spd_fn",
    "thin_svd",
]

_SPD_FUNCS = {
    "log": np.log,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "inv_sqrt": lambda w: 1.0 / np.sqrt(w),
}


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix function needs a positive definite argument."""

    def __init__(self, lambda_min, message=None):
        self.lambda_min = float(lambda_min)
        super().__init__(message or f"matrix is not positive definite (lambda_min={lambda_min:.3e})")


def _as_finite(A, name="A"):
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def thin_qr(A):
    """Thin QR factorization with a nonnegative diagonal in ``R``.

    Parameters
    ----------
    A : array_like, shape (m, n) with m >= n

    Returns
    -------
    Q : ndarray, shape (m, n)
        Orthonormal columns.
    R : ndarray, shape (n, n)
        Upper triangular with ``diag(R) >= 0``. Rank deficiency shows up as
        zero diagonal entries rather than an exception.
    """
    A = _as_finite(A)
    if A.ndim != 2:
        raise ValueError(f"thin_qr expects a 2-D array, got shape {A.shape}")
    m, n = A.shape
    if m < n:
        raise ValueError(f"thin_qr needs rows >= cols, got {A.shape}")
    Q, R = np.linalg.qr(A, mode="reduced")
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    Q = Q * signs
    R = signs[:, None] * R
    return Q, R


def sym_eig(S):
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending.

    The input is symmetrized before factorization.
    """
    S = _as_finite(S, "S")
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"sym_eig expects a square matrix, got shape {S.shape}")
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return w, V


def spd_fn(S, f):
    """Apply a scalar function to a symmetric matrix through its spectrum.

    ``f`` is one of ``"log"``, ``"exp"``, ``"sqrt"``, ``"inv_sqrt"``. For every
    choice except ``"exp"`` the matrix must be positive definite, meaning
    ``lambda_min > 1e-14 * lambda_max``; otherwise :class:`NotPositiveDefiniteError`
    is raised carrying ``lambda_min``.
    """
    try:
        func = _SPD_FUNCS[f]
    except KeyError:
        raise ValueError(f"unknown spectral function {f!r}; expected one of {sorted(_SPD_FUNCS)}") from None
    w, V = sym_eig(S)
    if f != "exp":
        lam_max = w[-1] if w.size else 0.0
        if w.size and (w[0] <= 0.0 or w[0] <= 1e-14 * lam_max):
            raise NotPositiveDefiniteError(w[0])
    out = (V * func(w)) @ V.T
    return 0.5 * (out + out.T)


def thin_svd(A):
    """Thin SVD ``A = U diag(s) V^T`` with ``s`` descending.

    Returns ``(U, s, V)``; note ``V`` is returned untransposed, shape (n, r).
    """
    A = _as_finite(A)
    if A.ndim != 2:
        raise ValueError(f"thin_svd expects a 2-D array, got shape {A.shape}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T
