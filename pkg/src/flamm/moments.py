"""Second moments, moment gaps and the small spectral helpers built on them.

Data matrices are ``d x n`` float arrays whose columns are samples.
"""

import numpy as np

from .errors import InvalidInputError

SYMMETRY_RTOL = 1e-10


def as_data_matrix(X, name="X"):
    """Validate and return ``X`` as a 2-D float64 array with finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D array, got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidInputError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return X


def is_symmetric(A, rtol=SYMMETRY_RTOL):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    if A.size == 0:
        return True
    scale = 1.0 + np.max(np.abs(A))
    return bool(np.max(np.abs(A - A.T)) <= rtol * scale)


def symmetrize(A):
    A = np.asarray(A, dtype=np.float64)
    return (A + A.T) / 2.0


def second_moment(X):
    """Return the uncentered second moment ``X @ X.T / n``.

    The product is symmetrized so the result is exactly symmetric.
    """
    X = as_data_matrix(X)
    n = X.shape[1]
    return symmetrize(X @ X.T) / n


def moment_gap(X_S, X_T):
    """Difference of source and target second moments and its size.

    Returns
    -------
    delta : ndarray of shape (d, d)
        ``second_moment(X_S) - second_moment(X_T)``.
    distance : float
        Squared Frobenius norm of ``delta``; the domain distance.
    """
    X_S = as_data_matrix(X_S, "X_S")
    X_T = as_data_matrix(X_T, "X_T")
    if X_S.shape[0] != X_T.shape[0]:
        raise InvalidInputError(
            f"feature dimensions differ: {X_S.shape[0]} vs {X_T.shape[0]}")
    delta = second_moment(X_S) - second_moment(X_T)
    return delta, frobenius_sq(delta)


def frobenius_sq(A):
    A = np.asarray(A, dtype=np.float64)
    return float(np.sum(A * A))


def row_norm_diag(X):
    """Diagonal matrix of squared row norms of ``X``."""
    X = as_data_matrix(X)
    return np.diag(np.einsum("ij,ij->i", X, X))


def eigen_extremes(A):
    """Smallest and largest eigenvalue of a symmetric matrix."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix contains non-finite entries")
    if not is_symmetric(A):
        raise InvalidInputError("matrix is not symmetric")
    w = np.linalg.eigvalsh(symmetrize(A))
    return float(w[0]), float(w[-1])


def spectral_norm(A):
    """Largest singular value of ``A``."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.size == 0:
        return 0.0
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix contains non-finite entries")
    return float(np.linalg.svd(A, compute_uv=False)[0])
