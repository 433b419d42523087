"""PCA and CORAL reference representations."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError
from .moments import as_data_matrix, symmetrize


def covariance(X):
    """Feature covariance of a ``d x n`` matrix, normalized by ``n - 1``."""
    X = as_data_matrix(X)
    n = X.shape[1]
    centered = X - X.mean(axis=1, keepdims=True)
    return symmetrize(centered @ centered.T) / max(n - 1, 1)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def k(self):
        return self.basis.shape[1]

    @property
    def d(self):
        return self.basis.shape[0]


def pca_fit(X, k):
    """Top-``k`` principal directions of the pooled samples in ``X``.

    Each basis column is flipped so its largest-magnitude entry is positive.
    """
    X = as_data_matrix(X)
    d = X.shape[0]
    k = int(k)
    if not 1 <= k <= d:
        raise InvalidInputError(f"k must satisfy 1 <= k <= d={d}, got {k}")
    mean = X.mean(axis=1)
    w, V = np.linalg.eigh(covariance(X))
    order = np.argsort(w, kind="stable")[::-1][:k]
    w = w[order]
    V = V[:, order]
    pivot = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    return PcaModel(mean=mean, basis=V * signs, eigenvalues=w)


def pca_transform(X, model):
    X = as_data_matrix(X)
    if X.shape[0] != model.d:
        raise InvalidInputError(f"model expects {model.d} features, got {X.shape[0]}")
    return model.basis.T @ (X - model.mean[:, None])


def _sym_power(C, power, what):
    w, V = np.linalg.eigh(symmetrize(C))
    scale = max(float(np.max(np.abs(w))), 1.0)
    if np.any(w < -1e-10 * scale):
        raise NumericalError(f"{what} is not positive semidefinite "
                             f"(smallest eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    if power < 0:
        if np.any(w <= 1e-12 * scale):
            cond = float(w.max() / w.min()) if w.min() > 0 else float("inf")
            raise NumericalError(
                f"{what} is singular; increase the CORAL regularization",
                condition=cond)
    return symmetrize((V * w ** power) @ V.T)


@dataclass(frozen=True)
class CoralModel:
    whiten: np.ndarray
    recolor: np.ndarray
    lam: float
    source_mean: np.ndarray
    target_mean: np.ndarray

    def transform_source(self, X):
        X = as_data_matrix(X)
        if X.shape[0] != self.whiten.shape[0]:
            raise InvalidInputError(
                f"model expects {self.whiten.shape[0]} features, got {X.shape[0]}")
        centered = X - self.source_mean[:, None]
        return self.recolor @ (self.whiten @ centered) + self.target_mean[:, None]


def coral_align(X_S, X_T, lam=1.0):
    """Whiten the source with its covariance, recolor with the target's.

    Returns the fitted model and the aligned source; the target is left as is.
    """
    X_S = as_data_matrix(X_S, "X_S")
    X_T = as_data_matrix(X_T, "X_T")
    if X_S.shape[0] != X_T.shape[0]:
        raise InvalidInputError(
            f"feature dimensions differ: {X_S.shape[0]} vs {X_T.shape[0]}")
    if not (np.isfinite(lam) and lam >= 0):
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")
    eye = np.eye(X_S.shape[0])
    whiten = _sym_power(covariance(X_S) + lam * eye, -0.5, "source covariance")
    recolor = _sym_power(covariance(X_T) + lam * eye, 0.5, "target covariance")
    model = CoralModel(whiten=whiten, recolor=recolor, lam=float(lam),
                       source_mean=X_S.mean(axis=1), target_mean=X_T.mean(axis=1))
    return model, model.transform_source(X_S)
