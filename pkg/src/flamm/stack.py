"""Layer-wise feature learning by second-moment matching.

One layer solves

    min_P ||X^T - X^T P||_F^2 + g1 tr(P^T L P) + g2 tr(P^T dM^2 P)

where ``L`` holds the squared row norms of ``X`` on its diagonal and ``dM``
is the source/target second-moment gap.  Setting the gradient to zero gives
the symmetric system ``(X X^T + g1 L + g2 dM^2) P = X X^T`` which is solved
by Cholesky.  Stacking layers feeds ``P^T X`` into the next solve; the whole
map stays linear.  ``g2 = 0`` is the plain ridge variant (SFL).
"""

import struct
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateFeatureError, InvalidInputError, NumericalError
from .moments import (as_data_matrix, eigen_extremes, frobenius_sq,
                      moment_gap, row_norm_diag, spectral_norm, symmetrize)

JITTER_START = 1e-10
JITTER_MAX = 1e-6

STACK_MAGIC = b"FLAM"
STACK_VERSION = 1


@dataclass(frozen=True)
class LayerParams:
    gamma1: float
    gamma2: float = 0.0
    gamma2_scale_by_n: bool = True

    def __post_init__(self):
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise InvalidInputError(f"{name} must be finite and >= 0, got {value}")
        object.__setattr__(self, "gamma1", float(self.gamma1))
        object.__setattr__(self, "gamma2", float(self.gamma2))
        object.__setattr__(self, "gamma2_scale_by_n", bool(self.gamma2_scale_by_n))

    def effective_gamma2(self, n):
        """Weight actually applied to the moment-gap term for ``n`` samples."""
        return self.gamma2 * n if self.gamma2_scale_by_n else self.gamma2


@dataclass(frozen=True)
class DomainPair:
    source: np.ndarray
    target: np.ndarray

    @property
    def combined(self):
        return np.hstack([self.source, self.target])

    @property
    def split(self):
        return self.source.shape[1]


@dataclass(frozen=True, eq=False)
class StackModel:
    """Learned layer maps ``P_1 .. P_K`` plus the gap measured around them.

    ``per_layer_distance[k]`` is the moment-gap distance of the input to
    layer ``k + 1``; the last entry is the distance of the final output.
    """

    layers: tuple
    params: LayerParams
    per_layer_distance: tuple
    gamma2_effective: float = 0.0

    @property
    def K(self):
        return len(self.layers)

    @property
    def d(self):
        return self.layers[0].shape[0]

    def __eq__(self, other):
        if not isinstance(other, StackModel):
            return NotImplemented
        return to_bytes(self) == to_bytes(other)

    __hash__ = None


def _check_split(X, split):
    n = X.shape[1]
    if not 1 <= split < n:
        raise InvalidInputError(f"split must satisfy 1 <= n_s < n, got n_s={split}, n={n}")


def layer_system(X, split, params):
    """Return ``(A, B)`` with ``A P = B`` the stationarity system of one layer."""
    X = as_data_matrix(X)
    _check_split(X, split)
    B = symmetrize(X @ X.T)
    A = B + params.gamma1 * row_norm_diag(X)
    g2 = params.effective_gamma2(X.shape[1])
    if g2 != 0.0:
        delta, _ = moment_gap(X[:, :split], X[:, split:])
        A = A + g2 * symmetrize(delta @ delta)
    return A, B


def layer_objective(X, P, split, params):
    """Value of the single-layer objective at ``P``."""
    X = as_data_matrix(X)
    resid = X.T - X.T @ P
    value = frobenius_sq(resid)
    lam = np.einsum("ij,ij->i", X, X)
    value += params.gamma1 * float(np.sum(lam[:, None] * P * P))
    g2 = params.effective_gamma2(X.shape[1])
    if g2 != 0.0:
        delta, _ = moment_gap(X[:, :split], X[:, split:])
        value += g2 * frobenius_sq(delta @ P)
    return value


def layer_gradient(X, P, split, params):
    A, B = layer_system(X, split, params)
    return 2.0 * (A @ P) - 2.0 * B


def _cholesky_solve(A, B):
    scale = float(np.mean(np.diag(A)))
    if not scale > 0:
        scale = 1.0
    eps = 0.0
    while True:
        M = A if eps == 0.0 else A + (eps * scale) * np.eye(A.shape[0])
        try:
            factor = linalg.cho_factor(M, lower=True, check_finite=False)
            return linalg.cho_solve(factor, B, check_finite=False)
        except linalg.LinAlgError:
            pass
        eps = JITTER_START if eps == 0.0 else eps * 10.0
        if eps > JITTER_MAX * (1 + 1e-9):
            break
    cond = float(np.linalg.cond(A))
    raise NumericalError(
        f"layer system is singular even with jitter {JITTER_MAX:g} "
        f"(condition estimate {cond:.3e})", condition=cond)


def solve_layer(X, split, params):
    """Closed-form minimizer of one layer's objective.

    Parameters
    ----------
    X : array of shape (d, n)
        Combined data; the first ``split`` columns are the source domain.
    split : int
        Number of source columns ``n_s``.
    params : LayerParams

    Returns
    -------
    P : ndarray of shape (d, d)
    """
    A, B = layer_system(X, split, params)
    return _cholesky_solve(A, B)


def fit_stack(X_S, X_T, params, K):
    """Learn ``K`` layers and return ``(model, transformed DomainPair)``."""
    X_S = as_data_matrix(X_S, "X_S")
    X_T = as_data_matrix(X_T, "X_T")
    if X_S.shape[0] != X_T.shape[0]:
        raise InvalidInputError(
            f"feature dimensions differ: {X_S.shape[0]} vs {X_T.shape[0]}")
    K = int(K)
    if K < 1:
        raise InvalidInputError(f"layer count must be >= 1, got {K}")
    split = X_S.shape[1]
    X = np.hstack([X_S, X_T])
    layers = []
    distances = []
    for k in range(K):
        distances.append(moment_gap(X[:, :split], X[:, split:])[1])
        try:
            P = solve_layer(X, split, params)
        except NumericalError as exc:
            raise NumericalError(f"layer {k + 1}: {exc}", condition=exc.condition,
                                 layer=k + 1) from exc
        P.setflags(write=False)
        layers.append(P)
        X = P.T @ X
    distances.append(moment_gap(X[:, :split], X[:, split:])[1])
    model = StackModel(tuple(layers), params, tuple(distances),
                       params.effective_gamma2(X.shape[1]))
    return model, DomainPair(X[:, :split], X[:, split:])


def apply_stack(X_new, model):
    X = as_data_matrix(X_new, "X_new")
    if X.shape[0] != model.d:
        raise InvalidInputError(
            f"model expects {model.d} features, got {X.shape[0]}")
    for P in model.layers:
        X = P.T @ X
    return X


def theorem2_threshold(X):
    """Smallest ridge weight that guarantees one plain layer shrinks the gap.

    Computed as ``(lmax(X X^T) - lmin(X X^T)) / min_i ||X_i.||^2``.
    """
    X = as_data_matrix(X)
    lam = np.einsum("ij,ij->i", X, X)
    lam_min = float(lam.min())
    if not lam_min > 0:
        empty = np.flatnonzero(lam <= 0).tolist()
        raise DegenerateFeatureError(
            f"feature rows {empty[:10]} are all zero; drop empty rows before "
            "computing the threshold")
    lo, hi = eigen_extremes(symmetrize(X @ X.T))
    return max(hi - lo, 0.0) / lam_min


@dataclass(frozen=True)
class ContractionReport:
    sigma_max: float
    gap_before: float
    gap_after: float
    holds: bool


def contraction_check(X, split, gamma1, atol=1e-9):
    """Solve a plain (``gamma2 = 0``) layer and compare gaps before and after."""
    X = as_data_matrix(X)
    params = LayerParams(gamma1=gamma1, gamma2=0.0)
    P = solve_layer(X, split, params)
    delta, before = moment_gap(X[:, :split], X[:, split:])
    after = frobenius_sq(P.T @ delta @ P)
    return ContractionReport(
        sigma_max=spectral_norm(P),
        gap_before=before,
        gap_after=after,
        holds=bool(after <= before + atol),
    )


_HEADER = struct.Struct("<4sIII3dB")


def to_bytes(model):
    """Serialize a StackModel to the versioned little-endian container."""
    d, K = model.d, model.K
    p = model.params
    parts = [_HEADER.pack(STACK_MAGIC, STACK_VERSION, d, K, p.gamma1, p.gamma2,
                          model.gamma2_effective, 1 if p.gamma2_scale_by_n else 0)]
    for P in model.layers:
        parts.append(np.ascontiguousarray(P, dtype="<f8").tobytes(order="C"))
    parts.append(np.asarray(model.per_layer_distance, dtype="<f8").tobytes())
    return b"".join(parts)


def from_bytes(data):
    if len(data) < _HEADER.size:
        raise InvalidInputError("stack model blob is truncated")
    magic, version, d, K, g1, g2, g2_eff, flag = _HEADER.unpack_from(data, 0)
    if magic != STACK_MAGIC:
        raise InvalidInputError(f"bad magic {magic!r}, expected {STACK_MAGIC!r}")
    if version != STACK_VERSION:
        raise InvalidInputError(f"unsupported stack model version {version}")
    expected = _HEADER.size + 8 * (K * d * d + K + 1)
    if len(data) != expected:
        raise InvalidInputError(
            f"stack model blob has {len(data)} bytes, expected {expected}")
    offset = _HEADER.size
    layers = []
    for _ in range(K):
        P = np.frombuffer(data, dtype="<f8", count=d * d, offset=offset)
        P = P.reshape(d, d).astype(np.float64)
        P.setflags(write=False)
        layers.append(P)
        offset += 8 * d * d
    dist = np.frombuffer(data, dtype="<f8", count=K + 1, offset=offset)
    params = LayerParams(g1, g2, bool(flag))
    return StackModel(tuple(layers), params, tuple(float(v) for v in dist), float(g2_eff))


def save_stack(model, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(model))


def load_stack(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
