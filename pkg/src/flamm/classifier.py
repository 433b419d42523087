"""Deterministic L2-regularized linear SVM.

Minimizes ``0.5 ||w||^2 + C sum_i loss(y_i, w.x_i + b)`` with an
unpenalized intercept.  The dual carries the equality constraint
``sum_i y_i a_i = 0``, so it is solved by two-variable (SMO) steps with
second-order working-set selection on a precomputed Gram matrix.  No random
permutation is used, so training is reproducible bit for bit.
"""

import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateLabelsError, InvalidInputError

LOSSES = ("hinge", "squared_hinge")

MODEL_MAGIC = b"LMDL"
MODEL_VERSION = 1

_TAU = 1e-12


@dataclass(frozen=True)
class LabeledSet:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1:
            raise InvalidInputError(f"X must be a d x n matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("X contains non-finite entries")
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if y.shape[0] != X.shape[1]:
            raise InvalidInputError(
                f"{y.shape[0]} labels for {X.shape[1]} samples")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise InvalidInputError("labels must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return LabeledSet(self.X[:, idx], self.y[idx])


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    reg_c: float = 1.0
    loss: str = "hinge"

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != self.weights.shape[0]:
            raise InvalidInputError(
                f"model expects {self.weights.shape[0]} features, got shape {X.shape}")
        return self.weights @ X + self.bias


def _check_loss(loss):
    if loss not in LOSSES:
        raise InvalidInputError(f"loss must be one of {LOSSES}, got {loss!r}")


def primal_objective(w, b, X, y, reg_c=1.0, loss="hinge"):
    _check_loss(loss)
    margins = 1.0 - y * (w @ X + b)
    slack = np.maximum(margins, 0.0)
    if loss == "squared_hinge":
        slack = slack * slack
    return 0.5 * float(w @ w) + reg_c * float(np.sum(slack))


def objective(model, data):
    return primal_objective(model.weights, model.bias, data.X, data.y,
                            model.reg_c, model.loss)


@njit(cache=True)
def _bias(alpha, grad, y, upper):
    total = 0.0
    count = 0
    hi = -np.inf
    lo = np.inf
    for t in range(alpha.shape[0]):
        v = -y[t] * grad[t]
        if 0.0 < alpha[t] < upper:
            total += v
            count += 1
        if (y[t] > 0 and alpha[t] < upper) or (y[t] < 0 and alpha[t] > 0):
            hi = max(hi, v)
        if (y[t] < 0 and alpha[t] < upper) or (y[t] > 0 and alpha[t] > 0):
            lo = min(lo, v)
    if count > 0:
        return total / count
    if not np.isfinite(hi):
        hi = lo
    if not np.isfinite(lo):
        lo = hi
    return (hi + lo) / 2.0


@njit(cache=True)
def _duality_gap(alpha, grad, y, C, ridge, squared, upper):
    # y_t w.x_t = grad_t + 1 - ridge * alpha_t, where ridge = 1/(2C) or 0
    b = _bias(alpha, grad, y, upper)
    wnorm = 0.0
    slack = 0.0
    asum = 0.0
    asq = 0.0
    for t in range(alpha.shape[0]):
        ywx = grad[t] + 1.0 - ridge * alpha[t]
        wnorm += alpha[t] * ywx
        m = 1.0 - ywx - y[t] * b
        if m > 0.0:
            slack += m * m if squared else m
        asum += alpha[t]
        asq += alpha[t] * alpha[t]
    primal = 0.5 * wnorm + C * slack
    dual = asum - 0.5 * wnorm
    if squared:
        dual -= asq / (4.0 * C)
    return primal - dual


@njit(cache=True)
def _smo(K, y, alpha, grad, C, ridge, squared, upper, gap_tol, max_iter):
    n = alpha.shape[0]
    check_every = max(n, 10)
    it = 0
    while it < max_iter:
        # i: most violating index in the "up" set
        i = -1
        m_up = -np.inf
        m_low = np.inf
        for t in range(n):
            v = -y[t] * grad[t]
            if (y[t] > 0 and alpha[t] < upper) or (y[t] < 0 and alpha[t] > 0):
                if v > m_up:
                    m_up = v
                    i = t
            if (y[t] < 0 and alpha[t] < upper) or (y[t] > 0 and alpha[t] > 0):
                if v < m_low:
                    m_low = v
        if i < 0 or m_up - m_low <= 1e-12:
            break
        # j: second-order selection among "low" candidates
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] < 0 and alpha[t] < upper) or (y[t] > 0 and alpha[t] > 0):
                b = m_up + y[t] * grad[t]
                if b > 0.0:
                    a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a <= 0.0:
                        a = _TAU
                    score = -(b * b) / a
                    if score < best:
                        best = score
                        j = t
        if j < 0:
            break
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 0.0:
            a = _TAU
        delta = (m_up + y[j] * grad[j]) / a
        delta = min(delta, upper - alpha[i] if y[i] > 0 else alpha[i])
        delta = min(delta, upper - alpha[j] if y[j] < 0 else alpha[j])
        alpha[i] += y[i] * delta
        alpha[j] -= y[j] * delta
        for t in range(n):
            grad[t] += delta * y[t] * (K[i, t] - K[j, t])
        it += 1
        if it % check_every == 0:
            if _duality_gap(alpha, grad, y, C, ridge, squared, upper) <= gap_tol:
                break
    return it


def train(data, reg_c=1.0, loss="hinge", tol=1e-6, max_epochs=10_000):
    """Fit a linear SVM on a LabeledSet.

    Stops once the duality gap is at most ``tol * n`` or after
    ``max_epochs * n`` pair updates.
    """
    _check_loss(loss)
    if not (np.isfinite(reg_c) and reg_c > 0):
        raise InvalidInputError(f"reg_c must be positive, got {reg_c}")
    if not isinstance(data, LabeledSet):
        raise InvalidInputError("train expects a LabeledSet")
    X, y = data.X, data.y
    if data.n == 0:
        raise InvalidInputError("cannot train on an empty set")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DegenerateLabelsError("training data must contain both classes")
    # the dual only sees y through y_i y_j, so fix the orientation to make
    # training on -y return exactly (-w, -b)
    flip = y[0] < 0
    if flip:
        y = -y
    n = X.shape[1]
    C = float(reg_c)
    squared = loss == "squared_hinge"
    ridge = 0.5 / C if squared else 0.0
    upper = np.inf if squared else C

    K = X.T @ X
    K[np.diag_indices(n)] += ridge
    alpha = np.zeros(n)
    grad = -np.ones(n)
    _smo(K, y, alpha, grad, C, ridge, squared, upper, tol * n, max_epochs * n)
    w = X @ (alpha * y)
    b = float(_bias(alpha, grad, y, upper))
    if flip:
        w, b = -w, -b
    return LinearModel(weights=w, bias=b, reg_c=C, loss=loss)


def predict(model, X):
    """Labels in {-1, +1}; a decision value of exactly zero maps to +1."""
    scores = model.decision_function(X)
    return np.where(scores >= 0, 1.0, -1.0)


def accuracy(model, data):
    if data.n == 0:
        raise InvalidInputError("cannot score an empty set")
    return float(np.mean(predict(model, data.X) == data.y))


_HEADER = struct.Struct("<4sIIBdd")
_LOSS_TAGS = {"hinge": 0, "squared_hinge": 1}


def to_bytes(model):
    w = np.ascontiguousarray(model.weights, dtype="<f8")
    head = _HEADER.pack(MODEL_MAGIC, MODEL_VERSION, w.shape[0],
                        _LOSS_TAGS[model.loss], model.reg_c, model.bias)
    return head + w.tobytes()


def from_bytes(data):
    if len(data) < _HEADER.size:
        raise InvalidInputError("linear model blob is truncated")
    magic, version, d, tag, reg_c, bias = _HEADER.unpack_from(data, 0)
    if magic != MODEL_MAGIC:
        raise InvalidInputError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise InvalidInputError(f"unsupported linear model version {version}")
    if len(data) != _HEADER.size + 8 * d:
        raise InvalidInputError("linear model blob has the wrong length")
    losses = {v: k for k, v in _LOSS_TAGS.items()}
    if tag not in losses:
        raise InvalidInputError(f"unknown loss tag {tag}")
    w = np.frombuffer(data, dtype="<f8", count=d, offset=_HEADER.size).astype(np.float64)
    return LinearModel(weights=w, bias=float(bias), reg_c=float(reg_c), loss=losses[tag])


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(model))


def load_model(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
