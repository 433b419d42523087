"""Planted domain-shift benchmark with a known Bayes rule.

Features come in three blocks: ``n_specific`` source-only features,
``n_specific`` target-only features and ``n_shared`` pivots.  Every active
feature loads on a latent score ``z = y * (1 + |g| / 2)`` plus isotropic
Gaussian noise, so ``|z| >= 1`` separates the classes in latent space.  The
target is the source generator followed by an orthogonal map that swaps the
two specific blocks, i.e. the target covariance is a rotation of the source
covariance.  Within a domain the Bayes classifier is ``sign(loading . x)``.
"""

from dataclasses import dataclass

import numpy as np

from .classifier import LabeledSet


@dataclass(frozen=True)
class PlantedShift:
    source: LabeledSet
    target: LabeledSet
    rotation: np.ndarray
    source_loading: np.ndarray
    target_loading: np.ndarray

    def bayes_predict(self, X, domain="target"):
        w = self.target_loading if domain == "target" else self.source_loading
        return np.where(w @ X >= 0, 1.0, -1.0)


def block_swap(n_specific, n_shared):
    a = n_specific
    d = 2 * a + n_shared
    Q = np.eye(d)
    Q[:2 * a, :2 * a] = 0.0
    Q[:a, a:2 * a] = np.eye(a)
    Q[a:2 * a, :a] = np.eye(a)
    return Q


def planted_shift(seed, n_source=200, n_target=200, n_specific=3, n_shared=4,
                  specific_loading=1.0, shared_loading=0.35, noise=1.0):
    rng = np.random.default_rng(seed)
    a, c = n_specific, n_shared
    loading = np.concatenate([np.full(a, specific_loading), np.zeros(a),
                              np.full(c, shared_loading)])
    active = loading != 0

    def draw(n):
        y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        z = y * (1.0 + 0.5 * np.abs(rng.standard_normal(n)))
        X = np.zeros((loading.shape[0], n))
        X[active] = loading[active, None] * z + noise * rng.standard_normal((int(active.sum()), n))
        return X, y

    Q = block_swap(a, c)
    Xs, ys = draw(n_source)
    Xt, yt = draw(n_target)
    return PlantedShift(
        source=LabeledSet(Xs, ys),
        target=LabeledSet(Q @ Xt, yt),
        rotation=Q,
        source_loading=loading,
        target_loading=Q @ loading,
    )
