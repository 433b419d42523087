"""Independent reference implementations used by several test modules."""

import numpy as np


def moment_gap_matrix(X, n_s):
    XS, XT = X[:, :n_s], X[:, n_s:]
    return XS @ XS.T / XS.shape[1] - XT @ XT.T / XT.shape[1]


def reference_objective(X, P, n_s, g1, g2):
    dM = moment_gap_matrix(X, n_s)
    lam = (X * X).sum(axis=1)
    R = X.T - X.T @ P
    return float(np.sum(R * R) + g1 * np.sum(lam[:, None] * P * P)
                 + g2 * np.trace(P.T @ dM @ dM @ P))


def reference_gradient(X, P, n_s, g1, g2):
    """Gradient of the layer objective, assembled from scratch."""
    dM = moment_gap_matrix(X, n_s)
    L = np.diag((X * X).sum(axis=1))
    G = X @ X.T
    return 2 * (G @ P - G) + 2 * g1 * (L @ P) + 2 * g2 * (dM @ dM @ P)


def descent_oracle(X, n_s, g1, g2, gtol=1e-10, max_iter=5_000_000):
    """Minimize the layer objective by fixed-step gradient descent from P = 0.

    Stops when the Frobenius norm of the gradient is at most ``gtol``.
    """
    dM = moment_gap_matrix(X, n_s)
    H = X @ X.T + g1 * np.diag((X * X).sum(axis=1)) + g2 * dM @ dM
    w = np.linalg.eigvalsh(H)
    step = 1.0 / (w[-1] + w[0])  # optimal fixed step for the gradient 2(HP - G)
    P = np.zeros_like(H)
    for it in range(max_iter):
        grad = reference_gradient(X, P, n_s, g1, g2)
        if np.linalg.norm(grad) <= gtol:
            return P, it
        P = P - step * grad
    raise RuntimeError("descent oracle did not converge")


def grid_search_optimum(X, y, reg_c=1.0, loss="hinge"):
    """Minimize the primal over (w1, w2, b) by successively refined grids.

    The coarse grid spans [-5, 5]^3 at step 0.1; each refinement re-centers on
    the incumbent with a window of forty steps of the new size, down to 1e-5.
    """
    def objectives(W1, W2, B):
        scores = W1[..., None] * X[0] + W2[..., None] * X[1] + B[..., None]
        slack = np.maximum(1.0 - y * scores, 0.0)
        if loss == "squared_hinge":
            slack = slack ** 2
        return 0.5 * (W1 ** 2 + W2 ** 2) + reg_c * slack.sum(axis=-1)

    center = np.zeros(3)
    half, step = 5.0, 0.1
    best = None
    while step >= 1e-5 * 0.999:
        axes = [np.arange(c - half, c + half + step / 2, step) for c in center]
        W1, W2, B = np.meshgrid(*axes, indexing="ij")
        vals = objectives(W1, W2, B)
        k = np.unravel_index(np.argmin(vals), vals.shape)
        center = np.array([W1[k], W2[k], B[k]])
        best = float(vals[k])
        step /= 10
        half = 40 * step
    return best, center
