import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flamm.errors import InvalidInputError
from flamm.moments import (eigen_extremes, moment_gap, row_norm_diag, second_moment,
                           spectral_norm)


def naive_second_moment(X):
    d, n = X.shape
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(n):
                s += X[i, k] * X[j, k]
            out[i, j] = s / n
    return out


def char_poly_extremes(A):
    """Extreme eigenvalues from the Faddeev-LeVerrier characteristic polynomial."""
    n = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(A @ M) / k)
    roots = np.roots(coeffs).real
    # polish each root with Newton steps on the polynomial
    dcoeffs = np.polyder(coeffs)
    for _ in range(20):
        roots = roots - np.polyval(coeffs, roots) / np.polyval(dcoeffs, roots)
    return roots.min(), roots.max()


def test_second_moment_identity():
    np.testing.assert_array_equal(second_moment(np.eye(2)), 0.5 * np.eye(2))


def test_second_moment_single_column():
    np.testing.assert_array_equal(second_moment(np.array([[1.0], [0.0]])),
                                  [[1.0, 0.0], [0.0, 0.0]])


def test_second_moment_matches_triple_loop(rng):
    X = rng.standard_normal((4, 7))
    np.testing.assert_allclose(second_moment(X), naive_second_moment(X), rtol=0, atol=1e-12)


def test_second_moment_rejects_empty():
    with pytest.raises(InvalidInputError):
        second_moment(np.zeros((3, 0)))


def test_second_moment_zero_matrix_is_legal():
    np.testing.assert_array_equal(second_moment(np.zeros((3, 4))), np.zeros((3, 3)))


def test_second_moment_is_psd_and_symmetric(rng):
    for _ in range(100):
        d, n = rng.integers(1, 9), rng.integers(1, 12)
        M = second_moment(rng.standard_normal((d, n)))
        np.testing.assert_array_equal(M, M.T)
        assert np.linalg.eigvalsh(M).min() >= -1e-10


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(-1e3, 1e3)),
       st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3))
def test_second_moment_scales_quadratically(X, c):
    lhs = second_moment(c * X)
    rhs = c * c * second_moment(X)
    scale = max(np.abs(rhs).max(), 1e-300)
    assert np.abs(lhs - rhs).max() <= 1e-10 * scale


def test_moment_gap_identical_domains(rng):
    X = rng.standard_normal((3, 6))
    delta, dist = moment_gap(X, X)
    np.testing.assert_array_equal(delta, np.zeros((3, 3)))
    assert dist == 0.0


def test_moment_gap_hand_computed():
    delta, dist = moment_gap(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))
    np.testing.assert_array_equal(delta, np.diag([1.0, -1.0]))
    assert dist == 2.0


def test_moment_gap_matches_elementwise_sum(rng):
    X_S = rng.standard_normal((5, 20))
    X_T = rng.standard_normal((5, 20))
    _, dist = moment_gap(X_S, X_T)
    total = 0.0
    for i in range(5):
        for j in range(5):
            ms = sum(X_S[i, k] * X_S[j, k] for k in range(20)) / 20
            mt = sum(X_T[i, k] * X_T[j, k] for k in range(20)) / 20
            total += (ms - mt) ** 2
    assert abs(dist - total) <= 1e-12 * max(1.0, total)


def test_moment_gap_antisymmetric(rng):
    X_S, X_T = rng.standard_normal((4, 9)), rng.standard_normal((4, 13))
    d1, g1 = moment_gap(X_S, X_T)
    d2, g2 = moment_gap(X_T, X_S)
    np.testing.assert_array_equal(d1, -d2)
    assert g1 == g2


def test_moment_gap_dimension_mismatch(rng):
    with pytest.raises(InvalidInputError):
        moment_gap(rng.standard_normal((3, 4)), rng.standard_normal((4, 4)))


def test_row_norm_diag_identity():
    np.testing.assert_array_equal(row_norm_diag(np.eye(2)), np.eye(2))


def test_row_norm_diag_zero_row():
    X = np.array([[1.0, 2.0], [0.0, 0.0], [3.0, -1.0]])
    L = row_norm_diag(X)
    assert L[1, 1] == 0.0
    assert np.count_nonzero(L - np.diag(np.diag(L))) == 0


def test_row_norm_diag_matches_row_dot(rng):
    X = rng.standard_normal((3, 5))
    expected = np.diag([float(np.dot(X[i], X[i])) for i in range(3)])
    np.testing.assert_allclose(row_norm_diag(X), expected, rtol=0, atol=1e-12)


def test_eigen_extremes_identity():
    assert eigen_extremes(np.eye(3)) == (1.0, 1.0)


def test_eigen_extremes_diagonal():
    lo, hi = eigen_extremes(np.diag([2.0, -1.0, 5.0]))
    assert lo == pytest.approx(-1.0, abs=1e-14)
    assert hi == pytest.approx(5.0, abs=1e-14)


def test_eigen_extremes_matches_characteristic_polynomial(rng):
    for _ in range(20):
        B = rng.standard_normal((6, 6))
        A = (B + B.T) / 2
        lo, hi = eigen_extremes(A)
        olo, ohi = char_poly_extremes(A)
        assert lo == pytest.approx(olo, rel=1e-8, abs=1e-8)
        assert hi == pytest.approx(ohi, rel=1e-8, abs=1e-8)


def test_eigen_extremes_rejects_nonsymmetric():
    with pytest.raises(InvalidInputError):
        eigen_extremes(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eigen_extremes_is_deterministic(rng):
    B = rng.standard_normal((7, 7))
    A = B + B.T
    assert eigen_extremes(A) == eigen_extremes(A.copy())


def test_spectral_norm_basic():
    assert spectral_norm(np.zeros((3, 3))) == 0.0
    assert spectral_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0, abs=1e-14)


def test_spectral_norm_matches_gram_eigenvalue(rng):
    for _ in range(10):
        A = rng.standard_normal((4, 4))
        _, lam_max = eigen_extremes(A.T @ A)
        assert spectral_norm(A) == pytest.approx(np.sqrt(lam_max), rel=1e-8)


def test_weyl_inequality(rng):
    for _ in range(200):
        d = int(rng.integers(1, 9))
        A = rng.standard_normal((d, d))
        A = A + A.T
        B = rng.standard_normal((d, d))
        B = B + B.T
        la = np.linalg.eigvalsh(A)
        lab = np.linalg.eigvalsh(A + B)
        bmin, bmax = eigen_extremes(B)
        assert np.all(la + bmin <= lab + 1e-9)
        assert np.all(lab <= la + bmax + 1e-9)


def test_trace_monotone_under_loewner_order(rng):
    for _ in range(200):
        d = int(rng.integers(1, 9))
        G = rng.standard_normal((d, d))
        A = G @ G.T
        B = rng.standard_normal((d, d))
        B = B + B.T
        H = rng.standard_normal((d, int(rng.integers(1, d + 1))))
        C = B + H @ H.T
        assert np.trace(A @ B) <= np.trace(A @ C) + 1e-9
