import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given, settings, strategies as st

from fcs import numerics
from fcs.errors import NumericsError, SingularResolventError

from conftest import random_hurwitz

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 8)


def test_spectrum_sorted_and_conjugate_closed():
    M = np.array([[0.0, 1.0, 0.0], [-2.0, -0.5, 0.0], [0.0, 0.0, -3.0]])
    lam = numerics.spectrum(M)
    assert lam[0] == -3.0
    assert lam[1] == np.conj(lam[2])
    assert np.all(np.diff(lam.real) >= 0)


def test_is_hurwitz_margin():
    M = np.diag([-1.0, -1e-9])
    assert numerics.is_hurwitz(M)
    assert not numerics.is_hurwitz(M, margin=1e-8)
    assert not numerics.is_hurwitz(np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_lyapunov_matches_reference(seed, n):
    rng = np.random.default_rng(seed)
    A = random_hurwitz(rng, n)
    X = rng.standard_normal((n, n))
    Q = X @ X.T
    P = numerics.lyapunov_solve(A, Q)
    ref = sl.solve_continuous_lyapunov(A.T, -Q)
    assert np.allclose(P, ref, rtol=1e-8, atol=1e-10 * np.abs(ref).max())
    assert np.linalg.norm(A.T @ P + P @ A + Q) <= 1e-10 * np.linalg.norm(Q)
    assert np.array_equal(P, P.T)


def test_lyapunov_rejects_unstable():
    with pytest.raises(NumericsError):
        numerics.lyapunov_solve(np.eye(2), np.eye(2))


def test_lyapunov_scalar_closed_form():
    # 2 a p + q = 0
    P = numerics.lyapunov_solve(np.array([[-2.0]]), np.array([[3.0]]))
    assert P[0, 0] == pytest.approx(0.75, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 6), st.integers(1, 3))
def test_care_matches_reference(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    Q = np.eye(n) * rng.uniform(0.1, 2.0)
    R = np.diag(rng.uniform(0.2, 3.0, m))
    try:
        ref = sl.solve_continuous_are(A, B, Q, R)
    except (np.linalg.LinAlgError, ValueError):
        return
    if np.linalg.cond(ref) > 1e8:
        return
    P, K = numerics.care_solve(A, B, Q, R)
    assert np.allclose(P, ref, rtol=1e-7, atol=1e-9 * np.abs(ref).max())
    assert numerics.care_residual(A, B, Q, R, P) <= numerics.CARE_RTOL
    assert numerics.is_hurwitz(A - B @ K)


def test_care_scalar_closed_form():
    # a = 1, b = 1, q = 1, r = 1: p = 1 + sqrt(2)
    P, K = numerics.care_solve(np.array([[1.0]]), np.array([[1.0]]), np.eye(1), np.eye(1))
    assert P[0, 0] == pytest.approx(1 + np.sqrt(2), rel=1e-12)
    assert K[0, 0] == pytest.approx(1 + np.sqrt(2), rel=1e-12)


def test_care_rejects_indefinite_r():
    with pytest.raises(NumericsError):
        numerics.care_solve(-np.eye(2), np.eye(2), np.eye(2), -np.eye(2))


def test_stabilizing_gain_unstable_chain():
    A = np.array([[0.0, 1.0], [3.0, 0.5]])
    B = np.array([[0.0], [1.0]])
    K = numerics.stabilizing_gain(A, B)
    assert numerics.is_hurwitz(A - B @ K)


@settings(max_examples=25, deadline=None)
@given(seeds, dims, st.floats(1e-2, 1e3))
def test_freq_response_matches_eigendecomposition(seed, n, w):
    rng = np.random.default_rng(seed)
    A = random_hurwitz(rng, n)
    B = rng.standard_normal((n, 2))
    lam, V = np.linalg.eig(A)
    ref = V @ np.diag(1.0 / (1j * w - lam)) @ np.linalg.solve(V, B)
    got = numerics.freq_response_solve(A, B, w)
    assert np.allclose(got, ref, rtol=1e-8, atol=1e-10)


def test_freq_response_singular_on_axis():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(SingularResolventError) as info:
        numerics.freq_response_solve(A, np.eye(2), 1.0)
    assert info.value.omega == 1.0


def test_min_singular_value():
    assert numerics.min_singular_value(np.diag([3.0, 0.5])) == pytest.approx(0.5)
