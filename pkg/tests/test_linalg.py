import numpy as np
import pytest
import scipy.linalg

from transformer_filter.linalg import (
    NotStableError,
    psd_sqrt,
    solve_discrete_lyapunov,
    spectral_norm,
    spectral_radius,
    stable_factorization,
)


def test_spectral_norm_identity():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-14)


def test_spectral_norm_diagonal():
    assert spectral_norm(np.diag([2.0, 1.0])) == pytest.approx(2.0, abs=1e-14)


def test_spectral_norm_matches_svd_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        mat = rng.standard_normal((5, 5))
        top = np.linalg.svd(mat, compute_uv=False)[0]
        assert spectral_norm(mat) == pytest.approx(top, rel=1e-10)


def test_spectral_norm_submultiplicative():
    rng = np.random.default_rng(12)
    for _ in range(20):
        a = rng.standard_normal((4, 4))
        b = rng.standard_normal((4, 4))
        assert spectral_norm(a @ b) <= spectral_norm(a) * spectral_norm(b) * (1 + 1e-12)


def test_spectral_radius_diagonal():
    assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9, abs=1e-12)


def test_spectral_radius_scaled_rotation():
    theta = 0.83
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    assert spectral_radius(0.7 * rot) == pytest.approx(0.7, rel=1e-8)


def test_spectral_radius_nilpotent():
    assert spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.0


def test_spectral_radius_rejects_nonsquare():
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))


def test_lyapunov_scalar_geometric_series():
    p = solve_discrete_lyapunov(np.array([[0.5]]), np.array([[1.0]]))
    assert p[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-13)


def test_lyapunov_zero_map_returns_rhs():
    q = np.array([[2.0, 0.5], [0.5, 1.0]])
    p = solve_discrete_lyapunov(np.zeros((2, 2)), q)
    assert np.allclose(p, q, rtol=0, atol=1e-15)


def test_lyapunov_residual_and_scipy_oracle():
    rng = np.random.default_rng(13)
    for _ in range(10):
        a = rng.standard_normal((4, 4))
        a *= 0.8 / spectral_radius(a)
        half = rng.standard_normal((4, 4))
        q = half.T @ half
        p = solve_discrete_lyapunov(a, q)
        assert spectral_norm(p - a.T @ p @ a - q) <= 1e-10 * spectral_norm(q)
        # scipy solves P = A P A' + Q; transpose A to match our convention
        oracle = scipy.linalg.solve_discrete_lyapunov(a.T, q)
        assert np.allclose(p, oracle, rtol=1e-10, atol=1e-12)
        assert np.allclose(p, p.T, rtol=0, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(p)) >= -1e-10 * spectral_norm(p)


def test_lyapunov_rejects_unstable():
    with pytest.raises(NotStableError, match="not stable"):
        solve_discrete_lyapunov(np.array([[1.0]]), np.array([[1.0]]))


def test_lyapunov_rejects_marginal_radius():
    with pytest.raises(NotStableError):
        solve_discrete_lyapunov(np.array([[1.0 - 1e-12]]), np.array([[1.0]]))


def test_lyapunov_rejects_nonsymmetric_rhs():
    with pytest.raises(ValueError, match="symmetric"):
        solve_discrete_lyapunov(np.array([[0.5, 0.0], [0.0, 0.5]]),
                                np.array([[1.0, 3.0], [0.0, 1.0]]))


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(14)
    half = rng.standard_normal((4, 4))
    mat = half.T @ half
    root = psd_sqrt(mat)
    assert np.allclose(root @ root, mat, rtol=1e-10, atol=1e-12)
    assert np.allclose(root, root.T, rtol=0, atol=1e-12)


def test_factorization_contraction_short_circuit():
    a = np.array([[0.3, 0.2], [0.0, 0.4]])
    assert spectral_norm(a) < 1
    fact = stable_factorization(a)
    assert np.array_equal(fact.basis, np.eye(2))
    assert np.array_equal(fact.contraction, a)
    assert fact.conditioning == 1.0
    assert fact.contraction_norm == spectral_norm(a)


def test_factorization_scalar():
    fact = stable_factorization(np.array([[0.9]]))
    assert fact.contraction_norm == pytest.approx(0.9, abs=1e-14)
    assert fact.conditioning == pytest.approx(1.0, abs=1e-12)


def test_factorization_large_norm_small_radius():
    a = np.array([[0.5, 10.0], [0.0, 0.5]])
    assert spectral_norm(a) > 1
    fact = stable_factorization(a)
    assert fact.contraction_norm < 1
    assert spectral_norm(fact.reconstruct() - a) <= 1e-9 * spectral_norm(a)
    assert fact.conditioning >= 1.0


def test_factorization_random_invariants_and_power_bound():
    rng = np.random.default_rng(15)
    for _ in range(100):
        size = int(rng.integers(1, 9))
        a = rng.standard_normal((size, size))
        rho = spectral_radius(a)
        if rho < 1e-12:
            continue
        a *= rng.uniform(0.3, 0.95) / rho
        fact = stable_factorization(a)
        assert fact.contraction_norm < 1
        assert fact.conditioning >= 1.0 - 1e-12
        assert spectral_norm(a - fact.reconstruct()) <= 1e-9 * spectral_norm(a)
        power = np.eye(size)
        for k in range(1, 51):
            power = power @ a
            assert spectral_norm(power) <= fact.power_bound(k) * (1 + 1e-9)


def test_factorization_rejects_unstable():
    with pytest.raises(NotStableError, match="not stable"):
        stable_factorization(np.array([[1.1]]))
