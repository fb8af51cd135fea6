"""Tests for the Lyapunov kernel: solves, abscissa, vectorization."""

import numpy as np
import pytest

from soflqr import (
    NotHurwitzError,
    SchurSolver,
    builtin_problem,
    kron,
    solve_lyapunov_adjoint,
    solve_lyapunov_primal,
    spectral_abscissa,
    unvec,
    vec,
)
from soflqr.verify import kron_lyapunov

from conftest import stable_plant


def characteristic_polynomial(M):
    """Faddeev-LeVerrier recursion: coefficients of det(sI - M).

    Uses only traces and matrix products, independent of any eigenvalue
    routine, so its roots serve as an eigenvalue oracle.
    """
    n = M.shape[0]
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    N = np.zeros_like(M)
    for k in range(1, n + 1):
        N = M @ N + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -np.trace(M @ N) / k
    return coeffs


class TestSpectralAbscissa:
    def test_diagonal(self):
        assert spectral_abscissa(-np.eye(3)) == -1.0

    def test_imaginary_pair(self):
        assert spectral_abscissa(np.array([[0.0, 1.0], [-1.0, 0.0]])) == 0.0

    def test_aircraft_state_matrix_vs_charpoly_oracle(self):
        # Independent oracle: roots of the characteristic polynomial
        # computed by the Faddeev-LeVerrier recursion.
        A = builtin_problem("example1").plant.A
        roots = np.roots(characteristic_polynomial(A))
        oracle = np.max(roots.real)
        value = spectral_abscissa(A)
        assert value == pytest.approx(oracle, abs=1e-10)
        assert value == pytest.approx(-0.010475941988581745, abs=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            spectral_abscissa(np.ones((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            spectral_abscissa(np.array([[np.nan, 0.0], [0.0, -1.0]]))


class TestPrimalSolve:
    def test_identity_case(self):
        sol = solve_lyapunov_primal(-np.eye(2), 2.0 * np.eye(2))
        np.testing.assert_allclose(sol.value, np.eye(2), atol=1e-14)
        assert sol.residual_norm < 1e-12

    def test_scalar(self):
        sol = solve_lyapunov_primal(np.array([[-2.0]]), np.array([[4.0]]))
        assert sol.value[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_matches_kronecker_oracle(self):
        rng = np.random.default_rng(42)
        A = stable_plant(rng, 3, 1, 1).A
        sol = solve_lyapunov_primal(A, np.eye(3))
        oracle = kron_lyapunov(A, np.eye(3))
        np.testing.assert_allclose(sol.value, oracle, rtol=0, atol=1e-10)

    def test_result_exactly_symmetric(self):
        rng = np.random.default_rng(7)
        A = stable_plant(rng, 4, 1, 1).A
        Qc = np.diag([1.0, 2.0, 3.0, 4.0])
        sol = solve_lyapunov_primal(A, Qc)
        assert np.array_equal(sol.value, sol.value.T)

    def test_positive_definite_for_definite_weight(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            A = stable_plant(rng, 4, 1, 1).A
            sol = solve_lyapunov_primal(A, np.eye(4))
            assert np.linalg.eigvalsh(sol.value).min() > 0.0

    def test_residual_bound(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            A = stable_plant(rng, 5, 1, 1).A
            Qc = rng.standard_normal((5, 5))
            Qc = Qc + Qc.T
            sol = solve_lyapunov_primal(A, Qc)
            assert sol.residual_norm <= 1e-8 * max(1.0,
                                                   np.linalg.norm(Qc, "fro"))

    def test_rejects_unstable(self):
        with pytest.raises(NotHurwitzError):
            solve_lyapunov_primal(np.array([[1.0]]), np.array([[1.0]]))

    def test_rejects_marginal(self):
        # Abscissa in (-1e-10, 0) counts as non-Hurwitz.
        with pytest.raises(NotHurwitzError):
            solve_lyapunov_primal(np.array([[-1e-12]]), np.array([[1.0]]))

    def test_rejects_asymmetric_weight(self):
        with pytest.raises(ValueError, match="symmetric"):
            solve_lyapunov_primal(-np.eye(2),
                                  np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestAdjointSolve:
    def test_identity_case(self):
        sol = solve_lyapunov_adjoint(-np.eye(3), 2.0 * np.eye(3))
        np.testing.assert_allclose(sol.value, np.eye(3), atol=1e-14)

    def test_scalar(self):
        sol = solve_lyapunov_adjoint(np.array([[-1.0]]), np.array([[1.0]]))
        assert sol.value[0, 0] == pytest.approx(0.5, abs=1e-14)

    def test_psd_for_psd_input(self):
        rng = np.random.default_rng(17)
        A = stable_plant(rng, 4, 1, 1).A
        sol = solve_lyapunov_adjoint(A, np.eye(4))
        assert np.linalg.eigvalsh(sol.value).min() > 0.0

    def test_adjoint_pairing(self):
        # <primal(Q), X> = <Q, adjoint(X)> independently solved on each side.
        rng = np.random.default_rng(19)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            A = stable_plant(rng, n, 1, 1).A
            Q = rng.standard_normal((n, n))
            Q = Q + Q.T
            X = rng.standard_normal((n, n))
            X = X + X.T
            left = np.trace(solve_lyapunov_primal(A, Q).value.T @ X)
            right = np.trace(Q.T @ solve_lyapunov_adjoint(A, X).value)
            assert left == pytest.approx(right, rel=1e-9)


class TestSchurSolver:
    def test_factorization_reused_across_rhs(self):
        rng = np.random.default_rng(23)
        A = stable_plant(rng, 4, 1, 1).A
        solver = SchurSolver(A)
        for _ in range(3):
            W = rng.standard_normal((4, 4))
            X = solver.solve_primal(W)
            np.testing.assert_allclose(A.T @ X + X @ A, -W, atol=1e-11)
            Y = solver.solve_adjoint(W)
            np.testing.assert_allclose(Y @ A.T + A @ Y, -W, atol=1e-11)

    def test_abscissa_matches_eigenvalues(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            A = stable_plant(rng, int(rng.integers(2, 7)), 1, 1).A
            assert SchurSolver(A).abscissa == pytest.approx(
                spectral_abscissa(A), abs=1e-10)


class TestVecUnvec:
    def test_column_major(self):
        np.testing.assert_array_equal(
            vec(np.array([[1.0, 2.0], [3.0, 4.0]])),
            np.array([1.0, 3.0, 2.0, 4.0]))

    def test_single_entry_matrix(self):
        E = np.zeros((2, 2))
        E[1, 0] = 1.0
        np.testing.assert_array_equal(vec(E), [0.0, 1.0, 0.0, 0.0])

    def test_unvec_inverts_vec(self):
        rng = np.random.default_rng(31)
        M = rng.standard_normal((2, 3))
        np.testing.assert_array_equal(unvec(vec(M), 2, 3), M)

    def test_unvec_rejects_bad_size(self):
        with pytest.raises(ValueError, match="reshape"):
            unvec(np.arange(5.0), 2, 3)


class TestKron:
    def test_block_diagonal(self):
        M = np.array([[1.0, 2.0], [3.0, 4.0]])
        expected = np.block([[M, np.zeros((2, 2))], [np.zeros((2, 2)), M]])
        np.testing.assert_array_equal(kron(np.eye(2), M), expected)

    def test_row_vectors(self):
        np.testing.assert_array_equal(kron([0.0, 1.0], [1.0, 0.0]),
                                      [0.0, 0.0, 1.0, 0.0])

    def test_vectorization_identity(self):
        # vec(A X B) = kron(B^T, A) vec(X), via direct multiplication.
        rng = np.random.default_rng(37)
        A, X, B = (rng.standard_normal((2, 2)) for _ in range(3))
        np.testing.assert_allclose(vec(A @ X @ B),
                                   kron(B.T, A) @ vec(X), atol=1e-14)
