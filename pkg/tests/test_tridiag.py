import unittest
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np

from phylodyn_ps import DegenerateDataError
from phylodyn_ps.tridiag import TridiagCholesky, tridiag_matvec, tridiag_solve

def random_spd(size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Diagonally dominant symmetric tridiagonal matrix."""
    off = rng.uniform(-1, 1, size - 1)
    diag = rng.uniform(0.1, 2, size)
    diag[:-1] += np.abs(off)
    diag[1:] += np.abs(off)
    return diag, off

def dense(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)

class TridiagSolve_TestCase(unittest.TestCase):

    def test_stencil(self) -> None:
        x = tridiag_solve([-1, -1], [2, 2, 2], [-1, -1], [1, 0, 1])
        np.testing.assert_allclose(x, [1, 1, 1])

    def test_identity(self) -> None:
        rhs = np.array([3.0, -2.0, 0.5, 7.0])
        np.testing.assert_array_equal(tridiag_solve(np.zeros(3), np.ones(4), np.zeros(3), rhs), rhs)

    def test_dense_oracle(self) -> None:
        rng = np.random.default_rng(11)
        for size in (2, 5, 50, 2000):
            with self.subTest(size = size):
                diag, off = random_spd(size, rng)
                rhs = rng.normal(size = size)
                x = tridiag_solve(off, diag, off, rhs)
                np.testing.assert_allclose(x, np.linalg.solve(dense(diag, off), rhs), rtol = 1e-8, atol = 1e-9)
                residual = np.max(np.abs(tridiag_matvec(diag, off, x) - rhs))
                self.assertLessEqual(residual, 1e-10 * (np.max(np.abs(rhs)) + 1))

    def test_zero_pivot(self) -> None:
        with self.assertRaises(DegenerateDataError):
            tridiag_solve([1.0], [0.0, 1.0], [1.0], [1.0, 1.0])

    def test_size_mismatch(self) -> None:
        with self.assertRaises(ValueError):
            tridiag_solve([1.0], [1.0, 1.0, 1.0], [1.0], [1.0, 1.0, 1.0])

class TridiagCholesky_TestCase(unittest.TestCase):

    def test_solve_and_logdet(self) -> None:
        rng = np.random.default_rng(5)
        for size in (2, 9, 300):
            with self.subTest(size = size):
                diag, off = random_spd(size, rng)
                factor = TridiagCholesky(diag, off)
                rhs = rng.normal(size = size)
                np.testing.assert_allclose(factor.solve(rhs), np.linalg.solve(dense(diag, off), rhs), rtol = 1e-8, atol = 1e-10)
                sign, logdet = np.linalg.slogdet(dense(diag, off))
                self.assertEqual(sign, 1.0)
                self.assertAlmostEqual(factor.logdet(), logdet, delta = 1e-9 * max(1.0, abs(logdet)))

    def test_diagonal_of_inverse(self) -> None:
        rng = np.random.default_rng(8)
        for size in (2, 3, 40, 2000):
            with self.subTest(size = size):
                diag, off = random_spd(size, rng)
                sigma = TridiagCholesky(diag, off).diag_inverse()
                if size <= 40:
                    expected = np.diag(np.linalg.inv(dense(diag, off)))
                else:
                    expected = np.array([np.linalg.solve(dense(diag, off), np.eye(size)[:, j])[j] for j in (0, size // 2, size - 1)])
                    sigma = sigma[[0, size // 2, size - 1]]
                np.testing.assert_allclose(sigma, expected, rtol = 1e-8)

    def test_not_positive_definite(self) -> None:
        with self.assertRaises(DegenerateDataError):
            TridiagCholesky([1.0, 1.0], [2.0])

if __name__ == '__main__':
    unittest.main()
