"""Linear algebra on symmetric tridiagonal matrices: solves, log determinants and the diagonal of the inverse."""
import numpy as np

from scipy.linalg import LinAlgError, cholesky_banded, cho_solve_banded

from phylodyn_ps.exceptions import DegenerateDataError

def tridiag_solve(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solves A x = rhs for tridiagonal A by forward elimination and back substitution.

    Args:
        sub (np.ndarray): The B - 1 entries below the diagonal.
        diag (np.ndarray): The B diagonal entries.
        sup (np.ndarray): The B - 1 entries above the diagonal.
        rhs (np.ndarray): Right hand side.

    Raises:
        ValueError: On length mismatches.
        DegenerateDataError: On a zero pivot (the matrix is not positive definite).

    Returns:
        np.ndarray: The solution x.
    """
    diag = np.asarray(diag, dtype = float)
    sub = np.asarray(sub, dtype = float)
    sup = np.asarray(sup, dtype = float)
    rhs = np.asarray(rhs, dtype = float)
    size = len(diag)
    if len(sub) != size - 1 or len(sup) != size - 1 or len(rhs) != size:
        raise ValueError(f"Inconsistent tridiagonal system sizes: {len(sub)}, {size}, {len(sup)}, {len(rhs)}.")

    pivots = np.empty(size)
    forward = np.empty(size)
    upper = np.empty(max(size - 1, 0))
    pivots[0] = diag[0]
    forward[0] = rhs[0]
    for i in range(1, size):
        if pivots[i - 1] == 0:
            raise DegenerateDataError(f"Zero pivot at row {i - 1}.", error = {"row": i - 1})
        factor = sub[i - 1] / pivots[i - 1]
        upper[i - 1] = sup[i - 1]
        pivots[i] = diag[i] - factor * sup[i - 1]
        forward[i] = rhs[i] - factor * forward[i - 1]
    if pivots[-1] == 0:
        raise DegenerateDataError(f"Zero pivot at row {size - 1}.", error = {"row": size - 1})

    x = np.empty(size)
    x[-1] = forward[-1] / pivots[-1]
    for i in range(size - 2, -1, -1):
        x[i] = (forward[i] - upper[i] * x[i + 1]) / pivots[i]
    return x

def tridiag_matvec(diag: np.ndarray, off: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Multiplies the symmetric tridiagonal matrix (diag, off) by v."""
    out = diag * v
    out[:-1] += off * v[1:]
    out[1:] += off * v[:-1]
    return out

class TridiagCholesky:
    """
    Banded Cholesky factor L (lower bidiagonal) of a symmetric positive definite tridiagonal matrix.

    Args:
        diag (np.ndarray): The B diagonal entries.
        off (np.ndarray): The B - 1 off-diagonal entries.

    Raises:
        DegenerateDataError: If the matrix is not positive definite.
    """

    def __init__(self, diag: np.ndarray, off: np.ndarray) -> None:
        diag = np.asarray(diag, dtype = float)
        off = np.asarray(off, dtype = float)
        banded = np.zeros((2, len(diag)))
        banded[0] = diag
        banded[1, :-1] = off
        try:
            self.factor = cholesky_banded(banded, lower = True)
        except LinAlgError as e:
            raise DegenerateDataError(f"Matrix is not positive definite: {e}")

    @property
    def l_diag(self) -> np.ndarray:
        return self.factor[0]

    @property
    def l_sub(self) -> np.ndarray:
        return self.factor[1, :-1]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.factor, True), rhs)

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(self.l_diag)))

    def diag_inverse(self) -> np.ndarray:
        """Diagonal of the inverse by the backward recursion on the bidiagonal factor."""
        l_diag = self.l_diag
        l_sub = self.l_sub
        size = len(l_diag)
        sigma = np.empty(size)
        sigma[-1] = 1.0 / l_diag[-1] ** 2
        for i in range(size - 2, -1, -1):
            ratio = l_sub[i] / l_diag[i]
            cross = -ratio * sigma[i + 1]
            sigma[i] = 1.0 / l_diag[i] ** 2 - ratio * cross
        return sigma
