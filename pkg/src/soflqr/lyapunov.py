"""Dense continuous-time Lyapunov equation kernel.

Solves the two operator equations used throughout the package,

    primal:   Ac^T X + X Ac + W = 0
    adjoint:  X Ac^T + Ac X + W = 0

for a Hurwitz matrix ``Ac``, via the Bartels-Stewart method (real Schur
factorization of ``Ac`` plus a quasi-triangular Sylvester solve).  The
factorization is computed once per ``SchurSolver`` instance so that many
right-hand sides can be solved against the same closed-loop matrix.

Also provides the column-major vectorization pair ``vec``/``unvec`` and
re-exports ``kron``; all Kronecker identities in the package assume
column-major ordering.
"""

from dataclasses import dataclass

import numpy as np
from numpy import kron  # noqa: F401  (re-exported: standard Kronecker product)
from scipy.linalg import get_lapack_funcs, schur

__all__ = [
    "HURWITZ_MARGIN",
    "NotHurwitzError",
    "LyapunovSolution",
    "SchurSolver",
    "spectral_abscissa",
    "solve_lyapunov_primal",
    "solve_lyapunov_adjoint",
    "vec",
    "unvec",
    "kron",
]

# Spectral abscissa must lie strictly below this value for a matrix to be
# accepted as Hurwitz; near-marginal closed loops make the Lyapunov solve
# ill-conditioned.
HURWITZ_MARGIN = -1e-10


class NotHurwitzError(ValueError):
    """Raised when a matrix required to be Hurwitz is not.

    For the solvers in this package this signals that a controller gain
    left the stabilizing set.
    """

    def __init__(self, abscissa, message=None):
        self.abscissa = abscissa
        if message is None:
            message = (
                f"matrix is not Hurwitz: spectral abscissa {abscissa:.6e} "
                f"is not below {HURWITZ_MARGIN:.0e}"
            )
        super().__init__(message)


@dataclass(frozen=True)
class LyapunovSolution:
    """Symmetrized solution of a Lyapunov equation.

    Attributes
    ----------
    value : ndarray
        The n x n symmetric solution, returned as ``(X + X.T) / 2``.
    residual_norm : float
        Frobenius norm of the equation residual evaluated with the
        symmetrized solution.
    """

    value: np.ndarray
    residual_norm: float


def spectral_abscissa(M):
    """Largest real part over the eigenvalues of the square matrix ``M``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains non-finite entries")
    try:
        eigs = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigenvalue computation failed for {M.shape} matrix: {exc}"
        ) from exc
    return float(np.max(eigs.real))


def vec(M):
    """Stack the columns of ``M`` into a 1-D vector (column-major)."""
    return np.asarray(M, dtype=float).flatten(order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec` for the given target shape."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != rows * cols:
        raise ValueError(
            f"cannot reshape vector of length {v.size} into {rows}x{cols}"
        )
    return v.reshape((rows, cols), order="F")


def _quasi_triangular_eigenvalues(T):
    # Eigenvalues of a real Schur form: 1x1 blocks on the diagonal are real
    # eigenvalues, 2x2 blocks hold complex-conjugate pairs.
    n = T.shape[0]
    vals = np.empty(n, dtype=complex)
    k = 0
    while k < n:
        if k + 1 < n and T[k + 1, k] != 0.0:
            vals[k : k + 2] = np.linalg.eigvals(T[k : k + 2, k : k + 2])
            k += 2
        else:
            vals[k] = T[k, k]
            k += 1
    return vals


class SchurSolver:
    """Lyapunov solves against a fixed Hurwitz matrix.

    Factorizes ``Ac = U T U^T`` (real Schur form) on construction and
    solves each right-hand side with a single quasi-triangular Sylvester
    solve (LAPACK ``trsyl``), so repeated solves cost O(n^2) beyond the
    one-time O(n^3) factorization.

    Raises
    ------
    NotHurwitzError
        If the spectral abscissa of ``Ac`` is not below ``HURWITZ_MARGIN``.
    """

    def __init__(self, Ac):
        Ac = np.asarray(Ac, dtype=float)
        if Ac.ndim != 2 or Ac.shape[0] != Ac.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {Ac.shape}")
        if not np.all(np.isfinite(Ac)):
            raise ValueError("matrix contains non-finite entries")
        self.matrix = Ac
        self._T, self._U = schur(Ac, output="real")
        self.abscissa = float(
            np.max(_quasi_triangular_eigenvalues(self._T).real)
        )
        if self.abscissa >= HURWITZ_MARGIN:
            raise NotHurwitzError(self.abscissa)
        self._trsyl = get_lapack_funcs("trsyl", (self._T,))

    def _solve(self, rhs, trana, tranb):
        ct = -self._U.T @ rhs @ self._U
        x, scale, info = self._trsyl(self._T, self._T, ct, isgn=1,
                                     trana=trana, tranb=tranb)
        if info < 0:
            raise np.linalg.LinAlgError(
                f"trsyl: illegal value in argument {-info}"
            )
        if info == 1:
            # Perturbed solve: Ac and -Ac have (near-)common eigenvalues,
            # which the Hurwitz gate should have excluded.
            raise NotHurwitzError(
                self.abscissa,
                "Lyapunov equation is singular: the closed-loop matrix and "
                "its negation share an eigenvalue within tolerance",
            )
        return self._U @ (x / scale) @ self._U.T

    def solve_primal(self, W):
        """Solve ``Ac^T X + X Ac + W = 0`` for general square ``W``."""
        return self._solve(np.asarray(W, dtype=float), "T", "N")

    def solve_adjoint(self, W):
        """Solve ``X Ac^T + Ac X + W = 0`` for general square ``W``."""
        return self._solve(np.asarray(W, dtype=float), "N", "T")


def _require_symmetric(M, name):
    M = np.asarray(M, dtype=float)
    scale = max(1.0, np.abs(M).max()) if M.size else 1.0
    if np.abs(M - M.T).max() > 1e-8 * scale:
        raise ValueError(f"{name} must be symmetric")
    return M


def solve_lyapunov_primal(Ac, Qc):
    """Solve ``Ac^T P + P Ac + Qc = 0`` for symmetric ``Qc``.

    ``Ac`` must be Hurwitz, which guarantees a unique solution; the result
    is explicitly symmetrized by averaging.

    Returns
    -------
    LyapunovSolution
        Solution matrix and the Frobenius norm of its residual.
    """
    Qc = _require_symmetric(Qc, "Qc")
    solver = Ac if isinstance(Ac, SchurSolver) else SchurSolver(Ac)
    P = solver.solve_primal(Qc)
    P = 0.5 * (P + P.T)
    residual = np.linalg.norm(
        solver.matrix.T @ P + P @ solver.matrix + Qc, "fro"
    )
    return LyapunovSolution(value=P, residual_norm=float(residual))


def solve_lyapunov_adjoint(Ac, X0):
    """Solve ``G Ac^T + Ac G + X0 = 0`` for symmetric ``X0``.

    This is the adjoint-operator counterpart of
    :func:`solve_lyapunov_primal`; for positive semidefinite ``X0`` the
    solution is the closed-loop state-covariance Gramian.
    """
    X0 = _require_symmetric(X0, "X0")
    solver = Ac if isinstance(Ac, SchurSolver) else SchurSolver(Ac)
    G = solver.solve_adjoint(X0)
    G = 0.5 * (G + G.T)
    residual = np.linalg.norm(
        G @ solver.matrix.T + solver.matrix @ G + X0, "fro"
    )
    return LyapunovSolution(value=G, residual_norm=float(residual))
