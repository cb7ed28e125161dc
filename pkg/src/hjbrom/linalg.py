"""Dense linear algebra kernels and matrix-equation solvers.

Factorizations are delegated to LAPACK through numpy/scipy; the matrix
equation solvers wrap them with the stability and residual checks the rest
of the package relies on.  Every function is pure and thread-safe.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import (
    as_matrix,
    check_hurwitz,
    check_symmetric,
    spectral_abscissa,
    symmetrize,
)
from .errors import ConvergenceError, SingularMatrixError, StabilityError

__all__ = [
    "SvdResult",
    "svd",
    "sym_eig",
    "lu_solve",
    "solve_lyapunov",
    "solve_are",
]


@dataclass(frozen=True)
class SvdResult:
    """Thin singular value decomposition ``M = U @ diag(s) @ Vt^T``.

    ``left_vectors`` and ``right_vectors`` both hold orthonormal columns;
    ``singular_values`` is nonincreasing and nonnegative.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def svd(m):
    """Thin SVD of a dense real matrix.

    Parameters
    ----------
    m : (r, c) array_like
        Finite real matrix, r, c >= 1.

    Returns
    -------
    SvdResult
        With ``min(r, c)`` singular values sorted nonincreasing.

    Raises
    ------
    ConvergenceError
        If the underlying iteration fails to converge.
    """
    m = as_matrix(m, "m")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    return SvdResult(u, s, vt.T)


def sym_eig(s):
    """Eigendecomposition of a symmetric matrix, eigenvalues nonincreasing.

    Returns ``(eigenvalues, eigenvectors)`` with orthonormal eigenvector
    columns ordered to match the eigenvalues.  Asymmetric input is rejected.
    """
    s = as_matrix(s, "s", square=True)
    check_symmetric(s, "s")
    w, v = np.linalg.eigh(s)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def lu_solve(m, rhs):
    """Solve ``m @ x = rhs`` by LU factorization with partial pivoting.

    ``rhs`` may be a vector or a matrix of stacked right-hand sides.
    Raises SingularMatrixError when ``m`` is singular to working precision.
    """
    m = as_matrix(m, "m", square=True)
    rhs = np.asarray(rhs, dtype=float)
    try:
        return np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"lu_solve: {exc}") from exc


def solve_lyapunov(a, rhs, residual_tol=1e-9):
    """Solve the continuous Lyapunov equation ``a X + X a^T + rhs = 0``.

    Parameters
    ----------
    a : (n, n) array_like
        Hurwitz matrix (all eigenvalues with negative real part).  For the
        observability variant pass ``a.T``.
    rhs : (n, n) array_like
        Symmetric right-hand side.
    residual_tol : float
        Relative residual above which the solve is reported as failed.

    Returns
    -------
    (n, n) ndarray
        Symmetric solution.

    Raises
    ------
    StabilityError
        If ``a`` is not Hurwitz (the equation may then be singular or its
        solution meaningless for Gramians).
    ConvergenceError
        If the computed solution does not meet ``residual_tol``.
    """
    a = as_matrix(a, "a", square=True)
    rhs = check_symmetric(as_matrix(rhs, "rhs", square=True), "rhs")
    check_hurwitz(a, "a")
    x = symmetrize(scipy.linalg.solve_continuous_lyapunov(a, -rhs))
    residual = np.linalg.norm(a @ x + x @ a.T + rhs, "fro")
    scale = np.linalg.norm(rhs, "fro") + 2.0 * np.linalg.norm(a, "fro") * np.linalg.norm(x, "fro")
    if residual > residual_tol * max(scale, 1.0):
        raise ConvergenceError(
            f"Lyapunov solve residual {residual:.3e} exceeds tolerance",
            history=[residual],
        )
    return x


def solve_are(a, b, q, r, discount=0.0, tol=1e-10, max_iter=100):
    """Solve the shifted algebraic Riccati equation by Newton iteration.

    Finds the symmetric positive semidefinite ``P`` with

        ``(a - discount*I)^T P + P (a - discount*I) - P b r^{-1} b^T P + q = 0``

    via Kleinman's scheme: starting from the zero gain (valid because the
    shifted matrix must already be stable), each step solves one Lyapunov
    equation for the current closed loop and updates the gain.

    Parameters
    ----------
    a, b, q, r : array_like
        System and cost matrices; ``q`` symmetric PSD, ``r`` symmetric PD.
    discount : float
        Nonnegative exponential discount rate; shifts ``a`` by ``-discount*I``.
    tol : float
        Convergence threshold on the Frobenius norm of successive iterates.
    max_iter : int
        Iteration cap.

    Raises
    ------
    StabilityError
        If ``a - discount*I`` is unstable (no stabilizing initial gain is
        constructed in that case).
    ConvergenceError
        If the iteration cap is hit or the final residual check fails; the
        exception carries the residual history.
    """
    a = as_matrix(a, "a", square=True)
    b = as_matrix(b, "b")
    q = check_symmetric(as_matrix(q, "q", square=True), "q")
    r = check_symmetric(as_matrix(r, "r", square=True), "r")
    if discount < 0.0:
        raise ValueError("discount must be nonnegative")
    n = a.shape[0]
    if b.shape[0] != n or q.shape[0] != n or r.shape[0] != b.shape[1]:
        raise ValueError("incompatible shapes among a, b, q, r")
    if np.min(np.linalg.eigvalsh(q)) < -1e-10 * max(np.linalg.norm(q, "fro"), 1.0):
        raise ValueError("q must be positive semidefinite")
    if np.min(np.linalg.eigvalsh(r)) <= 0.0:
        raise ValueError("r must be positive definite")

    shifted = a - discount * np.eye(n)
    try:
        check_hurwitz(shifted, "a - discount*I")
    except StabilityError as exc:
        raise StabilityError(
            "no stabilizing initial gain: shifted system matrix is unstable"
        ) from exc

    gain = np.zeros((b.shape[1], n))
    p = np.zeros((n, n))
    history = []
    for _ in range(max_iter):
        closed = shifted - b @ gain
        p_next = solve_lyapunov(closed.T, q + gain.T @ r @ gain)
        step = np.linalg.norm(p_next - p, "fro")
        history.append(step)
        p = p_next
        gain = np.linalg.solve(r, b.T @ p)
        if step <= tol:
            break
    else:
        raise ConvergenceError(
            f"Riccati Newton iteration did not converge in {max_iter} steps",
            iterations=max_iter,
            history=history,
        )

    p = symmetrize(p)
    residual = np.linalg.norm(
        shifted.T @ p + p @ shifted - p @ b @ np.linalg.solve(r, b.T) @ p + q, "fro"
    )
    if residual > 1e-8 * (1.0 + np.linalg.norm(q, "fro")):
        raise ConvergenceError(
            f"Riccati residual {residual:.3e} above tolerance after convergence",
            iterations=len(history),
            history=history,
        )
    if spectral_abscissa(shifted - b @ gain) >= 0.0:
        raise StabilityError("Riccati solution does not stabilize the closed loop")
    return p
