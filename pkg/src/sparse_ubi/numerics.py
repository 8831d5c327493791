"""Small dense linear-algebra kernel.

Matrices are plain ``numpy.ndarray`` objects of shape ``(rows, cols)``.
Vectors live in columns, so a set of ``l`` points in R^m is an ``m x l``
array. Singular value and eigen decompositions are delegated to LAPACK
through numpy; Gram-Schmidt is implemented here.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceFailure, DependentColumns, NonFiniteInput, NotSymmetric

RANK_TOL = 1e-10


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return M


def gram_schmidt(cols, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormalize the columns of ``cols``.

    Modified Gram-Schmidt with a second orthogonalization pass, which keeps
    the loss of orthogonality at the level of machine precision even for
    badly conditioned inputs.

    Parameters
    ----------
    cols : array_like, shape (m, l)
        Linearly independent columns, ``l <= m``.
    tol : float
        A column whose residual norm after orthogonalization drops below
        ``tol`` times its original norm is treated as dependent.

    Returns
    -------
    Q : ndarray, shape (m, l)
        Orthonormal columns with ``span(Q) == span(cols)``.

    Raises
    ------
    DependentColumns
        If the columns are not linearly independent.
    """
    V = as_matrix(cols, "cols").copy()
    m, l = V.shape
    if l > m:
        raise DependentColumns(f"{l} columns cannot be independent in R^{m}")
    Q = np.empty_like(V)
    for j in range(l):
        v = V[:, j]
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            for i in range(j):
                v = v - (Q[:, i] @ v) * Q[:, i]
        norm = np.linalg.norm(v)
        if norm0 == 0.0 or norm <= tol * norm0:
            raise DependentColumns(f"column {j} lies in the span of the previous ones")
        Q[:, j] = v / norm
    return Q


def gram_schmidt_batch(stack: np.ndarray) -> np.ndarray:
    """Orthonormalize a stack of ``(B, m, l)`` matrices column by column.

    Same two-pass modified Gram-Schmidt as :func:`gram_schmidt`, vectorized
    over the leading axis. Dependent inputs are not detected here; callers
    screen them first (RANSAC does so with :func:`rank_of_batch`).
    """
    V = np.array(stack, dtype=float, copy=True)
    B, m, l = V.shape
    Q = np.empty_like(V)
    for j in range(l):
        v = V[:, :, j]
        for _ in range(2):
            for i in range(j):
                q = Q[:, :, i]
                v = v - np.einsum("bm,bm->b", q, v)[:, None] * q
        norm = np.linalg.norm(v, axis=1)
        norm[norm == 0.0] = 1.0
        Q[:, :, j] = v / norm[:, None]
    return Q


def rank_of(M, tol: float = RANK_TOL) -> int:
    """Number of singular values larger than ``tol * sigma_max``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = as_matrix(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def rank_of_batch(stack: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """:func:`rank_of` applied to every matrix of a ``(B, m, l)`` stack."""
    s = np.linalg.svd(stack, compute_uv=False)
    smax = s[:, :1]
    return np.count_nonzero((s > tol * smax) & (smax > 0), axis=1)


def svd(M):
    """Economy-size SVD ``M = U @ diag(S) @ V.T``.

    Returns ``(U, S, V)`` with ``S`` in descending order; ``U`` is
    ``m x min(m, cols)``. Note that ``V`` is returned, not its transpose.
    """
    M = as_matrix(M)
    if M.size == 0:
        raise ValueError("svd of an empty matrix")
    try:
        U, S, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return U, S, Vt.T


def left_singular_basis(M) -> tuple[np.ndarray, np.ndarray]:
    """Full ``m x m`` left singular basis of ``M`` and its singular values.

    Unlike :func:`svd`, the trailing columns of ``U`` span the orthogonal
    complement of the column space even when ``M`` has fewer than ``m``
    columns. Singular values are padded with zeros to length ``m``.
    """
    M = as_matrix(M)
    m = M.shape[0]
    try:
        U, S, _ = np.linalg.svd(M, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    S_full = np.zeros(m)
    S_full[: S.size] = S[:m]
    return U, S_full


def evd_sym(R, sym_tol: float = 1e-10):
    """Eigen-decomposition of a symmetric matrix.

    Returns ``(eigvals, eigvecs)`` with eigenvalues ascending and the
    matching unit eigenvectors in the columns of ``eigvecs``.
    """
    R = as_matrix(R)
    if R.shape[0] != R.shape[1]:
        raise NotSymmetric(f"matrix of shape {R.shape} is not square")
    scale = np.linalg.norm(R)
    if np.linalg.norm(R - R.T) > sym_tol * max(scale, np.finfo(float).tiny):
        raise NotSymmetric("matrix is not symmetric")
    try:
        w, E = np.linalg.eigh(R)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return w, E


def complement_projector(basis) -> np.ndarray:
    """``I - Q Q^T`` for a matrix ``Q`` with orthonormal columns."""
    Q = as_matrix(basis)
    return np.eye(Q.shape[0]) - Q @ Q.T


def projection_residual(basis, x) -> np.ndarray:
    """Squared distance of each column of ``x`` from ``span(basis)``.

    ``basis`` must have orthonormal columns.
    """
    Q = as_matrix(basis)
    x = as_matrix(x)
    coeff = Q.T @ x
    return np.maximum(np.sum(x * x, axis=0) - np.sum(coeff * coeff, axis=0), 0.0)


def principal_angles(A, B) -> np.ndarray:
    """Principal angles (radians, ascending) between ``span(A)`` and ``span(B)``.

    Both inputs must have orthonormal columns. Uses the sine-based formula
    so that tiny angles are resolved to full precision.
    """
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape[1] < B.shape[1]:
        A, B = B, A
    # Columns of B minus their projection onto span(A).
    resid = B - A @ (A.T @ B)
    s = np.linalg.svd(resid, compute_uv=False)
    return np.sort(np.arcsin(np.clip(s, 0.0, 1.0)))
