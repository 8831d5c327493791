"""Compare an estimated mixing matrix with the ground truth.

Estimates are only defined up to column order and sign, so columns are
first paired by an optimal assignment on angular cost and then scored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .numerics import as_matrix
from .errors import ShapeMismatch

ACCURACY_CUTOFF_DEG = 0.1


def unit_columns(A) -> np.ndarray:
    A = as_matrix(A)
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    return A / norms


def angle_between(u, v) -> np.ndarray:
    """Angle in radians between matching columns of ``u`` and ``v``.

    Uses ``2 atan2(|u - v|, |u + v|)`` on unit vectors, which stays accurate
    for angles near zero where ``arccos`` of the cosine loses half the
    digits.
    """
    u = unit_columns(u)
    v = unit_columns(v)
    return 2.0 * np.arctan2(np.linalg.norm(u - v, axis=0), np.linalg.norm(u + v, axis=0))


def sign_free_angles(A, Ahat) -> np.ndarray:
    """Matrix of ``arccos |cos(a_i, ahat_j)|`` in radians, shape (n, n_hat)."""
    U = unit_columns(A)
    V = unit_columns(Ahat)
    n, nh = U.shape[1], V.shape[1]
    out = np.empty((n, nh))
    for j in range(nh):
        v = V[:, j:j + 1]
        out[:, j] = np.minimum(angle_between(U, v), angle_between(U, -v))
    return out


@dataclass
class MatchResult:
    """Pairing of true columns ``true_idx[i]`` with estimates ``est_idx[i]``.

    ``signs[i]`` makes ``signs[i] * Ahat[:, est_idx[i]]`` point the same way
    as ``A[:, true_idx[i]]``.
    """

    true_idx: np.ndarray
    est_idx: np.ndarray
    signs: np.ndarray
    angles_deg: np.ndarray
    n_true: int
    cutoff_deg: float = ACCURACY_CUTOFF_DEG

    @property
    def permutation(self) -> dict[int, int]:
        return {int(j): int(i) for i, j in zip(self.true_idx, self.est_idx)}

    @property
    def accurate(self) -> np.ndarray:
        return self.angles_deg < self.cutoff_deg

    @property
    def accurate_count(self) -> int:
        return int(np.count_nonzero(self.accurate))

    @property
    def unmatched_true(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_true), self.true_idx)


def match_columns(A, Ahat, cutoff_deg: float = ACCURACY_CUTOFF_DEG) -> MatchResult:
    """Optimal sign- and permutation-resolved pairing of columns.

    Minimizes the total angle ``sum arccos |cos(a_i, ahat_j)|`` over all
    injective pairings. ``Ahat`` may have fewer columns than ``A``.
    """
    A = as_matrix(A, "A")
    Ahat = np.asarray(Ahat, dtype=float)
    n = A.shape[1]
    if Ahat.size == 0:
        empty = np.empty(0, dtype=int)
        return MatchResult(empty, empty, np.empty(0), np.empty(0), n, cutoff_deg)
    Ahat = as_matrix(Ahat, "Ahat")
    if Ahat.shape[0] != A.shape[0]:
        raise ShapeMismatch(f"A has {A.shape[0]} rows, Ahat has {Ahat.shape[0]}")
    cost = sign_free_angles(A, Ahat)
    rows, cols = linear_sum_assignment(cost)
    dots = np.einsum("ij,ij->j", A[:, rows], Ahat[:, cols])
    signs = np.where(dots < 0, -1.0, 1.0)
    angles = np.degrees(angle_between(A[:, rows], Ahat[:, cols] * signs))
    return MatchResult(rows, cols, signs, angles, n, cutoff_deg)


def bas(A, Ahat, match: MatchResult | None = None, accurate_only: bool = False) -> float:
    """Sum of deviation angles in degrees over matched column pairs.

    With ``accurate_only`` the pairs at or above the accuracy cutoff are
    left out. Unmatched true columns never contribute; inspect
    ``match.unmatched_true`` for those.
    """
    if match is None:
        match = match_columns(A, Ahat)
    angles = match.angles_deg
    if accurate_only:
        angles = angles[match.accurate]
    return float(np.sum(angles))


def frob_error(A, Ahat, match: MatchResult | None = None, accurate_only: bool = False) -> float:
    """Frobenius norm of ``A - Ahat`` over matched, sign-aligned unit columns."""
    if match is None:
        match = match_columns(A, Ahat)
    keep = match.accurate if accurate_only else np.ones(len(match.true_idx), dtype=bool)
    if not np.any(keep):
        return 0.0
    U = unit_columns(A)[:, match.true_idx[keep]]
    V = unit_columns(Ahat)[:, match.est_idx[keep]] * match.signs[keep]
    return float(np.linalg.norm(U - V))


def evaluate(A, Ahat) -> dict:
    """Summary metrics for one estimate."""
    match = match_columns(A, Ahat)
    return {
        "bas_deg": bas(A, Ahat, match),
        "bas_accurate_deg": bas(A, Ahat, match, accurate_only=True),
        "frob": frob_error(A, Ahat, match),
        "n_accurate": match.accurate_count,
        "n_matched": int(len(match.true_idx)),
        "n_true": match.n_true,
        "angles_deg": match.angles_deg.tolist(),
    }
