"""Identify the orthogonal complements of the c = C(n, k) source subspaces.

Repeated RANSAC peels one k-dimensional subspace at a time off the mixture
columns: find the best-supported span, split the SVD of its inliers into
the span (top k left singular vectors) and its complement (the rest), then
drop the inliers from the candidate pool.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ransac
from .errors import ConfigError, NoConsensus, SubspaceShortfall
from .numerics import as_matrix, left_singular_basis


@dataclass
class OcsSet:
    """Subspaces found so far, in discovery order.

    ``spans[i]`` is ``m x k`` and ``bases[i]`` is ``m x (m - k)``; together
    they form an orthonormal basis of R^m. ``c`` is the number of subspaces
    expected, which may exceed ``len(self)`` for a partial result.
    """

    m: int
    k: int
    c: int
    bases: list[np.ndarray] = field(default_factory=list)
    spans: list[np.ndarray] = field(default_factory=list)
    inlier_counts: list[int] = field(default_factory=list)
    inliers: list[np.ndarray] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.bases)

    @property
    def complete(self) -> bool:
        return len(self) >= self.c

    def append(self, span, basis, inliers) -> None:
        self.spans.append(span)
        self.bases.append(basis)
        self.inliers.append(np.asarray(inliers, dtype=int))
        self.inlier_counts.append(len(inliers))

    def subset(self, order) -> "OcsSet":
        """Copy holding the subspaces at positions ``order`` (in that order)."""
        out = OcsSet(self.m, self.k, self.c)
        for i in order:
            out.append(self.spans[i], self.bases[i], self.inliers[i])
        return out

    @classmethod
    def from_mixing_matrix(cls, A, k: int) -> "OcsSet":
        """Exact subspaces of every k-subset of the columns of ``A``."""
        A = as_matrix(A, "A")
        m, n = A.shape
        out = cls(m, k, math.comb(n, k))
        for subset in itertools.combinations(range(n), k):
            U, _ = left_singular_basis(A[:, subset])
            out.append(U[:, :k], U[:, k:], [])
        return out

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "k": self.k,
            "c": self.c,
            "bases": [b.tolist() for b in self.bases],
            "spans": [s.tolist() for s in self.spans],
            "inlier_counts": list(self.inlier_counts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OcsSet":
        out = cls(d["m"], d["k"], d["c"])
        for span, basis, count in zip(d["spans"], d["bases"], d["inlier_counts"]):
            out.spans.append(np.asarray(span, dtype=float).reshape(out.m, out.k))
            out.bases.append(np.asarray(basis, dtype=float).reshape(out.m, out.m - out.k))
            out.inlier_counts.append(int(count))
            out.inliers.append(np.empty(0, dtype=int))
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "OcsSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_th1(m: int, sigma_off: float = 0.0) -> float:
    """Squared-distance threshold for raw (unnormalized) mixture columns."""
    return 1e-12 if sigma_off == 0 else 3 * m * sigma_off**2


def default_min_inliers(k: int, T: int, c: int) -> int:
    return max(k + 1, int(0.25 * T / c))


def default_config(m: int, n: int, k: int, T: int, sigma_off: float = 0.0,
                   seed=0, th1: float | None = None) -> ransac.RansacConfig:
    c = math.comb(n, k)
    budget = min(ransac.MAX_DEFAULT_ITERATIONS, ransac.expected_iterations(1 / c, k, 0.999))
    return ransac.RansacConfig(
        l=k,
        dist_threshold=default_th1(m, sigma_off) if th1 is None else th1,
        max_iterations=budget,
        success_prob=0.999,
        min_inliers=default_min_inliers(k, T, c),
        seed=seed,
        # Inactive-source noise adds a fixed absolute residual, so raw
        # columns keep a constant noise floor while normalized ones do not.
        normalize=False,
    )


def identify_ocs(X, n: int, k: int | None = None, cfg: ransac.RansacConfig | None = None,
                 *, sigma_off: float = 0.0, seed=0) -> OcsSet:
    """Find the ``C(n, k)`` subspaces that the columns of ``X`` lie on.

    Parameters
    ----------
    X : array_like, shape (m, T)
        Mixture matrix.
    n : int
        Number of sources.
    k : int, optional
        Sparsity level; defaults to ``m - 1``.
    cfg : RansacConfig, optional
        Overrides :func:`default_config` (built from ``sigma_off`` and
        ``seed``). ``cfg.l`` must equal ``k``.

    Raises
    ------
    SubspaceShortfall
        When RANSAC stops finding consensus early. The subspaces found so
        far are attached as ``exc.partial``.
    """
    X = as_matrix(X, "X")
    m, T = X.shape
    k = m - 1 if k is None else k
    if not 1 <= k <= m - 1:
        raise ConfigError(f"need 1 <= k <= m-1, got k={k}, m={m}")
    c = math.comb(n, k)
    if cfg is None:
        cfg = default_config(m, n, k, T, sigma_off, seed)
    if cfg.l != k:
        raise ConfigError(f"RANSAC sample size {cfg.l} must equal k={k}")
    usable = np.count_nonzero(np.linalg.norm(X, axis=0) > ransac.MIN_COLUMN_NORM)
    if usable < c * cfg.min_inliers:
        raise ConfigError(
            f"{usable} usable columns cannot supply {c} subspaces of {cfg.min_inliers} inliers"
        )

    rng = np.random.default_rng(cfg.seed)
    ocs = OcsSet(m, k, c)
    J = np.arange(T)
    for i in range(c):
        try:
            _, local = ransac.run(X[:, J], cfg, rng)
        except NoConsensus:
            raise SubspaceShortfall(i, c, partial=ocs) from None
        Y = J[local]
        U, _ = left_singular_basis(X[:, Y])
        ocs.append(U[:, :k], U[:, k:], Y)
        J = np.setdiff1d(J, Y, assume_unique=True)
    return ocs
