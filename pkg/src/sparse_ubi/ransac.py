"""RANSAC search for a linear subspace spanned by ``l`` data columns.

The model fitted to a minimal sample is the orthogonal-complement projector
``P = I - Q Q^T`` where ``Q`` is the Gram-Schmidt basis of the sample. A
column ``x`` is scored by ``||P x||^2``, its squared distance from the
sampled span.

Trials are drawn from one generator in a fixed order and evaluated in
batches, so a given seed and batch size always give the same result. Ties
between trials resolve to the lowest trial index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DependentColumns, DomainError, NoConsensus, ConfigError
from .numerics import (
    RANK_TOL,
    as_matrix,
    gram_schmidt,
    gram_schmidt_batch,
    left_singular_basis,
    rank_of,
    rank_of_batch,
)

log = logging.getLogger(__name__)

MIN_COLUMN_NORM = 1e-8
MAX_DEFAULT_ITERATIONS = 10_000


@dataclass(frozen=True)
class RansacConfig:
    """Parameters of one RANSAC search.

    ``max_iterations`` counts non-degenerate trials. Degenerate samples are
    redrawn without charge until ``resample_factor * max_iterations`` draws
    have been made in total. With ``adaptive`` set, the search also stops
    once ``expected_iterations(best_inlier_ratio, l, success_prob)`` trials
    have been made.
    """

    l: int
    dist_threshold: float
    max_iterations: int = 1000
    success_prob: float = 0.999
    min_inliers: int | None = None
    seed: int | None = 0
    adaptive: bool = True
    batch_size: int = 256
    resample_factor: int = 10
    refit_rounds: int = 5
    normalize: bool = True

    def __post_init__(self):
        if self.min_inliers is None:
            object.__setattr__(self, "min_inliers", self.l)
        if self.l < 1:
            raise ConfigError("sample size l must be >= 1")
        if self.min_inliers < self.l:
            raise ConfigError("min_inliers must be >= l")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.dist_threshold <= 0:
            raise ConfigError("dist_threshold must be positive")
        if not 0 < self.success_prob < 1:
            raise ConfigError("success_prob must lie in (0, 1)")


@dataclass(frozen=True)
class OcsModel:
    """Projector onto the orthogonal complement of a fitted span."""

    projector: np.ndarray
    span: np.ndarray = field(repr=False)

    @classmethod
    def from_span(cls, Q: np.ndarray) -> "OcsModel":
        P = np.eye(Q.shape[0]) - Q @ Q.T
        # Symmetrize away rounding so P == P.T holds exactly.
        P = 0.5 * (P + P.T)
        return cls(projector=P, span=Q)

    @property
    def dim(self) -> int:
        return self.span.shape[1]


def is_degenerate(X_sel, tol: float = RANK_TOL) -> bool:
    """True when the sampled columns do not have full column rank."""
    X_sel = as_matrix(X_sel)
    return rank_of(X_sel, tol) < X_sel.shape[1]


def fit_ocs_model(X_sel) -> OcsModel:
    """Fit the complement projector ``I - GS(X_sel) GS(X_sel)^T``."""
    X_sel = as_matrix(X_sel)
    if is_degenerate(X_sel):
        raise DependentColumns("sample is degenerate")
    return OcsModel.from_span(gram_schmidt(X_sel))


def score(model: OcsModel, x) -> np.ndarray | float:
    """Squared projection ``sum_i <P[i, :], x>^2`` of ``x`` onto the complement.

    ``x`` may be a single vector or an ``m x q`` matrix of columns, in which
    case one score per column is returned.
    """
    x = np.asarray(x, dtype=float)
    r = model.projector @ x
    d = np.sum(r * r, axis=0)
    return float(d) if x.ndim == 1 else d


def expected_iterations(omega: float, l: int, pr: float) -> int:
    """Number of trials needed to draw one all-inlier sample with probability ``pr``.

    ``omega`` is the inlier ratio and ``l`` the sample size.
    """
    if not 0 < omega <= 1:
        raise DomainError("omega must lie in (0, 1]")
    if not 0 < pr < 1:
        raise DomainError("pr must lie in (0, 1)")
    if l < 1:
        raise DomainError("l must be >= 1")
    p_good = omega**l
    if p_good >= 1:
        raise DomainError("omega**l == 1: every sample is all-inlier")
    if p_good == 0:
        raise DomainError("omega**l underflows to 0")
    n = math.log(1 - pr) / math.log1p(-p_good)
    # Guard against an exact integer landing one ulp above itself.
    return max(1, math.ceil(n - 1e-9))


def _budget(best: int, q: int, cfg: RansacConfig) -> int:
    if best <= 0:
        return cfg.max_iterations
    omega = best / q
    if omega**cfg.l >= 1:
        return 1
    try:
        n = expected_iterations(omega, cfg.l, cfg.success_prob)
    except DomainError:
        return cfg.max_iterations
    return min(cfg.max_iterations, n)


def _draw_samples(rng: np.random.Generator, q: int, l: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    samp = rng.integers(0, q, size=(size, l))
    if l == 1:
        return samp, np.ones(size, dtype=bool)
    s = np.sort(samp, axis=1)
    distinct = np.all(s[:, 1:] != s[:, :-1], axis=1)
    return samp, distinct


def run(data, cfg: RansacConfig, rng: np.random.Generator | None = None):
    """Search for the span of ``cfg.l`` columns that explains most of ``data``.

    Columns shorter than ``1e-8`` are ignored. With ``cfg.normalize`` the
    rest are scaled to unit length before scoring; otherwise the threshold
    applies to raw squared distances. The winning model is refit on its inliers
    (top ``l`` left singular vectors of the raw inlier columns) and the
    inliers are re-scored against the refit model.

    Parameters
    ----------
    data : array_like, shape (m, q)
    cfg : RansacConfig
    rng : numpy.random.Generator, optional
        Defaults to ``numpy.random.default_rng(cfg.seed)``.

    Returns
    -------
    model : OcsModel
    inliers : ndarray of int
        Indices into the columns of ``data``, ascending.

    Raises
    ------
    NoConsensus
        If no model gathers ``cfg.min_inliers`` inliers.
    """
    X = as_matrix(data, "data")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    m, _ = X.shape
    l, th = cfg.l, cfg.dist_threshold
    if l > m:
        raise ConfigError(f"cannot sample {l} independent columns in R^{m}")

    norms = np.linalg.norm(X, axis=0)
    usable = np.flatnonzero(norms > MIN_COLUMN_NORM)
    q = usable.size
    if q < l:
        raise NoConsensus(0, cfg.min_inliers)
    Xn = X[:, usable] / norms[usable] if cfg.normalize else X[:, usable]
    sq = np.sum(Xn * Xn, axis=0)
    sq_th = sq - th

    best_count, best_Q, best_trial = -1, None, -1
    trials = draws = 0
    budget = cfg.max_iterations
    max_draws = cfg.resample_factor * cfg.max_iterations
    while trials < budget and draws < max_draws:
        size = min(cfg.batch_size, max_draws - draws)
        samp, ok = _draw_samples(rng, q, l, size)
        draws += size
        stack = np.transpose(Xn[:, samp], (1, 0, 2))
        ok &= rank_of_batch(stack) == l
        keep = np.flatnonzero(ok)[: budget - trials]
        if keep.size == 0:
            continue
        Q = gram_schmidt_batch(stack[keep])
        b = keep.size
        # ||P x||^2 < th  <=>  ||Q^T x||^2 > ||x||^2 - th, scored with one GEMM.
        coeff = (np.transpose(Q, (0, 2, 1)).reshape(b * l, m) @ Xn).reshape(b, l, q)
        np.square(coeff, out=coeff)
        counts = np.count_nonzero(coeff.sum(axis=1) > sq_th, axis=1)
        j = int(np.argmax(counts))
        if counts[j] > best_count:
            best_count, best_Q, best_trial = int(counts[j]), Q[j], trials + j
        trials += keep.size
        if cfg.adaptive:
            budget = _budget(best_count, q, cfg)

    log.debug("ransac: %d trials, %d draws, best %d from trial %d", trials, draws, best_count, best_trial)
    if best_Q is None or best_count < cfg.min_inliers:
        raise NoConsensus(max(best_count, 0), cfg.min_inliers)

    model = OcsModel.from_span(best_Q)
    inl = np.flatnonzero(score(model, Xn) < th)
    for _ in range(cfg.refit_rounds):
        U, _ = left_singular_basis(X[:, usable[inl]])
        refit = OcsModel.from_span(U[:, :l])
        new = np.flatnonzero(score(refit, Xn) < th)
        if new.size < cfg.min_inliers:
            break
        model = refit
        if np.array_equal(new, inl):
            break
        inl = new
    inl = np.flatnonzero(score(model, Xn) < th)
    if inl.size < cfg.min_inliers:
        raise NoConsensus(int(inl.size), cfg.min_inliers)
    return model, usable[inl]
