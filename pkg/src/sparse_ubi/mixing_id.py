"""Recover the mixing columns from the identified complement subspaces.

Each mixing vector ``a_q`` belongs to ``f = C(n-1, k-1)`` of the source
subspaces and is therefore orthogonal to all of their complements. Two
routes find those common normals:

* :func:`identify_mixing_evd` tries every f-combination of complements and
  keeps the ``n`` with the smallest minimum eigenvalue. Exhaustive and slow,
  used as the reference.
* :func:`identify_mixing_ransac` runs RANSAC over the complement vectors and
  groups the normals it finds with online (generative) clustering.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import ransac
from .errors import (
    CombinatorialBudgetExceeded,
    ConfigError,
    IdentificationTimeout,
    IncompleteOcs,
    NoConsensus,
    ZeroVector,
)
from .numerics import left_singular_basis
from .subspace_id import OcsSet

MAX_COMBINATIONS = 10**6
DEFAULT_TH3 = 1e-4


def f_count(n: int, k: int) -> int:
    """Number of source subspaces that contain a given mixing vector."""
    return math.comb(n - 1, k - 1)


def sign_normalize(A) -> np.ndarray:
    """Flip columns so that the entry of largest magnitude is positive."""
    A = np.array(A, dtype=float, copy=True)
    if A.size == 0:
        return A
    idx = np.argmax(np.abs(A), axis=0)
    signs = np.sign(A[idx, np.arange(A.shape[1])])
    signs[signs == 0] = 1.0
    return A * signs


def acd(a, p) -> tuple[float, float]:
    """Absolute cosine distance ``1 - |cos(a, p)|`` and the sign of ``<a, p>``."""
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    na, np_ = np.linalg.norm(a), np.linalg.norm(p)
    if na == 0 or np_ == 0:
        raise ZeroVector("absolute cosine distance of a zero vector")
    sign = -1.0 if float(a @ p) < 0 else 1.0
    # 1 - |cos| == |u - s v|^2 / 2 for unit u, v; exact at zero distance.
    d = a / na - sign * p / np_
    return min(1.0, 0.5 * float(d @ d)), sign


@dataclass
class FlattenedOcs:
    matrix: np.ndarray
    group_of_column: np.ndarray


def flatten_ocs(ocs: OcsSet) -> FlattenedOcs:
    """Concatenate the complement bases side by side."""
    if len(ocs) == 0:
        return FlattenedOcs(np.empty((ocs.m, 0)), np.empty(0, dtype=int))
    b = ocs.m - ocs.k
    return FlattenedOcs(
        matrix=np.hstack(ocs.bases),
        group_of_column=np.repeat(np.arange(len(ocs)), b),
    )


# -- exhaustive EVD route ------------------------------------------------------

def identify_mixing_evd(ocs: OcsSet, n: int, k: int | None = None,
                        max_combinations: int = MAX_COMBINATIONS,
                        chunk: int = 4096) -> np.ndarray:
    """Estimate the mixing matrix from all f-combinations of complements.

    For every combination the complement bases are stacked into ``P_sel``
    and the eigenvector of the smallest eigenvalue of ``P_sel P_sel^T`` is
    recorded. The ``n`` eigenvectors with the smallest eigenvalues form the
    estimate. Result is ``m x n`` with sign-normalized columns.
    """
    k = ocs.k if k is None else k
    c = math.comb(n, k)
    if len(ocs) < c:
        raise IncompleteOcs(f"need {c} subspaces, have {len(ocs)}")
    f = f_count(n, k)
    g = math.comb(len(ocs), f)
    if g > max_combinations:
        raise CombinatorialBudgetExceeded(f"{g} combinations exceed budget {max_combinations}")

    grams = np.stack([B @ B.T for B in ocs.bases])
    lams = np.empty(g)
    vecs = np.empty((g, ocs.m))
    combos = itertools.combinations(range(len(ocs)), f)
    done = 0
    while done < g:
        block = np.array(list(itertools.islice(combos, chunk)))
        R = grams[block].sum(axis=1)
        w, E = np.linalg.eigh(R)
        lams[done:done + len(block)] = w[:, 0]
        vecs[done:done + len(block)] = E[:, :, 0]
        done += len(block)
    pick = np.argsort(lams, kind="stable")[:n]
    return sign_normalize(vecs[pick].T)


# -- RANSAC + generative clustering route -----------------------------------

@dataclass
class ClusterState:
    """Online clustering of candidate normals into mixing vectors."""

    th3: float = DEFAULT_TH3
    centers: list[np.ndarray] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    outer_passes: int = 0
    candidates: list[np.ndarray] = field(default_factory=list, repr=False)
    candidate_inliers: list[np.ndarray] = field(default_factory=list, repr=False)

    def assign(self, p) -> int:
        """Merge ``p`` into the nearest center or start a new one.

        Returns the index of the center that absorbed ``p``.
        """
        p = np.asarray(p, dtype=float)
        p = p / np.linalg.norm(p)
        if not self.centers:
            self.centers.append(p)
            self.counts.append(1)
            return 0
        dists = [acd(a, p) for a in self.centers]
        j = min(range(len(dists)), key=lambda i: dists[i][0])
        D, s = dists[j]
        if D < self.th3:
            merged = self.centers[j] + s * p
            self.centers[j] = merged / np.linalg.norm(merged)
            self.counts[j] += 1
            return j
        self.centers.append(s * p)
        self.counts.append(1)
        return len(self.centers) - 1

    def mixing_matrix(self) -> np.ndarray:
        if not self.centers:
            return np.empty((0, 0))
        return sign_normalize(np.column_stack(self.centers))


def default_th2(sigma_off: float = 0.0) -> float:
    return 1e-8 if sigma_off == 0 else 100 * sigma_off**2


def default_config(m: int, n: int, k: int, sigma_off: float = 0.0, seed=0,
                   th2: float | None = None) -> ransac.RansacConfig:
    c = math.comb(n, k)
    f = f_count(n, k)
    l = m - 1
    omega = min(f / c, 0.999999)
    budget = min(ransac.MAX_DEFAULT_ITERATIONS, ransac.expected_iterations(omega, l, 0.999))
    return ransac.RansacConfig(
        l=l,
        dist_threshold=default_th2(sigma_off) if th2 is None else th2,
        max_iterations=budget,
        success_prob=0.999,
        min_inliers=max(f, l),
        seed=seed,
    )


def run_generative_clustering(ocs: OcsSet, n: int, k: int | None = None,
                              cfg: ransac.RansacConfig | None = None,
                              th3: float = DEFAULT_TH3, max_outer: int | None = None,
                              *, sigma_off: float = 0.0, seed=0) -> ClusterState:
    """Cluster RANSAC normals of the complement vectors until ``n`` centers exist.

    Each outer pass runs RANSAC (sample size ``m - 1``) over the complement
    vectors in a freshly shuffled order. When a consensus is found, the
    left singular vector of the smallest singular value of its inliers is
    the candidate normal, which is handed to :meth:`ClusterState.assign`.
    The state is returned whether or not ``n`` centers were reached.
    """
    m = ocs.m
    k = ocs.k if k is None else k
    if k != m - 1:
        raise ConfigError("RANSAC identification needs k = m - 1; use the EVD route")
    if cfg is None:
        cfg = default_config(m, n, k, sigma_off, seed)
    if max_outer is None:
        max_outer = 50 * n
    P = flatten_ocs(ocs).matrix
    q = P.shape[1]
    f = f_count(n, k)
    if q < min(f, cfg.min_inliers):
        raise ConfigError(f"{q} complement vectors, need at least {f}")

    rng = np.random.default_rng(cfg.seed)
    state = ClusterState(th3=th3)
    J = np.arange(q)
    while len(state.centers) < n and state.outer_passes < max_outer:
        state.outer_passes += 1
        try:
            _, local = ransac.run(P[:, J], cfg, rng)
        except NoConsensus:
            local = None
        if local is not None and local.size:
            Y = np.sort(J[local])
            U, _ = left_singular_basis(P[:, Y])
            p = U[:, -1]
            state.candidates.append(p)
            state.candidate_inliers.append(Y)
            state.assign(p)
        J = rng.permutation(q)
    return state


def identify_mixing_ransac(ocs: OcsSet, n: int, k: int | None = None,
                           cfg: ransac.RansacConfig | None = None,
                           th3: float = DEFAULT_TH3, max_outer: int | None = None,
                           *, sigma_off: float = 0.0, seed=0) -> np.ndarray:
    """Estimate the ``m x n`` mixing matrix by RANSAC over complement vectors.

    Raises
    ------
    IdentificationTimeout
        If ``max_outer`` passes end with fewer than ``n`` centers; the
        partial estimate is attached as ``exc.partial``.
    """
    state = run_generative_clustering(ocs, n, k, cfg, th3, max_outer,
                                      sigma_off=sigma_off, seed=seed)
    if len(state.centers) < n:
        raise IdentificationTimeout(len(state.centers), n, partial=state.mixing_matrix(), state=state)
    return state.mixing_matrix()
