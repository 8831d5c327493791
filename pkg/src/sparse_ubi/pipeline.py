"""End-to-end identification: subspaces first, then mixing vectors."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import mixing_id, subspace_id
from .errors import SubspaceShortfall
from .numerics import as_matrix

ALGORITHMS = ("ransac", "evd")


def derive_seeds(seed, count: int = 2) -> list[int]:
    """Independent integer seeds for the pipeline stages."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


@dataclass
class Identification:
    Ahat: np.ndarray
    ocs: subspace_id.OcsSet
    algorithm: str
    status: str
    thresholds: dict
    runtime_s: float
    outer_passes: int | None = None
    cluster_counts: list[int] = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def report(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "status": self.status,
            "message": self.message,
            "n_identified": int(self.Ahat.shape[1]) if self.Ahat.size else 0,
            "subspaces_found": len(self.ocs),
            "subspaces_expected": self.ocs.c,
            "subspace_inlier_counts": list(self.ocs.inlier_counts),
            "cluster_counts": list(self.cluster_counts),
            "outer_passes": self.outer_passes,
            "thresholds": self.thresholds,
            "runtime_s": self.runtime_s,
        }


def identify(X, n: int, k: int | None = None, algorithm: str = "ransac", *,
             sigma_off: float = 0.0, th1: float | None = None, th2: float | None = None,
             th3: float = mixing_id.DEFAULT_TH3, max_outer: int | None = None,
             seed=0) -> Identification:
    """Run subspace identification followed by mixing-vector identification.

    ``sigma_off`` only selects default thresholds. Failures inside either
    stage are not raised; they show up in ``status`` (``"subspace_shortfall"``
    or ``"timeout"``) with whatever partial estimate was reached.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    t0 = time.perf_counter()
    X = as_matrix(X, "X")
    m, T = X.shape
    k = m - 1 if k is None else k
    seed_ocs, seed_mix = derive_seeds(seed)

    cfg1 = subspace_id.default_config(m, n, k, T, sigma_off, seed_ocs, th1)
    status, message = "ok", ""
    try:
        ocs = subspace_id.identify_ocs(X, n, k, cfg1)
    except SubspaceShortfall as exc:
        ocs, status, message = exc.partial, "subspace_shortfall", str(exc)

    thresholds = {"th1": cfg1.dist_threshold, "min_inliers_1": cfg1.min_inliers}
    outer = None
    counts: list[int] = []
    if algorithm == "ransac" and k == m - 1:
        cfg2 = mixing_id.default_config(m, n, k, sigma_off, seed_mix, th2)
        thresholds.update(th2=cfg2.dist_threshold, th3=th3, min_inliers_2=cfg2.min_inliers)
        if len(ocs) >= cfg2.min_inliers:
            state = mixing_id.run_generative_clustering(ocs, n, k, cfg2, th3, max_outer)
            Ahat, outer, counts = state.mixing_matrix(), state.outer_passes, list(state.counts)
            if len(state.centers) < n and status == "ok":
                status = "timeout"
                message = f"identified {len(state.centers)} of {n} mixing vectors"
        else:
            Ahat = np.empty((m, 0))
    else:
        algorithm = "evd"
        if ocs.complete:
            Ahat = mixing_id.identify_mixing_evd(ocs, n, k)
        else:
            Ahat = np.empty((m, 0))
    if Ahat.size == 0:
        Ahat = np.empty((m, 0))
    return Identification(
        Ahat=Ahat,
        ocs=ocs,
        algorithm=algorithm,
        status=status,
        thresholds=thresholds,
        runtime_s=time.perf_counter() - t0,
        outer_passes=outer,
        cluster_counts=counts,
        message=message,
    )
