"""Synthetic k-sparse mixtures with known ground truth.

Every column of the source matrix has exactly ``k`` active entries drawn
from a standard normal; the remaining ``n - k`` entries carry Gaussian noise
with standard deviation ``sigma_off`` (exactly zero when ``sigma_off == 0``).
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, GenerationFailure, ShapeMismatch
from .numerics import as_matrix, rank_of

ACTIVE_FLOOR = 0.1
MAX_COS = 0.99
SUBSET_RANK_TOL = 1e-2


@dataclass(frozen=True)
class GenConfig:
    m: int
    n: int
    T: int
    k: int | None = None
    sigma_off: float = 0.0
    seed: int | None = 0
    support_mode: str = "uniform"

    def __post_init__(self):
        if self.k is None:
            object.__setattr__(self, "k", self.m - 1)
        self.validate()

    @property
    def c(self) -> int:
        return math.comb(self.n, self.k)

    def validate(self) -> None:
        m, n, k = self.m, self.n, self.k
        if not (1 <= k <= m - 1 < n):
            raise ConfigError(f"need 1 <= k <= m-1 < n, got m={m}, n={n}, k={k}")
        if self.T < self.c * (k + 1):
            raise ConfigError(
                f"T={self.T} too small: need at least c*(k+1) = {self.c * (k + 1)}"
            )
        if self.sigma_off < 0:
            raise ConfigError("sigma_off must be non-negative")
        if self.support_mode not in ("uniform", "balanced"):
            raise ConfigError(f"unknown support_mode {self.support_mode!r}")
        if self.sigma_off >= 0.1:
            warnings.warn(
                f"sigma_off={self.sigma_off} is not small compared to active sources",
                stacklevel=3,
            )


@dataclass
class Dataset:
    A: np.ndarray
    S: np.ndarray
    X: np.ndarray
    supports: np.ndarray  # (T, k) sorted active indices per column
    config: GenConfig = field(repr=False)


def _streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for the mixing matrix and the sources."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    a, s = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(s)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _offending_column(A: np.ndarray, rank_tol: float) -> int | None:
    m, n = A.shape
    G = np.abs(A.T @ A)
    np.fill_diagonal(G, 0.0)
    i, j = np.unravel_index(np.argmax(G), G.shape)
    if G[i, j] >= MAX_COS:
        return int(max(i, j))
    for subset in itertools.combinations(range(n), m):
        if rank_of(A[:, subset], rank_tol) < m:
            return subset[-1]
    return None


def gen_mixing_matrix(m: int, n: int, seed=None, max_retries: int = 1000,
                      rank_tol: float = SUBSET_RANK_TOL) -> np.ndarray:
    """Random ``m x n`` mixing matrix with unit-norm Gaussian columns.

    Any column that makes an m-subset rank deficient, or that is nearly
    collinear with another column (``|cos| >= 0.99``), is redrawn. Rank is
    judged at relative tolerance ``rank_tol``: the default rejects subsets
    whose smallest singular value is within two decades of the largest,
    since such near-coplanar columns cannot be told apart once
    ``sigma_off`` reaches that level.

    ``seed`` may be an int, ``None`` or a ``numpy.random.Generator``.
    """
    if not (n > m >= 2):
        raise ConfigError(f"need n > m >= 2, got m={m}, n={n}")
    rng = _rng(seed)
    A = rng.standard_normal((m, n))
    A /= np.linalg.norm(A, axis=0)
    for _ in range(max_retries):
        bad = _offending_column(A, rank_tol)
        if bad is None:
            return A
        col = rng.standard_normal(m)
        A[:, bad] = col / np.linalg.norm(col)
    raise GenerationFailure(f"no admissible {m}x{n} mixing matrix after {max_retries} redraws")


def _draw_active(rng: np.random.Generator, size: int) -> np.ndarray:
    vals = rng.standard_normal(size)
    small = np.abs(vals) < ACTIVE_FLOOR
    while np.any(small):
        vals[small] = rng.standard_normal(np.count_nonzero(small))
        small = np.abs(vals) < ACTIVE_FLOOR
    return vals


def _draw_supports(cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    n, k, T = cfg.n, cfg.k, cfg.T
    if cfg.support_mode == "uniform":
        keys = rng.random((T, n))
        return np.sort(np.argsort(keys, axis=1)[:, :k], axis=1)
    combos = np.array(list(itertools.combinations(range(n), k)))
    c = len(combos)
    reps, extra = divmod(T, c)
    idx = np.concatenate([np.repeat(np.arange(c), reps), rng.choice(c, extra, replace=False)])
    rng.shuffle(idx)
    return combos[idx]


def gen_sparse_sources(cfg: GenConfig, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Draw an ``n x T`` source matrix with exactly ``k`` active rows per column.

    Returns ``(S, supports)`` where ``supports[t]`` lists the active source
    indices of column ``t`` in increasing order. Without ``rng`` the source
    stream derived from ``cfg.seed`` is used, so that
    ``gen_sparse_sources(cfg)`` matches the sources of ``generate(cfg)``.
    """
    cfg.validate()
    if rng is None:
        _, rng = _streams(cfg.seed)
    n, k, T = cfg.n, cfg.k, cfg.T
    supports = _draw_supports(cfg, rng)
    if cfg.sigma_off > 0:
        S = cfg.sigma_off * rng.standard_normal((n, T))
    else:
        S = np.zeros((n, T))
    cols = np.repeat(np.arange(T), k)
    S[supports.ravel(), cols] = _draw_active(rng, T * k)
    return S, supports


def mix(A, S) -> np.ndarray:
    """Instantaneous linear mixture ``X = A @ S``."""
    A = as_matrix(A, "A")
    S = as_matrix(S, "S")
    if A.shape[1] != S.shape[0]:
        raise ShapeMismatch(f"cannot mix A {A.shape} with S {S.shape}")
    return A @ S


def generate(cfg: GenConfig) -> Dataset:
    """Mixing matrix, sources and mixtures for one seeded configuration."""
    rng_a, rng_s = _streams(cfg.seed)
    A = gen_mixing_matrix(cfg.m, cfg.n, rng_a)
    S, supports = gen_sparse_sources(cfg, rng_s)
    return Dataset(A=A, S=S, X=mix(A, S), supports=supports, config=cfg)


# -- files -------------------------------------------------------------------

def save_matrix(path, M) -> None:
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def load_matrix(path) -> np.ndarray:
    return as_matrix(np.loadtxt(path, delimiter=",", ndmin=2), str(path))


def save_dataset(ds: Dataset, outdir) -> dict[str, Path]:
    """Write ``X.csv``, ``A.csv``, ``S.csv`` and ``meta.json`` into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {name: outdir / f"{name}.csv" for name in ("X", "A", "S")}
    save_matrix(paths["X"], ds.X)
    save_matrix(paths["A"], ds.A)
    save_matrix(paths["S"], ds.S)
    meta = asdict(ds.config)
    meta["supports"] = ds.supports.tolist()
    paths["meta"] = outdir / "meta.json"
    paths["meta"].write_text(json.dumps(meta))
    return paths


def load_dataset(indir) -> Dataset:
    indir = Path(indir)
    meta = json.loads((indir / "meta.json").read_text())
    supports = np.asarray(meta.pop("supports"), dtype=int)
    cfg = GenConfig(**meta)
    return Dataset(
        A=load_matrix(indir / "A.csv"),
        S=load_matrix(indir / "S.csv"),
        X=load_matrix(indir / "X.csv"),
        supports=supports,
        config=cfg,
    )
