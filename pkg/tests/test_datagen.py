import itertools
import warnings

import numpy as np
import pytest

from sparse_ubi import datagen
from sparse_ubi.errors import ConfigError, ShapeMismatch


def test_mixing_matrix_shape_and_unit_columns():
    A = datagen.gen_mixing_matrix(3, 5, seed=0)
    assert A.shape == (3, 5)
    np.testing.assert_allclose(np.linalg.norm(A, axis=0), 1.0, atol=1e-14)


def test_every_m_subset_is_well_conditioned():
    A = datagen.gen_mixing_matrix(3, 6, seed=1)
    for subset in itertools.combinations(range(6), 3):
        s = np.linalg.svd(A[:, subset], compute_uv=False)
        assert s[-1] > datagen.SUBSET_RANK_TOL * s[0]


def test_mixing_matrix_seeded():
    np.testing.assert_array_equal(datagen.gen_mixing_matrix(2, 3, seed=7),
                                  datagen.gen_mixing_matrix(2, 3, seed=7))
    assert not np.array_equal(datagen.gen_mixing_matrix(2, 3, seed=7),
                              datagen.gen_mixing_matrix(2, 3, seed=8))


def test_mixing_matrix_rejects_square():
    with pytest.raises(ConfigError):
        datagen.gen_mixing_matrix(3, 3)


def test_exactly_k_nonzeros_when_noiseless():
    cfg = datagen.GenConfig(m=3, n=5, T=2000, k=2, sigma_off=0.0, seed=2)
    S, supports = datagen.gen_sparse_sources(cfg)
    assert S.shape == (5, 2000)
    np.testing.assert_array_equal(np.count_nonzero(S, axis=0), 2)
    mask = np.zeros_like(S, dtype=bool)
    mask[supports.ravel(), np.repeat(np.arange(2000), 2)] = True
    assert np.all(S[~mask] == 0.0)
    assert np.all(np.abs(S[mask]) >= datagen.ACTIVE_FLOOR)


def test_balanced_supports_are_exactly_uniform():
    cfg = datagen.GenConfig(m=3, n=5, T=2000, k=2, seed=3, support_mode="balanced")
    _, supports = datagen.gen_sparse_sources(cfg)
    _, counts = np.unique(supports, axis=0, return_counts=True)
    assert len(counts) == 10
    np.testing.assert_array_equal(counts, 200)


def test_noise_on_inactive_entries():
    cfg = datagen.GenConfig(m=3, n=5, T=2000, sigma_off=1e-3, seed=4)
    S, supports = datagen.gen_sparse_sources(cfg)
    mask = np.ones_like(S, dtype=bool)
    mask[supports.ravel(), np.repeat(np.arange(2000), 2)] = False
    assert np.std(S[mask]) == pytest.approx(1e-3, rel=0.05)


def test_mix_definition():
    rng = np.random.default_rng(5)
    S = rng.standard_normal((3, 10))
    np.testing.assert_array_equal(datagen.mix(np.eye(3), S), S)
    np.testing.assert_array_equal(datagen.mix(rng.standard_normal((2, 3)), np.zeros((3, 4))), 0.0)
    with pytest.raises(ShapeMismatch):
        datagen.mix(np.eye(3), np.ones((2, 4)))


def test_column_is_combination_of_its_support():
    ds = datagen.generate(datagen.GenConfig(m=3, n=5, T=50, seed=6))
    for t in range(50):
        q1, q2 = ds.supports[t]
        expected = ds.A[:, q1] * ds.S[q1, t] + ds.A[:, q2] * ds.S[q2, t]
        np.testing.assert_allclose(ds.X[:, t], expected, rtol=0, atol=1e-15)


@pytest.mark.parametrize("m,n,mode", [(3, 5, "uniform"), (4, 6, "balanced"), (2, 4, "uniform")])
def test_span_residual_invariant(m, n, mode):
    ds = datagen.generate(datagen.GenConfig(m=m, n=n, T=400, seed=7, support_mode=mode))
    for t in range(ds.X.shape[1]):
        Q, _ = np.linalg.qr(ds.A[:, ds.supports[t]])
        x = ds.X[:, t]
        assert np.linalg.norm(x - Q @ (Q.T @ x)) < 1e-12 * np.linalg.norm(x)


def test_generate_is_bit_reproducible():
    cfg = datagen.GenConfig(m=4, n=6, T=300, sigma_off=1e-3, seed=8)
    a, b = datagen.generate(cfg), datagen.generate(cfg)
    for name in ("A", "S", "X", "supports"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_sources_match_generate_stream():
    cfg = datagen.GenConfig(m=3, n=4, T=100, seed=9)
    S, _ = datagen.gen_sparse_sources(cfg)
    np.testing.assert_array_equal(S, datagen.generate(cfg).S)


@pytest.mark.parametrize("kwargs", [
    dict(m=3, n=2, T=100),
    dict(m=3, n=5, T=100, k=3),
    dict(m=3, n=5, T=20),
    dict(m=3, n=5, T=2000, sigma_off=-1.0),
    dict(m=3, n=5, T=2000, support_mode="nope"),
])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigError):
        datagen.GenConfig(**kwargs)


def test_large_noise_warns():
    with pytest.warns(UserWarning):
        datagen.GenConfig(m=3, n=5, T=2000, sigma_off=0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        datagen.GenConfig(m=3, n=5, T=2000, sigma_off=0.01)


def test_dataset_round_trip(tmp_path):
    ds = datagen.generate(datagen.GenConfig(m=3, n=5, T=100, sigma_off=1e-3, seed=10))
    datagen.save_dataset(ds, tmp_path)
    back = datagen.load_dataset(tmp_path)
    for name in ("A", "S", "X", "supports"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ds, name))
    assert back.config == ds.config
