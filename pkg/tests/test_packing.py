"""Greedy codeword packings, sign embeddings, and certified hypothesis sets."""

import itertools
import math
import warnings

import numpy as np
import pytest

from structmc import (
    Alphabet,
    ConstructionError,
    ParameterError,
    StructureSpec,
    build_t_b,
    build_t_z,
    kl_divergence,
    sign_embedding,
    sparse_binary_packing,
)

from conftest import BINARY


def packing_spec(n=24, m=10, k_n=24, k_m=6, s_n=1, s_m=2, **kw):
    kw.setdefault("b_max", 2.0)
    kw.setdefault("theta_mx", 5.0)
    kw.setdefault("bounded", True)
    return StructureSpec(n=n, m=m, k_n=k_n, k_m=k_m, s_n=s_n, s_m=s_m,
                         alphabet_n=BINARY, alphabet_m=BINARY, **kw)


def pairwise(items):
    return itertools.combinations(range(len(items)), 2)


# ---- binary packings ------------------------------------------------------- #

def test_packing_invariants_recomputed():
    pack = sparse_binary_packing(k=12, s=3, seed=0)
    c1, c2, c3 = pack.constants
    codes = pack.codewords
    assert codes.ndim == 2 and codes.shape[1] == 12
    assert set(np.unique(codes)) <= {0.0, 1.0}
    weights = codes.sum(axis=1)
    assert np.all(weights <= 3) and np.all(weights >= c2 * 3)
    for i, j in pairwise(codes):
        assert np.sum(np.abs(codes[i] - codes[j])) >= c3 * 3
    assert math.log(len(codes)) >= c1 * 3 * math.log(math.e * 12 / 3) - 1e-12


def test_packing_deterministic_and_seed_sensitive():
    a = sparse_binary_packing(k=10, s=2, seed=4)
    b = sparse_binary_packing(k=10, s=2, seed=4)
    np.testing.assert_array_equal(a.codewords, b.codewords)
    c = sparse_binary_packing(k=10, s=2, seed=5)
    assert a.codewords.shape != c.codewords.shape or not np.array_equal(
        a.codewords, c.codewords)


def test_packing_parameter_validation():
    with pytest.raises(ParameterError):
        sparse_binary_packing(k=1, s=1)
    with pytest.raises(ParameterError):
        sparse_binary_packing(k=5, s=0)
    with pytest.raises(ParameterError):
        sparse_binary_packing(k=5, s=6)


def test_packing_fails_loud_on_impossible_targets():
    # separation above the max possible Hamming distance leaves one codeword
    with pytest.raises(ConstructionError):
        sparse_binary_packing(k=6, s=2, target_c=(0.5, 0.5, 3.0), seed=0)


# ---- sign embeddings -------------------------------------------------------- #

def test_sign_embedding_certifies_all_pairs():
    rng = np.random.default_rng(0)
    vectors = sparse_binary_packing(k=6, s=2, seed=1).codewords[:6]
    r = 48
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        q = sign_embedding(r, vectors, seed=2)
    assert q.shape == (r, 6)
    assert set(np.unique(q)) <= {-1.0, 1.0}
    for i, j in pairwise(vectors):
        d = vectors[i] - vectors[j]
        dn = float(d @ d)
        qn = float(np.sum((q @ d) ** 2))
        assert r * dn / 2 - 1e-9 <= qn <= 3 * r * dn / 2 + 1e-9


def test_sign_embedding_deterministic():
    vectors = np.eye(4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = sign_embedding(32, vectors, seed=7)
        b = sign_embedding(32, vectors, seed=7)
    np.testing.assert_array_equal(a, b)


def test_sign_embedding_warns_when_rows_are_scarce():
    with pytest.warns(UserWarning):
        sign_embedding(16, np.eye(3), seed=0)


def test_sign_embedding_gives_up_gracefully():
    # r = 2 rows cannot certify many well-spread pairs
    vectors = sparse_binary_packing(k=10, s=3, seed=3).codewords
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ConstructionError, match="resample|draw"):
            sign_embedding(2, vectors, seed=0, max_resamples=20)


# ---- row-assignment hypothesis sets ------------------------------------------ #

def test_t_z_certificates_hold_exhaustively():
    spec = packing_spec()
    sigma, p = 1.0, 0.7
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        hs = build_t_z(spec, sigma=sigma, p=p, c0=0.5, seed=0, cap=8)
    assert hs.kind == "t_z"
    assert len(hs.thetas) >= 2
    mind = min(float(np.sum((hs.thetas[i] - hs.thetas[j]) ** 2))
               for i, j in pairwise(hs.thetas))
    maxkl = max(kl_divergence(hs.thetas[i], hs.thetas[j], p, sigma)
                for i, j in pairwise(hs.thetas))
    assert mind >= hs.min_sq_distance - 1e-9
    assert maxkl <= hs.max_kl + 1e-9
    assert hs.delta > 0


def test_t_z_members_lie_in_the_class_shape():
    spec = packing_spec()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        hs = build_t_z(spec, sigma=0.5, p=1.0, c0=0.25, seed=3, cap=4)
    for theta in hs.thetas:
        assert theta.shape == (spec.n, spec.m)


def test_t_z_deterministic():
    spec = packing_spec()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = build_t_z(spec, sigma=1.0, p=0.5, c0=0.5, seed=11, cap=4)
        b = build_t_z(spec, sigma=1.0, p=0.5, c0=0.5, seed=11, cap=4)
    assert len(a.thetas) == len(b.thetas)
    for ta, tb in zip(a.thetas, b.thetas):
        np.testing.assert_array_equal(ta, tb)


def test_t_z_validation():
    spec = packing_spec()
    with pytest.raises(ParameterError):
        build_t_z(spec, sigma=0.0, p=0.5, c0=0.5)
    with pytest.raises(ParameterError):
        build_t_z(spec, sigma=1.0, p=1.5, c0=0.5)
    thin = packing_spec(k_m=1, s_m=1)
    with pytest.raises(ParameterError):
        build_t_z(thin, sigma=1.0, p=0.5, c0=0.5)


# ---- middle-factor hypothesis sets ------------------------------------------- #

def test_t_b_certificates_hold_exhaustively():
    spec = packing_spec(n=12, m=12, k_n=6, k_m=6, s_n=1, s_m=1)
    sigma, p = 1.0, 0.6
    hs = build_t_b(spec, sigma=sigma, p=p, c0=0.8, seed=0, cap=16)
    assert hs.kind == "t_b"
    assert len(hs.thetas) >= 2
    mind = min(float(np.sum((hs.thetas[i] - hs.thetas[j]) ** 2))
               for i, j in pairwise(hs.thetas))
    maxkl = max(kl_divergence(hs.thetas[i], hs.thetas[j], p, sigma)
                for i, j in pairwise(hs.thetas))
    assert mind >= hs.min_sq_distance - 1e-9
    assert maxkl <= hs.max_kl + 1e-9


def test_t_b_trivial_branch_on_tiny_grids():
    # r_n * r_m < 16: the set degenerates to {0, delta*E11}
    spec = packing_spec(n=3, m=3, k_n=2, k_m=2, s_n=1, s_m=1)
    hs = build_t_b(spec, sigma=1.0, p=1.0, c0=1.0, seed=0)
    assert len(hs.thetas) == 2
    diff = hs.thetas[1] - hs.thetas[0]
    assert np.count_nonzero(diff) == 1
    assert float(np.sum(diff ** 2)) == pytest.approx(hs.delta ** 2, rel=1e-12)
    assert hs.max_kl == pytest.approx(
        kl_divergence(hs.thetas[0], hs.thetas[1], 1.0, 1.0), rel=1e-9)


def test_t_b_respects_cap():
    spec = packing_spec(n=12, m=12, k_n=6, k_m=6, s_n=1, s_m=1)
    hs = build_t_b(spec, sigma=1.0, p=1.0, c0=0.5, seed=0, cap=5)
    assert 2 <= len(hs.thetas) <= 5


def test_t_b_deterministic():
    spec = packing_spec(n=12, m=12, k_n=6, k_m=6, s_n=1, s_m=1)
    a = build_t_b(spec, sigma=1.0, p=0.9, c0=0.5, seed=6, cap=8)
    b = build_t_b(spec, sigma=1.0, p=0.9, c0=0.5, seed=6, cap=8)
    for ta, tb in zip(a.thetas, b.thetas):
        np.testing.assert_array_equal(ta, tb)
