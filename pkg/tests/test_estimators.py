"""Least-squares solvers, spectral thresholding, and adaptive selection."""

import itertools
import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import structmc.estimators as est
from structmc import (
    Alphabet,
    EnumerationRefusal,
    Factorization,
    Observation,
    ParameterError,
    SolverConfig,
    StructureSpec,
    adaptive_penalized,
    assemble,
    block_coordinate_ls,
    derive_seed,
    exact_least_squares,
    hard_threshold,
    penalty,
    solve_b_given_xz,
    spectral_threshold,
)

from conftest import BINARY, SYMMETRIC, member_of, small_specs


def binary_spec(n=4, m=4, k=2, s=1, **kw):
    return StructureSpec(n=n, m=m, k_n=k, k_m=k, s_n=s, s_m=s,
                         alphabet_n=BINARY, alphabet_m=BINARY, **kw)


def full_obs(y, p=1.0, **kw):
    return Observation(y=np.asarray(y, float), mask=np.ones_like(np.asarray(y, float)),
                       p=p, **kw)


# ---- configuration -------------------------------------------------------- #

def test_solver_config_validation():
    for bad in (dict(restarts=0), dict(max_iterations=0), dict(tol=0.0),
                dict(exhaustive_limit=0)):
        with pytest.raises(ParameterError):
            SolverConfig(**bad)


def test_result_objective_never_negative():
    r = est.EstimateResult(theta_hat=np.zeros((2, 2)), objective=-1e-18)
    assert r.objective == 0.0


def test_row_candidate_count_hand_values():
    assert est.row_candidate_count(2, 1, BINARY) == 5      # 1 + C(2,1)*2
    assert est.row_candidate_count(3, 2, BINARY) == 19     # 1 + 6 + 12
    assert est.row_candidate_count(4, 0, BINARY) == 1
    with pytest.raises(ParameterError):
        est.row_candidate_count(3, 1, SYMMETRIC)           # needs a finite set


# ---- middle-factor solve --------------------------------------------------- #

def test_solve_b_full_mask_matches_normal_equations():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 2))
    z = rng.normal(size=(5, 2))
    b_true = rng.normal(size=(2, 2))
    obs = full_obs(x @ b_true @ z.T)
    np.testing.assert_allclose(solve_b_given_xz(obs, x, z), b_true, atol=1e-10)


def test_solve_b_masked_matches_kron_lstsq():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 2))
    z = rng.normal(size=(4, 2))
    y = rng.normal(size=(5, 4))
    mask = (rng.random((5, 4)) < 0.6).astype(float)
    obs = Observation(y=y * mask, mask=mask, p=1.0)
    got = solve_b_given_xz(obs, x, z)
    w = mask.astype(bool).ravel()
    design = np.kron(x, z)[w]                  # row-major vec convention
    coef, *_ = np.linalg.lstsq(design, y.ravel()[w], rcond=None)
    np.testing.assert_allclose(got.ravel(), coef, atol=1e-8)


def test_solve_b_rescales_by_p():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 2))
    z = rng.normal(size=(6, 2))
    y = rng.normal(size=(6, 6))
    b1 = solve_b_given_xz(full_obs(y, p=1.0), x, z)
    b2 = solve_b_given_xz(full_obs(y, p=0.5), x, z)
    np.testing.assert_allclose(b2, 2 * b1, atol=1e-10)


# ---- exact enumeration ----------------------------------------------------- #

def brute_force_min(yp, mask, spec):
    """Independent oracle: enumerate all row assignments, kron-design lstsq."""
    def rows_of(k, s, alph):
        pool = {(0.0,) * k}
        for supp in itertools.combinations(range(k), s):
            for vals in itertools.product(alph.values, repeat=s):
                row = [0.0] * k
                for j, v in zip(supp, vals):
                    row[j] = v
                pool.add(tuple(row))
        return [np.array(r) for r in sorted(pool)]

    w = mask.astype(bool).ravel()
    yv = yp.ravel()[w]
    best = np.inf
    for xs in itertools.product(rows_of(spec.k_n, spec.s_n, spec.alphabet_n),
                                repeat=spec.n):
        x = np.array(xs)
        for zs in itertools.product(rows_of(spec.k_m, spec.s_m, spec.alphabet_m),
                                    repeat=spec.m):
            z = np.array(zs)
            design = np.kron(x, z)[w]
            coef, *_ = np.linalg.lstsq(design, yv, rcond=None)
            r = yv - design @ coef
            best = min(best, float(r @ r))
    return best


@pytest.mark.parametrize("seed", range(4))
def test_exact_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    spec = binary_spec(n=3, m=3, k=2, s=1)
    y = rng.normal(size=(3, 3))
    mask = np.ones((3, 3)) if seed % 2 else (rng.random((3, 3)) < 0.7).astype(float)
    obs = Observation(y=y * mask, mask=mask, p=1.0)
    got = exact_least_squares(obs, spec, SolverConfig())
    want = brute_force_min(y, mask, spec)
    assert got.objective == pytest.approx(want, abs=1e-9)
    assert got.iterations > 0
    assert got.factorization is not None
    fit = assemble(got.factorization)
    np.testing.assert_allclose(fit, got.theta_hat)


def test_exact_refuses_oversized_enumerations():
    spec = binary_spec(n=4, m=4, k=2, s=1)
    obs = full_obs(np.zeros((4, 4)))
    with pytest.raises(EnumerationRefusal, match="block_coordinate_ls"):
        exact_least_squares(obs, spec, SolverConfig(exhaustive_limit=10))


def test_exact_rejects_interval_alphabets():
    spec = StructureSpec(n=2, m=2, k_n=2, k_m=2, s_n=1, s_m=1,
                         alphabet_n=SYMMETRIC, alphabet_m=BINARY)
    with pytest.raises(ParameterError):
        exact_least_squares(full_obs(np.zeros((2, 2))), spec, SolverConfig())


def test_exact_recovers_planted_member():
    rng = np.random.default_rng(5)
    spec = binary_spec(n=4, m=3, k=2, s=1)
    x, b, z = member_of(spec, rng)
    theta = x @ b @ z.T
    got = exact_least_squares(full_obs(theta), spec, SolverConfig())
    assert got.objective <= 1e-18
    np.testing.assert_allclose(got.theta_hat, theta, atol=1e-9)


# ---- block coordinate descent ---------------------------------------------- #

def test_bcd_objective_is_monotone_along_sweeps():
    rng = np.random.default_rng(3)
    spec = binary_spec(n=5, m=5, k=2, s=1)
    obs = full_obs(rng.normal(size=(5, 5)))
    trace: list = []
    # single restart: the trace is one descent path
    block_coordinate_ls(obs, spec, SolverConfig(restarts=1), seed=0, trace=trace)
    assert len(trace) >= 1
    assert all(b <= a + 1e-9 * (1 + abs(a)) for a, b in zip(trace, trace[1:]))


@settings(max_examples=15)
@given(small_specs(finite_only=True, max_dim=4), st.integers(0, 1000))
def test_bcd_never_beats_exact(spec, seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=(spec.n, spec.m))
    obs = full_obs(y)
    cfg = SolverConfig(restarts=3)
    try:
        ex = exact_least_squares(obs, spec, cfg)
    except EnumerationRefusal:
        return                                 # instance too wide to enumerate
    bc = block_coordinate_ls(obs, spec, cfg, seed=seed)
    assert bc.objective >= ex.objective - 1e-9 * (1 + ex.objective)


def test_bcd_identity_pinning_at_zero_sparsity():
    spec = StructureSpec(n=4, m=4, k_n=4, k_m=2, s_n=0, s_m=1,
                         alphabet_n=BINARY, alphabet_m=BINARY)
    rng = np.random.default_rng(8)
    obs = full_obs(rng.normal(size=(4, 4)))
    got = block_coordinate_ls(obs, spec, SolverConfig(restarts=2), seed=1)
    np.testing.assert_array_equal(got.factorization.x, np.eye(4))


def test_bcd_interval_alphabet_descends():
    # nonconvex: exact recovery is not guaranteed at every seed, but the fit
    # must land far below the zero fit and stay inside the alphabet box
    spec = StructureSpec(n=6, m=6, k_n=2, k_m=2, s_n=1, s_m=1,
                         alphabet_n=SYMMETRIC, alphabet_m=SYMMETRIC)
    rng = np.random.default_rng(4)
    x, b, z = member_of(spec, rng)
    theta = x @ b @ z.T
    got = block_coordinate_ls(full_obs(theta), spec, SolverConfig(), seed=0)
    assert got.objective <= 0.25 * float(np.sum(theta * theta))
    assert np.abs(got.factorization.x).max() <= 1.0 + 1e-12
    assert np.abs(got.factorization.z).max() <= 1.0 + 1e-12


def test_bcd_respects_bounded_caps():
    spec = StructureSpec(n=5, m=5, k_n=2, k_m=2, s_n=1, s_m=1,
                         alphabet_n=SYMMETRIC, alphabet_m=SYMMETRIC,
                         b_max=0.3, theta_mx=10.0, bounded=True)
    rng = np.random.default_rng(6)
    obs = full_obs(rng.normal(size=(5, 5)) * 3)
    got = block_coordinate_ls(obs, spec, SolverConfig(restarts=2), seed=2)
    assert np.abs(got.factorization.b).max() <= 0.3 + 1e-12


def test_bcd_deterministic_in_seed():
    spec = binary_spec()
    rng = np.random.default_rng(9)
    obs = full_obs(rng.normal(size=(4, 4)))
    a = block_coordinate_ls(obs, spec, SolverConfig(restarts=2), seed=5)
    b = block_coordinate_ls(obs, spec, SolverConfig(restarts=2), seed=5)
    np.testing.assert_array_equal(a.theta_hat, b.theta_hat)
    assert a.objective == b.objective


def test_bcd_refuses_unenumerable_rows():
    # per-row candidate count guard, same ceiling as the exact path
    alph = Alphabet.finite(tuple(float(v) for v in range(10)))
    spec = StructureSpec(n=3, m=3, k_n=12, k_m=12, s_n=6, s_m=6,
                         alphabet_n=alph, alphabet_m=alph)
    with pytest.raises(EnumerationRefusal):
        block_coordinate_ls(full_obs(np.zeros((3, 3))), spec, SolverConfig(), seed=0)


# ---- spectral thresholding -------------------------------------------------- #

def test_hard_threshold_keeps_large_singular_values():
    rng = np.random.default_rng(11)
    y = rng.normal(size=(8, 6))
    sv = np.linalg.svd(y, compute_uv=False)
    lam = float(sv[2]) - 1e-9                             # keep exactly 3
    got = hard_threshold(full_obs(y), lam)
    kept = np.linalg.svd(got.theta_hat, compute_uv=False)
    assert np.linalg.matrix_rank(got.theta_hat, tol=1e-8) == 3
    np.testing.assert_allclose(kept[:3], sv[:3], atol=1e-9)
    assert got.objective == pytest.approx(float(np.sum(sv[3:] ** 2)), rel=1e-9)


def test_hard_threshold_extremes():
    rng = np.random.default_rng(12)
    y = rng.normal(size=(5, 5))
    full = hard_threshold(full_obs(y), 0.0)
    np.testing.assert_allclose(full.theta_hat, y, atol=1e-9)
    dead = hard_threshold(full_obs(y), 1e6)
    np.testing.assert_array_equal(dead.theta_hat, np.zeros((5, 5)))
    with pytest.raises(ParameterError):
        hard_threshold(full_obs(y), -0.1)


def test_hard_threshold_rescales_by_p():
    rng = np.random.default_rng(13)
    y = rng.normal(size=(5, 5))
    a = hard_threshold(full_obs(y, p=0.5), 0.0)
    np.testing.assert_allclose(a.theta_hat, 2 * y, atol=1e-9)


@given(st.integers(0, 10_000))
def test_hard_threshold_estimate_svs_are_a_subset(seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=(6, 4))
    lam = float(rng.uniform(0.5, 4.0))
    got = hard_threshold(full_obs(y), lam)
    sv = np.linalg.svd(y, compute_uv=False)
    kept = np.linalg.svd(got.theta_hat, compute_uv=False)
    expect = np.where(sv >= lam, sv, 0.0)
    np.testing.assert_allclose(np.sort(kept), np.sort(expect), atol=1e-9)


def test_spectral_threshold_hand_values():
    assert spectral_threshold(3.0, 1.0, 60, 60, 0.3, c=3.0) == pytest.approx(
        169.7056274847714, rel=1e-12)
    assert spectral_threshold(3.0, 1.0, 60, 60, 1.0, c=3.0) == pytest.approx(
        92.95160030897802, rel=1e-12)
    with pytest.raises(ParameterError):
        spectral_threshold(3.0, 1.0, 60, 60, 0.0, c=3.0)


def test_spectral_threshold_warns_in_sparse_regime():
    # p below log(n+m)/max(n,m): the calibration is outside its guarantee
    with pytest.warns(UserWarning):
        spectral_threshold(1.0, 1.0, 20, 20, 0.01, c=1.0)


# ---- adaptive selection ------------------------------------------------------ #

def adaptive_case(n=8, sigma=0.1, seed=21):
    alph = SYMMETRIC
    base = StructureSpec(n=n, m=n, k_n=2, k_m=2, s_n=1, s_m=1,
                         alphabet_n=alph, alphabet_m=alph,
                         b_max=1.0, theta_mx=1.0, bounded=True)
    rng = np.random.default_rng(seed)
    x, b, z = member_of(base, rng)
    theta = x @ b @ z.T
    y = theta + sigma * rng.normal(size=theta.shape)
    return base, full_obs(y, sigma=sigma)


def test_adaptive_matches_grid_oracle():
    base, obs = adaptive_case()
    lam = 0.05
    cfg = SolverConfig(restarts=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        got = adaptive_penalized(obs, base, lam, cfg, seed=3)
    cells = {}
    for sn in range(1, base.k_n + 1):
        for sm in range(1, base.k_m + 1):
            cell = replace(base, s_n=sn, s_m=sm)
            r = block_coordinate_ls(obs, cell, cfg, seed=3, path=(sn, sm))
            cells[(sn, sm)] = r.objective + lam * penalty(sn, sm, base)
    best = min(cells.values())
    assert got.objective == pytest.approx(best, abs=1e-9)
    assert cells[got.selected_s] == pytest.approx(best, abs=1e-9)


def test_adaptive_prefers_small_support_under_heavy_penalty():
    base, obs = adaptive_case()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        got = adaptive_penalized(obs, base, 100.0, SolverConfig(restarts=1), seed=0)
    assert got.selected_s == (1, 1)


def test_adaptive_validation():
    base, obs = adaptive_case()
    with pytest.raises(ParameterError):
        adaptive_penalized(obs, base, 0.0, SolverConfig(), seed=0)


def test_adaptive_warns_below_calibrated_regime():
    base, obs = adaptive_case(n=3)
    with pytest.warns(UserWarning):
        adaptive_penalized(obs, base, 1.0, SolverConfig(restarts=1), seed=0)
