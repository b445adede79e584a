import numpy as np
import pytest

from sparsereg import datasets, metrics
from sparsereg.granger_linear import (
    build_design,
    clvar_fit,
    forecast_onestep,
    granger_adjacency,
    sliding_holdout_eval,
    var1_to_design_weights,
    var_baseline_fit,
)
from sparsereg.optim import SolverConfig


def test_build_design_index_oracle():
    rng = np.random.default_rng(0)
    series = rng.normal(size=(17, 3))
    p = 4
    d = build_design(series, p)
    assert d.X.shape == (13, 12)
    assert np.array_equal(d.Y, series[p:])
    # brute-force index check: column (b, lag j) at row i equals y_{t-j,b}, t = p+i
    for i in range(d.T):
        t = p + i
        for b in range(3):
            for j in range(1, p + 1):
                assert d.X[i, b * p + j - 1] == series[t - j, b]


def test_build_design_validation():
    with pytest.raises(ValueError):
        build_design(np.zeros(10), 2)
    with pytest.raises(ValueError):
        build_design(np.zeros((5, 2)), 0)
    with pytest.raises(ValueError):
        build_design(np.zeros((3, 2)), 3)


def test_varl2_normal_equations_oracle():
    rng = np.random.default_rng(1)
    series = rng.normal(size=(60, 4))
    d = build_design(series, 3)
    lam = 0.7
    W = var_baseline_fit(d, "VARL2", lam)
    resid = (d.X.T @ d.X + lam * np.eye(12)) @ W - d.X.T @ d.Y
    assert np.max(np.abs(resid)) < 1e-8


def test_ar_block_diagonal_and_closed_form():
    rng = np.random.default_rng(2)
    series = rng.normal(size=(80, 3))
    d = build_design(series, 2)
    lam = 0.3
    W = var_baseline_fit(d, "AR", lam)
    for k in range(3):
        blk = d.block(k)
        Xk = d.X[:, blk]
        expect = np.linalg.solve(Xk.T @ Xk + lam * np.eye(2), Xk.T @ d.Y[:, k])
        assert np.allclose(W[blk, k], expect, atol=1e-10)
        off = W[:, k].copy()
        off[blk] = 0.0
        assert np.all(off == 0.0)


def test_varl1_lambda_max_threshold():
    rng = np.random.default_rng(3)
    series = rng.normal(size=(70, 3))
    d = build_design(series, 2)
    lam_max = 2.0 * np.max(np.abs(d.X.T @ d.Y))
    assert np.all(var_baseline_fit(d, "VARL1", lam_max * 1.001) == 0.0)
    assert np.any(var_baseline_fit(d, "VARL1", lam_max * 0.5) != 0.0)


def test_varl1_stationarity_oracle():
    rng = np.random.default_rng(4)
    series = rng.normal(size=(90, 2))
    d = build_design(series, 2)
    lam = 5.0
    W = var_baseline_fit(d, "VARL1", lam, cfg=SolverConfig(max_iter=20_000, tol=1e-14))
    # subgradient optimality of ||y - Xw||^2 + lam ||w||_1 per task
    for k in range(2):
        g = 2.0 * d.X.T @ (d.X @ W[:, k] - d.Y[:, k])
        active = W[:, k] != 0.0
        assert np.allclose(g[active], -lam * np.sign(W[active, k]), atol=5e-3)
        assert np.all(np.abs(g[~active]) <= lam * (1 + 1e-3))


def test_varlg_zeroes_whole_blocks():
    rng = np.random.default_rng(5)
    series = rng.normal(size=(60, 4))
    d = build_design(series, 3)
    W = var_baseline_fit(d, "VARLG", 200.0)
    any_zero_block = False
    for k in range(4):
        for b in range(4):
            blk = W[d.block(b), k]
            assert np.all(blk == 0.0) or np.all(blk != 0.0)
            any_zero_block = any_zero_block or np.all(blk == 0.0)
    assert any_zero_block
    assert np.all(var_baseline_fit(d, "VARLG", 1e9) == 0.0)


def test_baseline_validation():
    d = build_design(np.random.default_rng(0).normal(size=(20, 2)), 1)
    with pytest.raises(ValueError):
        var_baseline_fit(d, "nope", 1.0)
    with pytest.raises(ValueError):
        var_baseline_fit(d, "VARL2", 0.0)


def _toy_design(seed=6, T=120, K=5, p=2):
    series, _ = datasets.gen_var(K, 1, 1, T, seed=seed)
    return build_design(series, p)


def test_clvar_constraints_and_monotone_objective():
    d = _toy_design()
    m = clvar_fit(d, lam=1.0, kappa=1.5, r=2)
    assert np.allclose(np.diag(m.Gamma), 1.0)
    assert np.all(m.D >= -1e-12)
    assert np.allclose(m.D.sum(axis=0), 1.5, atol=1e-10)
    assert np.all(m.G >= -1e-12)
    assert np.allclose(m.G.sum(axis=0), 1.0, atol=1e-10)
    tr = np.array(m.objective_trace)
    assert len(tr) >= 2
    assert np.all(np.diff(tr) <= 1e-8 * np.maximum(1.0, tr[:-1]))


def test_clvar_rank_one_shares_dependencies():
    d = _toy_design(seed=7)
    m = clvar_fit(d, lam=0.5, kappa=1.0, r=1)
    # one-dimensional probability simplex pins every weight at 1, so all
    # tasks share a single off-diagonal dependency vector
    assert np.allclose(m.G, 1.0)
    A = m.A
    for k in range(1, d.K):
        assert np.allclose(A[:, k], A[:, 0], atol=1e-12)


def test_clvar_validation():
    d = _toy_design()
    with pytest.raises(ValueError):
        clvar_fit(d, lam=1.0, kappa=1.0, r=0)
    with pytest.raises(ValueError):
        clvar_fit(d, lam=1.0, kappa=1.0, r=99)
    with pytest.raises(ValueError):
        clvar_fit(d, lam=-1.0, kappa=1.0, r=1)


def test_clvar_w_combines_gamma_and_v():
    d = _toy_design(seed=8)
    m = clvar_fit(d, lam=1.0, kappa=1.0, r=2, cfg=SolverConfig(max_iter=5, tol=1e-12))
    for b in range(d.K):
        for k in range(d.K):
            blk = d.block(b)
            assert np.allclose(m.W[blk, k], m.Gamma[b, k] * m.V[blk, k], atol=1e-14)


def test_adjacency_thresholding():
    p, K = 2, 3
    W = np.zeros((K * p, K))
    W[0, 0] = 1.0  # series 0 -> task 0
    W[3, 2] = 0.5  # series 1 (lag 2) -> task 2
    W[4, 1] = 1e-9  # below relative tolerance
    adj = granger_adjacency(W, p)
    expect = np.zeros((K, K), dtype=int)
    expect[0, 0] = 1
    expect[1, 2] = 1
    assert np.array_equal(adj, expect)
    assert granger_adjacency(np.zeros((6, 3)), 2).sum() == 0
    with pytest.raises(ValueError):
        granger_adjacency(np.zeros((5, 3)), 2)


def test_noiseless_oracle_forecasts_exact():
    rng = np.random.default_rng(9)
    K = 4
    A = rng.normal(size=(K, K)) * 0.2
    series = np.empty((60, K))
    series[0] = rng.normal(size=K)
    for t in range(1, 60):
        series[t] = A.T @ series[t - 1]
    p = 3
    W = var1_to_design_weights(A, p)
    fc = sliding_holdout_eval(W, series, holdout_len=20, p=p)
    assert np.allclose(fc, series[-20:], atol=1e-10)


def test_forecast_onestep_matches_design_rows():
    d = _toy_design(seed=10)
    W = var_baseline_fit(d, "VARL2", 0.5)
    full = d.X @ W
    assert np.allclose(forecast_onestep(W, d.X[4]), full[4], atol=1e-12)
    with pytest.raises(ValueError):
        sliding_holdout_eval(W, np.zeros((10, 5)), 0, 2)


def test_clvar_recovers_cluster_structure():
    series, info = datasets.gen_var(10, 2, 1, 600, seed=11)
    d = build_design(series, 5)
    m = clvar_fit(d, lam=40.0, kappa=1.0, r=2)
    adj = granger_adjacency(m.W, d.p, tol=1e-2)
    err = metrics.sel_error(adj, info.adjacency)
    dense_err = metrics.sel_error(np.ones((10, 10), dtype=int), info.adjacency)
    assert err < dense_err
    # own-history diagonal always survives (Gamma has unit diagonal)
    assert np.all(np.diag(adj) == 1)
