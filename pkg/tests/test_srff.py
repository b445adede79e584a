import numpy as np
import pytest

from sparsereg import accel, srff
from sparsereg.kernels import gaussian, kernel_eval
from sparsereg.optim import SolverConfig


def test_sample_features_deterministic():
    s1 = srff.sample_features(5, 40, "normal", seed=123)
    s2 = srff.sample_features(5, 40, "normal", seed=123)
    assert np.array_equal(s1.eps, s2.eps)
    assert np.array_equal(s1.b, s2.b)
    assert s1.b.min() >= 0 and s1.b.max() < 2 * np.pi


def test_sample_features_validation():
    with pytest.raises(ValueError):
        srff.sample_features(3, 0)
    with pytest.raises(ValueError):
        srff.sample_features(3, 10, "uniform")


def test_sample_features_moments():
    s = srff.sample_features(100, 1000, "normal", seed=5)  # 1e5 draws
    assert abs(s.eps.mean()) < 0.02
    assert abs(s.eps.var() - 1.0) < 0.05


def test_feature_map_bounds_and_constant_gamma_zero():
    s = srff.sample_features(4, 30, seed=1)
    X = np.random.default_rng(0).standard_normal((7, 4))
    scale = np.sqrt(2 / 30)
    Z = srff.feature_map(s, np.zeros(4), X)
    assert np.allclose(Z, np.tile(scale * np.cos(s.b), (7, 1)))
    Z2 = srff.feature_map(s, np.ones(4), X)
    assert np.all(np.abs(Z2) <= scale + 1e-12)


def test_feature_map_kernel_approximation():
    # gamma = 1/sigma reproduces the Gaussian kernel of width sigma on average
    rng = np.random.default_rng(1)
    d, sigma, D = 6, 1.5, 300
    s = srff.sample_features(d, D, seed=10)
    gamma = np.full(d, 1.0 / sigma)
    errs = []
    spec = gaussian(sigma)
    for _ in range(100):
        x1, x2 = rng.standard_normal(d), rng.standard_normal(d)
        z = srff.feature_map(s, gamma, np.vstack([x1, x2]))
        errs.append(abs(z[0] @ z[1] - kernel_eval(spec, x1, x2)))
    assert np.mean(errs) < 0.05


def test_kernel_approximation_improves_with_D():
    rng = np.random.default_rng(43)
    d, sigma = 5, 1.0
    spec = gaussian(sigma)
    pairs = [(rng.standard_normal(d), rng.standard_normal(d)) for _ in range(100)]
    means = []
    for D in (50, 300, 2000):
        s = srff.sample_features(d, D, seed=11)
        gamma = np.full(d, 1.0 / sigma)
        errs = [
            abs(
                srff.feature_map(s, gamma, np.vstack([x1, x2]))[0]
                @ srff.feature_map(s, gamma, np.vstack([x1, x2]))[1]
                - kernel_eval(spec, x1, x2)
            )
            for x1, x2 in pairs
        ]
        means.append(np.mean(errs))
    assert means[0] > means[1] > means[2]


def test_gamma_gradient_trivial_zero_cases():
    s = srff.sample_features(3, 20, seed=2)
    rng = np.random.default_rng(3)
    X = rng.standard_normal((8, 3))
    gamma = np.array([0.4, 0.3, 0.3])
    a = rng.standard_normal(20)
    Z = srff.feature_map(s, gamma, X)
    g = srff.gamma_gradient(s, gamma, X, Z @ a, a)  # zero residual
    assert np.allclose(g, 0.0, atol=1e-12)
    X0 = X.copy()
    X0[:, 1] = 0.0
    g0 = srff.gamma_gradient(s, gamma, X0, rng.standard_normal(8), a)
    assert g0[1] == 0.0


def test_gamma_gradient_matches_finite_differences():
    s = srff.sample_features(5, 25, seed=4)
    rng = np.random.default_rng(6)
    X = rng.standard_normal((12, 5))
    y = rng.standard_normal(12)
    a = rng.standard_normal(25)
    gamma = np.abs(rng.standard_normal(5)) + 0.2

    def J(g):
        Z = srff.feature_map(s, g, X)
        return float(np.sum((y - Z @ a) ** 2))

    grad = srff.gamma_gradient(s, gamma, X, y, a)
    h = 1e-6
    for i in range(5):
        e = np.zeros(5)
        e[i] = h
        fd = (J(gamma + e) - J(gamma - e)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def _toy_problem(n=120, d=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.sin(X[:, 0] * X[:, 1]) + 0.05 * rng.standard_normal(n)
    return X, y


def test_srff_fit_invariants():
    X, y = _toy_problem()
    m = srff.srff_fit(X, y, lam=0.1, D=60, seed=3, cfg=SolverConfig(max_iter=15, tol=1e-6))
    assert m.gamma.min() >= 0
    assert m.gamma.sum() == pytest.approx(m.rho, abs=1e-9)
    # objective trace non-increasing across half-steps
    tr = np.array(m.objective_trace)
    assert np.all(tr[1:] <= tr[:-1] + 1e-8 * np.abs(tr[:-1]))


def test_srff_fit_deterministic():
    X, y = _toy_problem(seed=2)
    cfg = SolverConfig(max_iter=5, tol=1e-8)
    m1 = srff.srff_fit(X, y, 0.2, D=40, seed=7, cfg=cfg)
    m2 = srff.srff_fit(X, y, 0.2, D=40, seed=7, cfg=cfg)
    assert np.array_equal(m1.gamma, m2.gamma)
    assert np.array_equal(m1.a, m2.a)


def test_srff_constant_target():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((80, 4))
    y = np.full(80, 2.5)
    m = srff.srff_fit(X, y, lam=1e-6, D=50, seed=1, cfg=SolverConfig(max_iter=5, tol=1e-8))
    pred = srff.srff_predict(m, rng.standard_normal((30, 4)))
    assert np.sqrt(np.mean((pred - 2.5) ** 2)) < 0.1


def test_srff_predict_matches_manual_and_zero_a():
    s_model = srff.srff_fit(*_toy_problem(seed=5), lam=0.5, D=30, seed=2,
                            cfg=SolverConfig(max_iter=3, tol=1e-8))
    rng = np.random.default_rng(9)
    Xs = rng.standard_normal((10, 6))
    Z = srff.feature_map(s_model.sampler, s_model.gamma, Xs)
    assert np.array_equal(srff.srff_predict(s_model, Xs), Z @ s_model.a)
    s_model.a = np.zeros_like(s_model.a)
    assert np.all(srff.srff_predict(s_model, Xs) == 0)


def test_zero_scale_dimension_ignored():
    s = srff.sample_features(3, 15, seed=6)
    gamma = np.array([1.0, 0.0, 0.5])
    rng = np.random.default_rng(10)
    X = rng.standard_normal((6, 3))
    X2 = X.copy()
    X2[:, 1] += 100.0
    Z1 = srff.feature_map(s, gamma, X)
    Z2 = srff.feature_map(s, gamma, X2)
    assert np.array_equal(Z1, Z2)


def test_rff_fit_reduces_to_single_ridge():
    X, y = _toy_problem(seed=11)
    m = srff.rff_fit(X, y, lam=0.3, D=40, sigma=1.2, seed=4)
    assert np.allclose(m.gamma, 1 / 1.2)
    Z = srff.feature_map(m.sampler, m.gamma, X)
    ref = np.linalg.solve(Z.T @ Z + 0.3 * np.eye(40), Z.T @ y)
    assert np.allclose(m.a, ref)


def test_accel_paths_agree():
    rng = np.random.default_rng(12)
    P = rng.standard_normal((50, 30))
    b = rng.uniform(0, 2 * np.pi, 30)
    assert np.allclose(accel.cos_plus_phase(P, b, 0.7), 0.7 * np.cos(P + b), atol=1e-15)
    assert np.allclose(accel.sin_plus_phase(P, b), np.sin(P + b), atol=1e-15)
