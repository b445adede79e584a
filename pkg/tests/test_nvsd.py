import numpy as np
import pytest

from sparsereg import datasets, nvsd
from sparsereg.kernels import gaussian, gram_matrix, kernel_eval, krr_fit, krr_predict, polynomial


def _small_problem(n=12, d=3, seed=0, spec=None):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(n)
    spec = spec or gaussian(1.5)
    return nvsd.assemble(X, y, spec)


def test_assemble_shapes():
    p = _small_problem(n=7, d=4)
    n, d, m = 7, 4, 7 * 5
    assert p.F.shape == (n, m)
    assert p.Z.shape == (d * n, m)
    assert p.Q.shape == (m, m)
    assert p.K.shape == (n, n)
    assert np.allclose(p.K, p.K.T)
    assert np.array_equal(p.F, np.hstack([p.K, p.D.T]))


def test_assemble_memory_guard():
    rng = np.random.default_rng(0)
    with pytest.raises(MemoryError):
        nvsd.assemble(rng.standard_normal((200, 100)), rng.standard_normal(200), gaussian(1.0))


def test_loss_matches_pointwise_finite_difference_oracle():
    # (1/n)||y - F w||^2 equals the empirical loss of the represented model
    # evaluated point by point with finite-difference kernel derivatives
    p = _small_problem(n=6, d=3, seed=1)
    rng = np.random.default_rng(2)
    omega = rng.standard_normal(p.m)
    alpha, beta = omega[: p.n], omega[p.n :]
    h = 1e-5
    f = np.zeros(p.n)
    for j in range(p.n):
        for i in range(p.n):
            f[j] += alpha[i] * kernel_eval(p.spec, p.X[i], p.X[j])
            for a in range(p.d):
                e = np.zeros(p.d)
                e[a] = h
                fd = (
                    kernel_eval(p.spec, p.X[i] + e, p.X[j])
                    - kernel_eval(p.spec, p.X[i] - e, p.X[j])
                ) / (2 * h)
                f[j] += beta[a * p.n + i] * fd
    loss_pointwise = np.mean((p.y - f) ** 2)
    loss_matrix = np.sum((p.y - p.F @ omega) ** 2) / p.n
    assert loss_matrix == pytest.approx(loss_pointwise, rel=1e-6)


def test_quad_matches_block_expansion():
    p = _small_problem(n=8, d=2, seed=3, spec=polynomial(3))
    rng = np.random.default_rng(4)
    omega = rng.standard_normal(p.m)
    alpha, beta = omega[: p.n], omega[p.n :]
    expansion = alpha @ p.K @ alpha + 2 * alpha @ (p.D.T @ beta) + beta @ (p.L @ beta)
    assert p.quad(omega) == pytest.approx(expansion, rel=1e-12)
    # squared Hilbert norm of the represented function: non-negative
    assert p.quad(omega) > -1e-8


def test_tau_zero_matches_direct_quadratic_solve():
    # moderate size and width keep the quadratic well conditioned (~1e6)
    p = _small_problem(n=8, d=3, seed=5, spec=gaussian(2.0))
    nu = 0.5
    direct = nvsd.ridge_omega(p, nu)
    cfg = nvsd.NvsdConfig(max_iter=20000, primal_tol=1e-11, dual_tol=1e-11,
                          adapt_kappa=False)
    model = nvsd.admm_fit(p, nvsd.RegularizerSpec("l"), tau=0.0, nu=nu, cfg=cfg)
    assert model.converged
    assert np.linalg.norm(model.omega - direct) / np.linalg.norm(direct) < 1e-6


@pytest.mark.parametrize(
    "reg",
    [
        nvsd.RegularizerSpec("l"),
        nvsd.RegularizerSpec("gl", groups=[(0, 1), (2,)]),
        nvsd.RegularizerSpec("en", mu=0.7),
    ],
)
def test_phi_blocks_satisfy_prox_stationarity(reg):
    # each phi block is exactly zero (with ||v|| under the threshold) or
    # satisfies the stationarity condition of its proximal problem
    p = _small_problem(n=10, d=3, seed=6)
    taus = nvsd.tau_grid(p, reg, nu=1e-6, n_tau=8)
    cfg = nvsd.NvsdConfig(max_iter=3000, primal_tol=1e-8, dual_tol=1e-8)
    model = nvsd.admm_fit(p, reg, float(taus[4]), nu=1e-6, cfg=cfg)
    assert model.converged
    n = p.n
    v = model.phi + model.dual  # prox argument of the final update
    tau, kappa = model.tau, model.kappa
    for dims, w in reg.dimension_blocks(p.d):
        rows = np.concatenate([np.arange(a * n, (a + 1) * n) for a in dims])
        phi_b, v_b = model.phi[rows], v[rows]
        if not np.any(phi_b):
            thresh = tau * (reg.mu if reg.kind == "en" else w) / (kappa * np.sqrt(n))
            assert np.linalg.norm(v_b) <= thresh + 1e-10
            continue
        grad = kappa * (phi_b - v_b)
        if reg.kind == "en":
            grad = grad + tau * reg.mu / np.sqrt(n) * phi_b / np.linalg.norm(phi_b)
            grad = grad + 2 * tau * (1 - reg.mu) / n * phi_b
        else:
            grad = grad + tau * w / np.sqrt(n) * phi_b / np.linalg.norm(phi_b)
        assert np.linalg.norm(grad) < 1e-8 * max(1.0, kappa * np.linalg.norm(v_b))


def test_residuals_enforced_and_zero_blocks_exact():
    X, y, info = datasets.gen_e("E1", 40, seed=1)
    p = nvsd.assemble(X, y, polynomial(3))
    reg = nvsd.RegularizerSpec("gl", groups=[tuple(g) for g in info.groups])
    taus = nvsd.tau_grid(p, reg, nu=1e-6, n_tau=10)
    cfg = nvsd.NvsdConfig(max_iter=4000, primal_tol=1e-4, dual_tol=1e-4)
    model = nvsd.admm_fit(p, reg, float(taus[5]), nu=1e-6, cfg=cfg)
    assert model.converged
    assert model.primal_residual < 1e-4
    assert model.dual_residual < 1e-4
    n = p.n
    zero_dims = [a for a in range(p.d) if model.deriv_norms[a] == 0.0]
    for a in zero_dims:
        assert np.all(model.phi[a * n : (a + 1) * n] == 0.0)
    # objective at the solution does not exceed the zero initialization
    obj0 = nvsd.objective_value(p, reg, model.tau, model.nu, np.zeros(p.m))
    assert model.objective <= obj0 + 1e-10


def test_gl_singletons_equal_l_objective():
    p = _small_problem(n=10, d=3, seed=7)
    reg_l = nvsd.RegularizerSpec("l")
    reg_gl = nvsd.RegularizerSpec("gl", groups=[(0,), (1,), (2,)])
    tau = float(nvsd.tau_grid(p, reg_l, nu=1e-6, n_tau=5)[2])
    cfg = nvsd.NvsdConfig(max_iter=4000, primal_tol=1e-9, dual_tol=1e-9)
    m_l = nvsd.admm_fit(p, reg_l, tau, nu=1e-6, cfg=cfg)
    m_gl = nvsd.admm_fit(p, reg_gl, tau, nu=1e-6, cfg=cfg)
    assert m_l.objective == pytest.approx(m_gl.objective, rel=1e-6)


def test_en_mu_one_equals_l_objective():
    p = _small_problem(n=10, d=3, seed=8)
    reg_l = nvsd.RegularizerSpec("l")
    reg_en = nvsd.RegularizerSpec("en", mu=1.0)
    tau = float(nvsd.tau_grid(p, reg_l, nu=1e-6, n_tau=5)[2])
    cfg = nvsd.NvsdConfig(max_iter=4000, primal_tol=1e-9, dual_tol=1e-9)
    m_l = nvsd.admm_fit(p, reg_l, tau, nu=1e-6, cfg=cfg)
    m_en = nvsd.admm_fit(p, reg_en, tau, nu=1e-6, cfg=cfg)
    assert m_l.objective == pytest.approx(m_en.objective, rel=1e-6)
    # the en objective evaluated by the l rule also agrees at mu = 1
    assert nvsd.penalty_value(reg_en, p.Z @ m_en.omega, p.n, p.d) == pytest.approx(
        nvsd.penalty_value(reg_l, p.Z @ m_en.omega, p.n, p.d)
    )


def test_path_endpoints_support():
    p = _small_problem(n=12, d=3, seed=9)
    reg = nvsd.RegularizerSpec("l")
    models = nvsd.nvsd_path(p, reg, n_tau=12, cfg=nvsd.NvsdConfig(max_iter=1500))
    assert len(models) == 12
    # at tau_max every derivative block is zeroed; at tiny tau none are
    assert nvsd.support(models[0]).size == 0
    assert nvsd.support(models[-1]).size == p.d


def test_support_trivial_cases():
    p = _small_problem(n=8, d=2, seed=10)
    model = nvsd.admm_fit(p, nvsd.RegularizerSpec("l"), tau=1e-4, nu=1e-8,
                          cfg=nvsd.NvsdConfig(max_iter=500))
    model.deriv_norms = np.zeros(p.d)
    assert nvsd.support(model).size == 0
    model.deriv_norms = np.array([1.0, 0.5])
    assert nvsd.support(model, tol=np.inf).size == 0
    assert list(nvsd.support(model)) == [0, 1]


def test_regularizer_validation():
    with pytest.raises(ValueError):
        nvsd.RegularizerSpec("ridge")
    with pytest.raises(ValueError):
        nvsd.RegularizerSpec("gl")
    with pytest.raises(ValueError):
        nvsd.RegularizerSpec("en", mu=1.5)
    bad = nvsd.RegularizerSpec("gl", groups=[(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        bad.dimension_blocks(3)


def test_debias_trivial_cases():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((30, 4))
    y = X[:, 0] ** 2 + 0.1 * rng.standard_normal(30)
    Xv = rng.standard_normal((20, 4))
    yv = Xv[:, 0] ** 2
    spec = gaussian(2.0)
    # full support behaves like a plain kernel ridge fit at the chosen lambda
    full = nvsd.debias(X, y, np.arange(4), spec, [0.1], Xv, yv)
    ref = krr_fit(X, y, spec, 0.1)
    assert np.allclose(nvsd.debias_predict(full, Xv), krr_predict(ref, Xv))
    # empty support falls back to the training mean
    empty = nvsd.debias(X, y, np.array([], dtype=int), spec, [0.1, 1.0], Xv, yv)
    assert np.allclose(nvsd.debias_predict(empty, Xv), y.mean())


def test_predict_consistency_and_loop_oracle():
    p = _small_problem(n=5, d=3, seed=12)
    rng = np.random.default_rng(13)
    omega = rng.standard_normal(p.m)
    model = nvsd.NvsdModel(
        X=p.X, spec=p.spec, reg=nvsd.RegularizerSpec("l"), omega=omega,
        phi=np.zeros(p.d * p.n), dual=np.zeros(p.d * p.n), tau=0.1, nu=1e-6,
        kappa=1.0, deriv_norms=np.zeros(p.d), objective=0.0, n_iter=1,
        primal_residual=0.0, dual_residual=0.0, converged=True,
    )
    # at the training points the prediction equals F w
    assert np.allclose(nvsd.nvsd_predict(model, p.X), p.F @ omega, atol=1e-10)
    # naive double-loop summation with finite-difference kernel derivatives
    Xs = rng.standard_normal((4, 3))
    h = 1e-5
    expect = np.zeros(4)
    for j in range(4):
        for i in range(p.n):
            expect[j] += omega[i] * kernel_eval(p.spec, p.X[i], Xs[j])
            for a in range(p.d):
                e = np.zeros(p.d)
                e[a] = h
                fd = (
                    kernel_eval(p.spec, p.X[i] + e, Xs[j])
                    - kernel_eval(p.spec, p.X[i] - e, Xs[j])
                ) / (2 * h)
                expect[j] += omega[p.n + a * p.n + i] * fd
    assert np.allclose(nvsd.nvsd_predict(model, Xs), expect, rtol=1e-6, atol=1e-6)
    # zero coefficients predict zero
    model.omega = np.zeros(p.m)
    assert np.all(nvsd.nvsd_predict(model, Xs) == 0)
