"""Kernel variable selection through empirical partial-derivative penalties.

Models f(x) = sum_i alpha_i k(x_i, x) + sum_{i,a} beta_{ai} (d/ds_a k)(x_i, x)
are fitted by minimizing

    (1/n) ||y - F w||^2  +  tau * J(w)  +  nu * w^T Q w

over w = (alpha, beta), where F = [K D^T] evaluates the model at the
training points, w^T Q w is the squared Hilbert norm of the model, and J
penalizes the vectors of training-sample partial derivatives Z^a w with a
lasso-like ("l"), group-lasso-like ("gl") or elastic-net-like ("en") norm:

    l    J(w) = (1/sqrt(n)) sum_a ||Z^a w||
    gl   J(w) = (1/sqrt(n)) sum_g p_g ||Z^g w||      (p_g = group size)
    en   J(w) = (mu/sqrt(n)) sum_a ||Z^a w|| + ((1-mu)/n) sum_a ||Z^a w||^2

The non-smooth problem is solved by ADMM on the split Z w = phi with exact
closed-form proximal updates for phi; dimensions whose blocks phi_a are zero
drop out of the model.  The per-dimension derivative norms ||phi_a|| / sqrt(n)
give the selected support, and a kernel ridge refit on the selected columns
provides the debiased predictor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .kernels import (
    KernelSpec,
    KrrModel,
    grad1_matrix,
    grad2_matrix,
    gram_matrix,
    krr_fit,
    krr_predict,
)
from .optim import prox_elastic_block, prox_group_l2


@dataclass(frozen=True)
class RegularizerSpec:
    """Penalty choice: kind "l" | "gl" | "en"; gl needs a partition of the
    input dimensions into groups, en a mixing weight mu in [0, 1]."""

    kind: str
    groups: tuple | None = None
    mu: float = 0.5

    def __post_init__(self):
        if self.kind not in ("l", "gl", "en"):
            raise ValueError(f"unknown regularizer kind: {self.kind!r}")
        if self.kind == "gl":
            if not self.groups:
                raise ValueError("gl regularizer requires groups")
            object.__setattr__(
                self, "groups", tuple(tuple(int(a) for a in g) for g in self.groups)
            )
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0,1]")

    def dimension_blocks(self, d: int) -> list:
        """List of (dims, weight) penalty blocks; weight is the group size
        for gl and 1 otherwise."""
        if self.kind != "gl":
            return [(np.array([a]), 1.0) for a in range(d)]
        groups = [np.asarray(g, dtype=int) for g in self.groups]
        flat = np.concatenate(groups)
        if sorted(flat.tolist()) != list(range(d)):
            raise ValueError("groups must partition the input dimensions 0..d-1")
        return [(g, float(len(g))) for g in groups]


@dataclass
class NvsdProblem:
    """Precomputed matrices: K (n x n), D (dn x n) with row block a holding
    the derivative matrix D^a_ij = d/ds_a k(s, x^j) at s = x^i, L (dn x dn)
    with blocks of mixed second derivatives, F = [K D^T] (n x (n+dn)),
    Z = [D L] (dn x (n+dn)) and Q = [[K, 0], [2D, L]]."""

    X: np.ndarray
    y: np.ndarray
    spec: KernelSpec
    K: np.ndarray
    D: np.ndarray
    L: np.ndarray
    F: np.ndarray
    Z: np.ndarray
    Q: np.ndarray
    _ZtZ: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.n * (1 + self.d)

    @property
    def ZtZ(self) -> np.ndarray:
        if self._ZtZ is None:
            self._ZtZ = self.Z.T @ self.Z
        return self._ZtZ

    def quad(self, omega) -> float:
        """The Hilbert-norm quadratic w^T Q w."""
        omega = np.asarray(omega, dtype=float).ravel()
        return float(omega @ (self.Q @ omega))


def assemble(X, y, spec: KernelSpec, max_nd: int = 10_000) -> NvsdProblem:
    """Build the kernel, derivative and mixed second-derivative matrices.

    Working memory scales with (nd)^2, guarded by max_nd >= n*d.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    n, d = X.shape
    if y.shape[0] != n:
        raise ValueError("X and y have inconsistent lengths")
    if n * d > max_nd:
        raise MemoryError(
            f"n*d = {n * d} exceeds the working-memory guard max_nd = {max_nd}"
        )
    K = gram_matrix(spec, X, X)
    D = np.vstack([grad1_matrix(spec, X, X, a) for a in range(d)])
    L = np.empty((d * n, d * n))
    for a in range(d):
        for b in range(d):
            L[a * n : (a + 1) * n, b * n : (b + 1) * n] = grad2_matrix(spec, X, X, a, b)
    F = np.hstack([K, D.T])
    Z = np.hstack([D, L])
    m = n + d * n
    Q = np.zeros((m, m))
    Q[:n, :n] = K
    Q[n:, :n] = 2.0 * D
    Q[n:, n:] = L
    return NvsdProblem(X=X, y=y, spec=spec, K=K, D=D, L=L, F=F, Z=Z, Q=Q)


def _block_rows(blocks: list, n: int) -> list:
    """Map dimension blocks to row-index arrays into the dn-long phi vector."""
    return [
        (np.concatenate([np.arange(a * n, (a + 1) * n) for a in dims]), w)
        for dims, w in blocks
    ]


def penalty_value(reg: RegularizerSpec, zw: np.ndarray, n: int, d: int) -> float:
    """J evaluated from the stacked derivative vector zw = Z w."""
    norms = np.array(
        [np.linalg.norm(zw[rows]) for rows, _ in _block_rows(reg.dimension_blocks(d), n)]
    )
    weights = np.array([w for _, w in reg.dimension_blocks(d)])
    if reg.kind == "en":
        return float(
            reg.mu / np.sqrt(n) * norms.sum() + (1.0 - reg.mu) / n * (norms**2).sum()
        )
    return float((weights * norms).sum() / np.sqrt(n))


def objective_value(
    problem: NvsdProblem, reg: RegularizerSpec, tau: float, nu: float, omega
) -> float:
    """(1/n)||y - F w||^2 + tau J(w) + nu w^T Q w."""
    omega = np.asarray(omega, dtype=float).ravel()
    r = problem.y - problem.F @ omega
    zw = problem.Z @ omega
    return (
        float(r @ r) / problem.n
        + tau * penalty_value(reg, zw, problem.n, problem.d)
        + nu * problem.quad(omega)
    )


@dataclass
class NvsdConfig:
    max_iter: int = 2000
    primal_tol: float = 1e-4  # ||Z w - phi||_2 at termination
    dual_tol: float = 1e-4  # kappa ||Z^T (phi_new - phi_old)||_2
    kappa0: float = 1.0
    adapt_kappa: bool = True
    relax: float = 1.6  # over-relaxation factor in (0, 2); 1 disables
    adapt_threshold: float = 3.0  # residual imbalance triggering a kappa step
    # optional early exit once the sparsity pattern of phi has been stable
    # for this many iterations (and the primal residual is within 4x tol);
    # None iterates to the residual tolerances.  Intended for support-path
    # computations whose downstream refit depends on the support alone.
    support_patience: int | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.primal_tol <= 0 or self.dual_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.kappa0 <= 0:
            raise ValueError("kappa0 must be > 0")
        if not 0.0 < self.relax < 2.0:
            raise ValueError("relax must lie in (0, 2)")


@dataclass
class NvsdModel:
    X: np.ndarray
    spec: KernelSpec
    reg: RegularizerSpec
    omega: np.ndarray
    phi: np.ndarray
    dual: np.ndarray
    tau: float
    nu: float
    kappa: float
    deriv_norms: np.ndarray  # per dimension: ||phi_a||_2 / sqrt(n)
    objective: float
    n_iter: int
    primal_residual: float
    dual_residual: float
    converged: bool

    @property
    def alpha(self) -> np.ndarray:
        return self.omega[: self.X.shape[0]]

    @property
    def beta(self) -> np.ndarray:
        return self.omega[self.X.shape[0] :]


def _prox_phi(v, rows_weights, reg, tau, kappa, n):
    phi = np.empty_like(v)
    root_n = np.sqrt(n)
    for rows, w in rows_weights:
        if reg.kind == "en":
            phi[rows] = prox_elastic_block(v[rows], tau, reg.mu, kappa, n)
        else:
            phi[rows] = prox_group_l2(v[rows], tau * w / (kappa * root_n))
    return phi


def _factor(S_base, ZtZ, kappa, cache):
    key = float(kappa)
    if cache is None or key not in cache:
        M = S_base + kappa * ZtZ
        try:
            fac = cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * np.trace(M) / M.shape[0]
            fac = cho_factor(
                M + jitter * np.eye(M.shape[0]), lower=True, check_finite=False
            )
        if cache is None:
            return fac
        cache[key] = fac
    return cache[key]


def admm_fit(
    problem: NvsdProblem,
    reg: RegularizerSpec,
    tau: float,
    nu: float | None = None,
    cfg: NvsdConfig | None = None,
    warm: NvsdModel | None = None,
    factor_cache: dict | None = None,
) -> NvsdModel:
    """Alternate the quadratic solve for w, the block proximal update for
    phi and the dual ascent step, adapting the step size kappa by factors
    of two when the primal and dual residuals are more than 10x apart.

    nu defaults to 1e-6 * tau.  A factor_cache dict (keyed by kappa) lets
    warm-started fits along a tau path reuse Cholesky factorizations; the
    cache is only valid for a fixed problem and nu.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    nu = 1e-6 * tau if nu is None else nu
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if tau == 0 and nu == 0:
        raise ValueError("tau and nu cannot both be 0")
    cfg = cfg or NvsdConfig()
    n, d = problem.n, problem.d
    rows_weights = _block_rows(reg.dimension_blocks(d), n)

    S_base = nu * (problem.Q + problem.Q.T) + (2.0 / n) * (problem.F.T @ problem.F)
    rhs_base = (2.0 / n) * (problem.F.T @ problem.y)
    ZtZ = problem.ZtZ
    Z = problem.Z

    if warm is not None:
        omega = warm.omega.copy()
        phi = warm.phi.copy()
        dual = warm.dual.copy()
        kappa = warm.kappa
    else:
        omega = np.zeros(problem.m)
        phi = np.zeros(d * n)
        dual = np.zeros(d * n)
        kappa = cfg.kappa0

    r_primal = r_dual = np.inf
    converged = False
    stable_mask, stable_count = None, 0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        fac = _factor(S_base, ZtZ, kappa, factor_cache)
        omega = cho_solve(fac, rhs_base + kappa * (Z.T @ (phi - dual)), check_finite=False)
        zw = Z @ omega
        phi_old = phi
        # over-relaxation: mix the new Z w with the previous phi before the
        # proximal and dual steps (fixed point unchanged)
        zh = cfg.relax * zw + (1.0 - cfg.relax) * phi_old
        phi = _prox_phi(zh + dual, rows_weights, reg, tau, kappa, n)
        dual = dual + zh - phi
        r_primal = float(np.linalg.norm(zw - phi))
        r_dual = float(kappa * np.linalg.norm(Z.T @ (phi - phi_old)))
        if r_primal < cfg.primal_tol and r_dual < cfg.dual_tol:
            converged = True
            break
        if cfg.support_patience is not None and r_primal < 4.0 * cfg.primal_tol:
            bn = np.array([np.linalg.norm(phi[a * n : (a + 1) * n]) for a in range(d)])
            top = bn.max()
            mask = (bn > 1e-6 * top).tobytes() if top > 0.0 else b""
            stable_count = stable_count + 1 if mask == stable_mask else 0
            stable_mask = mask
            if stable_count >= cfg.support_patience:
                break
        if cfg.adapt_kappa:
            if r_primal > cfg.adapt_threshold * r_dual and kappa < 1e8:
                kappa *= 2.0
                dual = dual / 2.0
            elif r_dual > cfg.adapt_threshold * r_primal and kappa > 1e-8:
                kappa /= 2.0
                dual = dual * 2.0

    deriv_norms = np.array(
        [np.linalg.norm(phi[a * n : (a + 1) * n]) for a in range(d)]
    ) / np.sqrt(n)
    return NvsdModel(
        X=problem.X,
        spec=problem.spec,
        reg=reg,
        omega=omega,
        phi=phi,
        dual=dual,
        tau=tau,
        nu=nu,
        kappa=kappa,
        deriv_norms=deriv_norms,
        objective=objective_value(problem, reg, tau, nu, omega),
        n_iter=it,
        primal_residual=r_primal,
        dual_residual=r_dual,
        converged=converged,
    )


def support(model: NvsdModel, tol: float = 1e-6) -> np.ndarray:
    """Dimensions whose derivative norm exceeds tol times the largest norm."""
    norms = model.deriv_norms
    top = norms.max() if norms.size else 0.0
    if top <= 0.0:
        return np.array([], dtype=int)
    return np.nonzero(norms > tol * top)[0]


def ridge_omega(problem: NvsdProblem, nu: float) -> np.ndarray:
    """Solution of the tau = 0 problem (strictly convex quadratic for nu > 0)."""
    if nu <= 0:
        raise ValueError("nu must be > 0")
    n = problem.n
    S = nu * (problem.Q + problem.Q.T) + (2.0 / n) * (problem.F.T @ problem.F)
    rhs = (2.0 / n) * (problem.F.T @ problem.y)
    try:
        return np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(S) / S.shape[0]
        return np.linalg.solve(S + jitter * np.eye(S.shape[0]), rhs)


def tau_grid(
    problem: NvsdProblem,
    reg: RegularizerSpec,
    nu: float,
    kappa: float = 1.0,
    n_tau: int = 50,
    span: float = 1e-4,
    zw0: np.ndarray | None = None,
) -> np.ndarray:
    """Geometric grid from the smallest tau that zeroes every penalty block
    at the first proximal step (evaluated at the tau = 0 solution) down to
    span times that value.  zw0 optionally supplies the precomputed
    derivative vector Z @ ridge_omega(problem, nu) shared across calls."""
    zw = problem.Z @ ridge_omega(problem, nu) if zw0 is None else zw0
    n = problem.n
    tmax = 0.0
    for rows, w in _block_rows(reg.dimension_blocks(problem.d), n):
        divisor = reg.mu if reg.kind == "en" else w
        if divisor <= 0:
            raise ValueError("en regularizer with mu = 0 has no zeroing tau")
        tmax = max(tmax, kappa * np.sqrt(n) * np.linalg.norm(zw[rows]) / divisor)
    if tmax <= 0:
        raise ValueError("degenerate problem: zero derivative vector at tau = 0")
    return np.geomspace(tmax, span * tmax, n_tau)


def nvsd_path(
    problem: NvsdProblem,
    reg: RegularizerSpec,
    taus=None,
    nu: float | None = None,
    cfg: NvsdConfig | None = None,
    n_tau: int = 50,
    stop_when_dense: bool = False,
    refine_jump: int | None = None,
    refine_points: int = 8,
) -> list:
    """Fit a descending tau path with warm starts and shared factorizations.

    A single nu (default 1e-6 times the largest tau) is used for the whole
    path so that the quadratic-step matrix depends on kappa only.  With
    stop_when_dense the path ends at the first fit that selects every
    dimension (smaller taus only densify further, and the debiased refit
    depends on the support alone).

    With refine_jump set, any gap between consecutive grid points where the
    support grows by more than refine_jump dimensions is re-run on a finer
    geometric sub-grid (warm-started from the sparser end), so that narrow
    tau windows with intermediate supports are not skipped.
    """
    if taus is None:
        nu_probe = nu if nu is not None else 1e-8
        taus = tau_grid(problem, reg, nu_probe, n_tau=n_tau)
    taus = np.sort(np.asarray(taus, dtype=float))[::-1]
    if nu is None:
        nu = 1e-6 * taus[0]
    cache: dict = {}
    models = []
    warm = None
    for tau in taus:
        warm = admm_fit(problem, reg, float(tau), nu, cfg, warm=warm, factor_cache=cache)
        models.append(warm)
        if stop_when_dense and support(models[-1]).size == problem.d:
            break
    if refine_jump is not None:
        refined = []
        for prev, nxt in zip(models, models[1:]):
            refined.append(prev)
            if support(nxt).size - support(prev).size > refine_jump:
                fine = np.geomspace(prev.tau, nxt.tau, refine_points + 2)[1:-1]
                warm = prev
                for tau in fine:
                    warm = admm_fit(
                        problem, reg, float(tau), nu, cfg, warm=warm, factor_cache=cache
                    )
                    refined.append(warm)
        refined.append(models[-1])
        models = refined
    return models


@dataclass
class DebiasModel:
    """Kernel ridge refit restricted to the selected input dimensions;
    an empty selection gives the constant training-mean predictor."""

    support: np.ndarray
    krr: KrrModel | None
    mean: float
    lam: float


def debias(
    X, y, sel, spec: KernelSpec, lam_grid, X_val, y_val
) -> DebiasModel:
    """Refit on the selected columns, choosing lambda by validation MSE
    (ties resolved towards stronger regularization)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    sel = np.asarray(sel, dtype=int).ravel()
    if sel.size == 0:
        return DebiasModel(support=sel, krr=None, mean=float(y.mean()), lam=0.0)
    Xs, Xv = X[:, sel], np.asarray(X_val, dtype=float)[:, sel]
    y_val = np.asarray(y_val, dtype=float).ravel()
    best = None
    for lam in sorted(lam_grid, reverse=True):
        model = krr_fit(Xs, y, spec, float(lam))
        err = float(np.mean((krr_predict(model, Xv) - y_val) ** 2))
        if best is None or err < best[0]:
            best = (err, model, float(lam))
    return DebiasModel(support=sel, krr=best[1], mean=float(y.mean()), lam=best[2])


def debias_predict(model: DebiasModel, Xs) -> np.ndarray:
    Xs = np.asarray(Xs, dtype=float)
    if model.krr is None:
        return np.full(Xs.shape[0], model.mean)
    return krr_predict(model.krr, Xs[:, model.support])


def nvsd_predict(model: NvsdModel, Xs) -> np.ndarray:
    """f(x) = sum_i alpha_i k(x_i, x) + sum_{i,a} beta_{ai} (d/ds_a k)(x_i, x)."""
    Xs = np.asarray(Xs, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[None, :]
    n, d = model.X.shape
    pred = gram_matrix(model.spec, Xs, model.X) @ model.alpha
    beta = model.beta
    for a in range(d):
        block = beta[a * n : (a + 1) * n]
        if np.any(block):
            pred = pred + grad1_matrix(model.spec, model.X, Xs, a).T @ block
    return pred
