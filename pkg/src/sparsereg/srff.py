"""Sparse random Fourier features.

Random features z(x)_j = sqrt(2/D) cos(eps_j^T (gamma . x) + b_j) with the
spectral samples eps fixed and a per-dimension scale vector gamma learned on
a simplex of radius rho.  Fitting alternates an exact ridge solve for the
linear weights a with a projected FISTA step on gamma:

    min_{a, gamma in simplex(rho)}  ||y - Z(gamma) a||^2 + lam ||a||^2

With gamma frozen at (1/sigma) 1 this is the classical random Fourier
feature approximation of the Gaussian kernel of width sigma.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accel
from .kernels import median_width
from .optim import SolverConfig, fista, project_simplex


@dataclass(frozen=True)
class FeatureSampler:
    """Fixed random spectral samples eps (D x d) and phases b in [0, 2pi)."""

    eps: np.ndarray
    b: np.ndarray
    base_law: str
    seed: int

    @property
    def D(self) -> int:
        return self.eps.shape[0]

    @property
    def d(self) -> int:
        return self.eps.shape[1]


def sample_features(d: int, D: int, base_law: str = "normal", seed: int = 0) -> FeatureSampler:
    """Draw spectral samples: standard normal (Gaussian kernel) or standard
    Cauchy (Laplace kernel), plus uniform phases."""
    if D < 1 or d < 1:
        raise ValueError("need D >= 1 and d >= 1")
    if base_law not in ("normal", "cauchy"):
        raise ValueError(f"unknown base law: {base_law!r}")
    rng = np.random.default_rng(seed)
    if base_law == "normal":
        eps = rng.standard_normal((D, d))
    else:
        eps = rng.standard_cauchy((D, d))
    b = rng.uniform(0.0, 2.0 * np.pi, D)
    return FeatureSampler(eps=eps, b=b, base_law=base_law, seed=seed)


def feature_map(sampler: FeatureSampler, gamma, X) -> np.ndarray:
    """Z with Z_ij = sqrt(2/D) cos(eps_j^T (gamma . x_i) + b_j)."""
    X = np.asarray(X, dtype=float)
    gamma = np.asarray(gamma, dtype=float).ravel()
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != sampler.d or gamma.size != sampler.d:
        raise ValueError("dimension mismatch with sampler")
    P = (X * gamma) @ sampler.eps.T
    return accel.cos_plus_phase(P, sampler.b, np.sqrt(2.0 / sampler.D))


def gamma_gradient(sampler: FeatureSampler, gamma, X, y, a) -> np.ndarray:
    """Exact gradient of J(gamma) = ||y - Z(gamma) a||^2.

    Component s:  -2 (y - Za)^T (dZ/dgamma_s) a  with
    dZ_ij/dgamma_s = -sqrt(2/D) sin(eps_j^T (gamma . x_i) + b_j) eps_js x_is.
    """
    X = np.asarray(X, dtype=float)
    gamma = np.asarray(gamma, dtype=float).ravel()
    a = np.asarray(a, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    P = (X * gamma) @ sampler.eps.T
    scale = np.sqrt(2.0 / sampler.D)
    Z = accel.cos_plus_phase(P, sampler.b, scale)
    r = y - Z @ a
    S = accel.sin_plus_phase(P, sampler.b)
    return 2.0 * scale * (((S * a) @ sampler.eps) * X).T @ r


@dataclass
class SrffModel:
    sampler: FeatureSampler
    gamma: np.ndarray
    rho: float
    a: np.ndarray
    lam: float
    objective_trace: list = field(default_factory=list)

    def support(self, frac: float = 0.1) -> np.ndarray:
        """Dimensions whose scale exceeds `frac` of the largest scale."""
        if self.gamma.max() <= 0:
            return np.array([], dtype=int)
        return np.nonzero(self.gamma > frac * self.gamma.max())[0]


def _ridge_a(Z: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    D = Z.shape[1]
    return np.linalg.solve(Z.T @ Z + lam * np.eye(D), Z.T @ y)


def srff_fit(
    X,
    y,
    lam: float,
    D: int = 300,
    rho: float | None = None,
    cfg: SolverConfig | None = None,
    seed: int = 0,
    base_law: str = "normal",
    inner_iter: int = 50,
    gamma0=None,
) -> SrffModel:
    """Alternate exact ridge for a and projected FISTA for gamma.

    gamma0 warm-starts the scale vector (projected onto the simplex),
    useful along a regularization path; default is uniform rho/d."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least 2 samples")
    if rho is None:
        sigma = median_width(X, min(20, n - 1))
        rho = d / sigma
    cfg = cfg or SolverConfig(max_iter=200, tol=1e-6)
    sampler = sample_features(d, D, base_law, seed)
    if gamma0 is None:
        gamma = np.full(d, rho / d)
    else:
        gamma = project_simplex(np.asarray(gamma0, dtype=float).ravel(), rho)

    inner_cfg = SolverConfig(
        max_iter=inner_iter,
        tol=cfg.tol,
        backtrack_shrink=cfg.backtrack_shrink,
        initial_step=1.0,
    )

    scale = np.sqrt(2.0 / D)
    cache: dict = {}

    def _projection(g):
        # objective and gradient are evaluated at the same iterate; share
        # the n x D projection between them
        key = g.tobytes()
        if cache.get("key") != key:
            cache["key"] = key
            cache["P"] = (X * g) @ sampler.eps.T
        return cache["P"]

    trace: list[float] = []
    a = np.zeros(D)
    prev = np.inf
    for _ in range(cfg.max_iter):
        # Step 1: exact ridge solve for a at the current features
        Z = feature_map(sampler, gamma, X)
        a = _ridge_a(Z, y, lam)
        ridge_pen = lam * float(a @ a)
        J1 = float(np.sum((y - Z @ a) ** 2)) + ridge_pen
        trace.append(J1)

        # Step 2: projected FISTA on gamma at the current a
        def obj(g):
            P = _projection(g)
            r = y - accel.cos_plus_phase(P, sampler.b, scale) @ a
            return float(r @ r)

        def grad(g):
            P = _projection(g)
            r = y - accel.cos_plus_phase(P, sampler.b, scale) @ a
            S = accel.sin_plus_phase(P, sampler.b)
            return 2.0 * scale * (((S * a) @ sampler.eps) * X).T @ r

        gamma = fista(
            obj,
            grad,
            lambda u, t: project_simplex(u, rho),
            gamma,
            inner_cfg,
        )
        J2 = obj(gamma) + ridge_pen
        trace.append(J2)
        if np.isfinite(prev) and abs(prev - J2) <= cfg.tol * max(1.0, abs(prev)):
            break
        prev = J2

    # final exact a at the converged gamma
    Z = feature_map(sampler, gamma, X)
    a = _ridge_a(Z, y, lam)
    trace.append(float(np.sum((y - Z @ a) ** 2)) + lam * float(a @ a))
    return SrffModel(sampler=sampler, gamma=gamma, rho=rho, a=a, lam=lam, objective_trace=trace)


def rff_fit(
    X, y, lam: float, D: int = 300, sigma: float | None = None, seed: int = 0,
    base_law: str = "normal",
) -> SrffModel:
    """Plain random Fourier feature ridge with gamma frozen at (1/sigma) 1."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    n, d = X.shape
    if sigma is None:
        sigma = median_width(X, min(20, n - 1))
    sampler = sample_features(d, D, base_law, seed)
    gamma = np.full(d, 1.0 / sigma)
    Z = feature_map(sampler, gamma, X)
    a = _ridge_a(Z, y, lam)
    J = float(np.sum((y - Z @ a) ** 2)) + lam * float(a @ a)
    return SrffModel(
        sampler=sampler, gamma=gamma, rho=float(gamma.sum()), a=a, lam=lam,
        objective_trace=[J],
    )


def srff_predict(model: SrffModel, Xs) -> np.ndarray:
    Z = feature_map(model.sampler, model.gamma, Xs)
    return Z @ model.a
