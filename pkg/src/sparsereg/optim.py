"""Shared optimization primitives.

Simplex projection, proximal operators (L1, group L2, elastic-net block),
FISTA with backtracking line search and best-iterate tracking, ridge solves
in primal or dual form, and linear sparse baselines (lasso, group lasso).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass
class SolverConfig:
    max_iter: int = 2000
    tol: float = 1e-5  # relative objective change
    backtrack_shrink: float = 0.5
    initial_step: float = 1.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if not 0 < self.backtrack_shrink < 1:
            raise ValueError("backtrack_shrink must lie in (0,1)")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be > 0")


def project_simplex(v, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = radius}.

    Exact sort-based algorithm: find the largest rho such that
    v_sorted[rho] - (cumsum(v_sorted) - radius)/(rho+1) > 0, then
    w = max(v - theta, 0) with theta set by the active coordinates.
    """
    if radius <= 0:
        raise ValueError("simplex radius must be > 0")
    v = np.asarray(v, dtype=float).ravel()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def prox_l1(v, t: float) -> np.ndarray:
    """Elementwise soft threshold: sign(v) * max(|v| - t, 0)."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def prox_group_l2(v, t: float) -> np.ndarray:
    """Block soft threshold v * (1 - t/||v||_2)_+ applied to the whole vector."""
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= t:
        return np.zeros_like(v)
    return v * (1.0 - t / nrm)


def prox_elastic_block(v, tau: float, mu: float, kappa: float, n: int) -> np.ndarray:
    """Proximal map of the elastic-net block penalty
    tau * (mu/sqrt(n) ||v|| + (1-mu)/n ||v||^2) under the augmented term
    (kappa/2)||. - v||^2: shrink then threshold,

        v / (2 tau (1-mu)/(kappa n) + 1) * (1 - tau mu / (kappa sqrt(n) ||v||))_+
    """
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    thresh = tau * mu / (kappa * np.sqrt(n))
    if nrm <= thresh:
        return np.zeros_like(v)
    shrink = 2.0 * tau * (1.0 - mu) / (kappa * n) + 1.0
    return v / shrink * (1.0 - thresh / nrm)


def fista(
    objective: Callable[[np.ndarray], float],
    smooth_grad: Callable[[np.ndarray], np.ndarray],
    step_map: Callable[[np.ndarray, float], np.ndarray],
    x0,
    cfg: SolverConfig | None = None,
    nonsmooth: Callable[[np.ndarray], float] | None = None,
) -> np.ndarray:
    """FISTA with backtracking line search; returns the best-objective iterate.

    `objective` is the smooth part, `nonsmooth` (optional) the penalty so that
    the full objective is objective(x) + nonsmooth(x); `step_map(u, step)` is
    the proximal/projection map applied to a gradient step of size `step`.
    """
    cfg = cfg or SolverConfig()
    pen = nonsmooth if nonsmooth is not None else (lambda x: 0.0)

    x = np.asarray(x0, dtype=float).copy()
    z = x.copy()
    t_mom = 1.0
    step = cfg.initial_step
    best_x = x.copy()
    best_obj = objective(x) + pen(x)
    if not np.isfinite(best_obj):
        raise FloatingPointError("non-finite objective at x0")
    prev_full = best_obj

    for _ in range(cfg.max_iter):
        fz = objective(z)
        gz = smooth_grad(z)
        if not np.all(np.isfinite(gz)):
            raise FloatingPointError("non-finite gradient encountered")
        # backtracking: shrink step until the quadratic upper bound holds
        while True:
            x_new = step_map(z - step * gz, step)
            diff = x_new - z
            quad = fz + gz @ diff + diff @ diff / (2.0 * step)
            fx = objective(x_new)
            if fx <= quad + 1e-12 * max(1.0, abs(fx)):
                break
            step *= cfg.backtrack_shrink
            if step < 1e-18:
                break
        full = fx + pen(x_new)
        if full < best_obj:
            best_obj = full
            best_x = x_new.copy()
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom**2))
        z = x_new + (t_mom - 1.0) / t_new * (x_new - x)
        x, t_mom = x_new, t_new
        if abs(prev_full - full) <= cfg.tol * max(1.0, abs(prev_full)):
            break
        prev_full = full
    return best_x


def ridge_solve(A, y, lam: float) -> np.ndarray:
    """Solve min_w ||y - A w||^2 + lam * n * ||w||^2.

    Normal equations (A^T A + lam n I) w = A^T y; solved in the primal (q x q)
    or dual (n x n) form, w = A^T (A A^T + lam n I)^{-1} y, whichever is smaller.
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, q = A.shape
    if q <= n:
        return np.linalg.solve(A.T @ A + lam * n * np.eye(q), A.T @ y)
    alpha = np.linalg.solve(A @ A.T + lam * n * np.eye(n), y)
    return A.T @ alpha


@dataclass
class ProxSpec:
    """Penalty specification for prox_regression_fit.

    kind: "l1" | "group_l2" | "elastic_net_block"
    groups: list of index arrays partitioning {0..q-1} (group_l2 only)
    weights: per-group positive weights (default sqrt of group size)
    mu: elastic-net mixing in [0,1]
    """

    kind: str
    groups: Sequence[np.ndarray] | None = None
    weights: Sequence[float] | None = None
    mu: float = 0.5
    _groups: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.kind not in ("l1", "group_l2", "elastic_net_block"):
            raise ValueError(f"unknown penalty kind: {self.kind!r}")
        if not 0 <= self.mu <= 1:
            raise ValueError("mu must lie in [0,1]")
        if self.groups is not None:
            self._groups = [np.asarray(g, dtype=int) for g in self.groups]
            if self.weights is None:
                self.weights = [float(np.sqrt(len(g))) for g in self._groups]
            if any(w <= 0 for w in self.weights):
                raise ValueError("group weights must be > 0")

    def penalty(self, w: np.ndarray, lam: float) -> float:
        if self.kind == "l1":
            return lam * float(np.sum(np.abs(w)))
        val = 0.0
        for g, wt in zip(self._groups, self.weights):
            val += wt * float(np.linalg.norm(w[g]))
        return lam * val

    def prox(self, w: np.ndarray, t: float) -> np.ndarray:
        if self.kind == "l1":
            return prox_l1(w, t)
        out = w.copy()
        for g, wt in zip(self._groups, self.weights):
            out[g] = prox_group_l2(w[g], t * wt)
        return out

    def lam_max(self, X: np.ndarray, y: np.ndarray) -> float:
        """Smallest lam with all-zero solution of (1/n)||y-Xw||^2 + lam*pen."""
        n = X.shape[0]
        g0 = 2.0 / n * (X.T @ y)
        if self.kind == "l1":
            return float(np.max(np.abs(g0)))
        return max(
            float(np.linalg.norm(g0[g])) / wt
            for g, wt in zip(self._groups, self.weights)
        )


def prox_regression_fit(
    X, y, lam: float, spec: ProxSpec, cfg: SolverConfig | None = None, w0=None
) -> np.ndarray:
    """Minimize (1/n)||y - X w||^2 + lam * penalty(spec) via FISTA."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, q = X.shape
    XtX = X.T @ X
    Xty = X.T @ y
    yty = float(y @ y)

    def obj(w):
        return (w @ (XtX @ w) - 2.0 * (Xty @ w) + yty) / n

    def grad(w):
        return 2.0 / n * (XtX @ w - Xty)

    if lam == 0:
        return ridge_solve(X, y, 1e-12)

    w0 = np.zeros(q) if w0 is None else np.asarray(w0, dtype=float).copy()
    return fista(
        obj,
        grad,
        lambda u, t: spec.prox(u, t * lam),
        w0,
        cfg,
        nonsmooth=lambda w: spec.penalty(w, lam),
    )
