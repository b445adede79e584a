"""Nonlinear Granger modelling with partitioned input kernels and learned
diagonal output kernels.

Each input series j contributes a partition X^(j) (its p lags in the design)
and a small dictionary of kernels over that partition.  With Gram matrices
K^d (d running over all series-kernel pairs, trace-normalized to n), the
model per scalar output is f(x) = sum_t c_t sum_d a_d k^d(x^(j_d), x_t^(j_d))
with nonnegative kernel weights a.

Two fitting strategies for the weights (the second regularization parameter
is fixed to 1; its value can be absorbed into lam and the scaling of a, c):

nvarl1_fit — penalty sum_d a_d.  The problem

    ||y - sum_d a_d K^d c||^2 + lam sum_d a_d c' K^d c + sum_d a_d

is solved exactly through its convex reformulation: decompose
K^d = Phi^d (Phi^d)', solve the group lasso

    min_z ||y - sum_d Phi^d z^d||^2 + 2 sqrt(lam) sum_d ||z^d||_2,

recover a_d = sqrt(lam) ||z^d||_2 and c from (sum_d a_d K^d + lam I) c = y.

nvarl12_fit — penalty sum_j sqrt(sum_i a_(ji)^2) grouping kernels by series.
Alternating minimisation: the same linear system for c, then a proximal
gradient (group soft-threshold with nonnegativity) step for a.  Jointly
non-convex; started from uniform a = 1/l, c = 0.

Both are separable per output column and share the precomputed Grams.
nvar_adjacency sums the weights across each series' kernels and rescales so
the largest entry is 1, giving the weighted dependency graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .granger_linear import VarDesign
from .kernels import KernelSpec, gaussian, gram_matrix, linear, polynomial
from .optim import SolverConfig, fista, prox_group_l2

DEFAULT_KERNELS = (
    linear(),
    polynomial(2),
    polynomial(3),
    gaussian(0.5),
    gaussian(1.0),
    gaussian(2.0),
)


@dataclass(frozen=True)
class KernelDictionary:
    """Per input series, the kernels applied to that series' lag partition."""

    per_series: tuple

    def __post_init__(self):
        per = tuple(tuple(specs) for specs in self.per_series)
        if not per or any(len(s) < 1 for s in per):
            raise ValueError("every series needs at least one kernel")
        object.__setattr__(self, "per_series", per)

    @classmethod
    def default(cls, K: int) -> "KernelDictionary":
        return cls(tuple(DEFAULT_KERNELS for _ in range(K)))

    @property
    def K(self) -> int:
        return len(self.per_series)

    @property
    def l(self) -> int:
        return sum(len(s) for s in self.per_series)

    @property
    def index(self) -> list:
        """Flat (series j, kernel i) pairs in series-major order."""
        return [(j, i) for j in range(self.K) for i in range(len(self.per_series[j]))]

    def series_groups(self) -> list:
        """Flat-index groups, one per series."""
        groups, start = [], 0
        for specs in self.per_series:
            groups.append(np.arange(start, start + len(specs)))
            start += len(specs)
        return groups


@dataclass
class PartitionedGrams:
    grams: list  # l matrices, series-major order
    scales: np.ndarray  # trace-normalization factor per gram
    dictionary: KernelDictionary
    X: np.ndarray  # training inputs in lag layout (n x Kp)
    p: int
    _phis: list | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def l(self) -> int:
        return len(self.grams)

    def features(self, trunc: float = 1e-10) -> list:
        """Empirical feature matrices Phi^d with K^d = Phi^d (Phi^d)',
        truncating eigenvalues below trunc times the largest."""
        if self._phis is None:
            phis = []
            for K in self.grams:
                lam, U = np.linalg.eigh(K)
                keep = lam > trunc * max(lam.max(), 0.0)
                phis.append(U[:, keep] * np.sqrt(lam[keep]))
            self._phis = phis
        return self._phis


def partition_grams(design: VarDesign, dictionary: KernelDictionary) -> PartitionedGrams:
    """Per-(series, kernel) training Grams on the p-lag partitions,
    trace-normalized to the sample size."""
    if dictionary.K != design.K:
        raise ValueError("dictionary must have one kernel list per series")
    n = design.T
    grams, scales = [], []
    for j, i in dictionary.index:
        Xj = design.X[:, design.block(j)]
        G = gram_matrix(dictionary.per_series[j][i], Xj, Xj)
        tr = np.trace(G)
        s = n / tr if tr > 0 else 1.0
        grams.append(s * G)
        scales.append(s)
    return PartitionedGrams(
        grams=grams, scales=np.array(scales), dictionary=dictionary, X=design.X.copy(), p=design.p
    )


@dataclass
class NvarModel:
    C: np.ndarray  # n x m
    A: np.ndarray  # l x m, nonnegative kernel weights
    grams: PartitionedGrams
    norm_type: str  # "L1" or "L12"
    lam: float
    objectives: np.ndarray | None = None  # final per-output objective values


def _objective_l1(grams, y, c, a, lam: float, tau: float = 1.0) -> float:
    pred = np.zeros_like(y)
    quad = 0.0
    for d, K in enumerate(grams.grams):
        Kc = K @ c
        pred += a[d] * Kc
        quad += a[d] * (c @ Kc)
    return float(np.sum((y - pred) ** 2) + lam * quad + tau * np.sum(a))


def _objective_l12(grams, y, c, a, lam: float) -> float:
    pred = np.zeros_like(y)
    quad = 0.0
    for d, K in enumerate(grams.grams):
        Kc = K @ c
        pred += a[d] * Kc
        quad += a[d] * (c @ Kc)
    pen = sum(
        np.sqrt(np.sum(a[g] ** 2)) for g in grams.dictionary.series_groups()
    )
    return float(np.sum((y - pred) ** 2) + lam * quad + pen)


def _group_lasso_norm(bvec, diag, thresh: float) -> float:
    """||z|| at the minimizer of ||r - Phi z||^2 + thresh ||z|| when
    Phi'Phi = diag(diag) and bvec = Phi'r: the stationarity condition gives
    z_i = 2 b_i nu / (2 d_i nu + thresh) with nu = ||z|| solving the scalar
    fixed point nu = h(nu); h is increasing and bounded, so bisection on
    [0, ||b/d||] converges."""
    hi = float(np.linalg.norm(bvec / diag))
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        h = np.linalg.norm(2.0 * bvec * mid / (2.0 * diag * mid + thresh))
        if h > mid:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _group_lasso_features(phis, y, thresh: float, z0=None, cfg=None):
    """min_z ||y - Phi z||^2 + thresh * sum_d ||z^d||_2 over stacked features.

    Exact block coordinate descent: the feature blocks are eigenvector
    bases (Phi^d' Phi^d diagonal), so each block subproblem reduces to a
    one-dimensional fixed point for ||z^d|| and a closed-form update."""
    cfg = cfg or SolverConfig()
    dims = [p.shape[1] for p in phis]
    cols = np.cumsum([0] + dims)
    blocks = [slice(cols[d], cols[d + 1]) for d in range(len(phis))]
    diags = [np.sum(p * p, axis=0) for p in phis]
    z = np.zeros(cols[-1]) if z0 is None else np.asarray(z0, dtype=float).copy()
    r = y.astype(float).copy()
    for d, b in enumerate(blocks):
        if np.any(z[b]):
            r -= phis[d] @ z[b]
    half = 0.5 * thresh

    def full_obj():
        return float(r @ r) + thresh * sum(np.linalg.norm(z[b]) for b in blocks)

    prev = full_obj()
    for _ in range(cfg.max_iter):
        for d, b in enumerate(blocks):
            zd = z[b]
            if np.any(zd):
                r += phis[d] @ zd
            bvec = phis[d].T @ r
            if np.linalg.norm(bvec) <= half:
                z[b] = 0.0
                continue
            nu = _group_lasso_norm(bvec, diags[d], thresh)
            znew = 2.0 * bvec * nu / (2.0 * diags[d] * nu + thresh)
            z[b] = znew
            r -= phis[d] @ znew
        cur = full_obj()
        if abs(prev - cur) <= cfg.tol * max(1.0, abs(prev)):
            break
        prev = cur
    return z, blocks


def nvarl1_fit(
    grams: PartitionedGrams,
    Y: np.ndarray,
    lam: float,
    cfg: SolverConfig | None = None,
    tau: float = 1.0,
    warm_Z: np.ndarray | None = None,
):
    """Exact fit through the convex group-lasso reformulation, independently
    per output column.  tau rescales the weight penalty; any tau is
    equivalent to tau = 1 at lam * tau with rescaled a and c (identical
    predictions), so the grid search only runs over lam.

    Returns (model, Z) where Z stacks the per-output group-lasso variables
    for warm-starting the next grid point.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    if tau <= 0:
        raise ValueError("tau must be > 0")
    Y = np.atleast_2d(np.asarray(Y, dtype=float).T).T  # n x m
    cfg = cfg or SolverConfig(max_iter=2000, tol=1e-12)
    n, m = Y.shape
    phis = grams.features()
    l = grams.l
    A = np.empty((l, m))
    C = np.empty((n, m))
    objs = np.empty(m)
    thresh = 2.0 * np.sqrt(lam * tau)
    Z = np.empty((sum(p.shape[1] for p in phis), m))
    for s in range(m):
        y = Y[:, s]
        z0 = warm_Z[:, s] if warm_Z is not None else None
        z, blocks = _group_lasso_features(phis, y, thresh, z0=z0, cfg=cfg)
        Z[:, s] = z
        a = np.array([np.sqrt(lam / tau) * np.linalg.norm(z[b]) for b in blocks])
        Kbar = sum(a[d] * grams.grams[d] for d in range(l))
        c = np.linalg.solve(Kbar + lam * np.eye(n), y)
        A[:, s] = a
        C[:, s] = c
        objs[s] = _objective_l1(grams, y, c, a, lam, tau)
    model = NvarModel(C=C, A=A, grams=grams, norm_type="L1", lam=lam, objectives=objs)
    return model, Z


def nvarl12_fit(
    grams: PartitionedGrams,
    Y: np.ndarray,
    lam: float,
    cfg: SolverConfig | None = None,
    max_alt: int = 500,
    tol: float = 1e-5,
    warm_A: np.ndarray | None = None,
):
    """Alternating minimisation for the series-grouped weight penalty:
    exact linear solve for c, proximal gradient (group soft-threshold with
    nonnegativity) for a.  Non-convex; starts from uniform a = 1/l, c = 0
    unless warm-started."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    Y = np.atleast_2d(np.asarray(Y, dtype=float).T).T
    cfg = cfg or SolverConfig(max_iter=300, tol=1e-10)
    n, m = Y.shape
    l = grams.l
    groups = grams.dictionary.series_groups()
    A = np.empty((l, m))
    C = np.empty((n, m))
    objs = np.empty(m)

    def step_map(u, t):
        out = np.empty_like(u)
        v = np.maximum(u, 0.0)
        for g in groups:
            out[g] = prox_group_l2(v[g], t)
        return out

    def pen(a):
        return sum(np.linalg.norm(a[g]) for g in groups)

    for s in range(m):
        y = Y[:, s]
        a = warm_A[:, s].copy() if warm_A is not None else np.full(l, 1.0 / l)
        c = np.zeros(n)
        prev = _objective_l12(grams, y, c, a, lam)
        for _ in range(max_alt):
            Kbar = sum(a[d] * grams.grams[d] for d in range(l))
            c = np.linalg.solve(Kbar + lam * np.eye(n), y)
            U = np.column_stack([K @ c for K in grams.grams])
            q = np.array([c @ U[:, d] for d in range(l)])

            def obj(av):
                r = y - U @ av
                return float(r @ r + lam * q @ av)

            def grad(av):
                return 2.0 * (U.T @ (U @ av - y)) + lam * q

            a = fista(obj, grad, step_map, a, cfg, nonsmooth=pen)
            cur = _objective_l12(grams, y, c, a, lam)
            if abs(prev - cur) <= tol * max(1.0, abs(prev)):
                prev = cur
                break
            prev = cur
        A[:, s] = a
        C[:, s] = c
        objs[s] = prev
    return NvarModel(C=C, A=A, grams=grams, norm_type="L12", lam=lam, objectives=objs)


def lambda_grid(n: int, l: int, n_points: int = 15) -> np.ndarray:
    """Logarithmic grid {1e-3 .. 1e4} * sqrt(n l), largest first for
    warm-started paths."""
    return np.sqrt(n * l) * np.logspace(4, -3, n_points)


def nvar_predict(model: NvarModel, Xnew) -> np.ndarray:
    """Forecasts at rows of Xnew (lag layout): for each output s,
    yhat_s = sum_t C_ts sum_d A_ds k^d(x^(j_d), x_t^(j_d))."""
    Xnew = np.asarray(Xnew, dtype=float)
    single = Xnew.ndim == 1
    Xnew = np.atleast_2d(Xnew)
    g = model.grams
    p = g.p
    pred = np.zeros((Xnew.shape[0], model.C.shape[1]))
    for d, (j, i) in enumerate(g.dictionary.index):
        col = np.abs(model.A[d]).max()
        if col == 0.0:
            continue
        spec = g.dictionary.per_series[j][i]
        cross = g.scales[d] * gram_matrix(spec, Xnew[:, j * p : (j + 1) * p], g.X[:, j * p : (j + 1) * p])
        pred += (cross @ model.C) * model.A[d][None, :]
    return pred[0] if single else pred


def nvar_adjacency(model: NvarModel) -> np.ndarray:
    """Weighted K x m dependency matrix: per (series, output), the summed
    kernel weights, rescaled so the largest entry is 1."""
    groups = model.grams.dictionary.series_groups()
    S = np.vstack([model.A[g].sum(axis=0) for g in groups])
    top = S.max()
    return S / top if top > 0 else S
