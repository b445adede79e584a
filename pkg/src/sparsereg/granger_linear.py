"""Linear vector autoregression with structured sparsity.

build_design turns K series into a one-step-ahead multi-output regression
Y = X W + E with rows x_t = (y_{t-1,1}, ..., y_{t-p,1}, y_{t-1,2}, ..., y_{t-p,K}).

clvar_fit learns W = Gamma-weighted V where the K x K structure matrix
Gamma = A - diag(A) + I combines a low-rank nonnegative part A = D G
(columns of the K x r dictionary D on a simplex of size kappa, columns of
the r x K weight matrix G on the probability simplex) with a unit diagonal
for each series' own history:

    min_{D,G,V} sum_{t,k} (y_tk - sum_b Gamma_bk <v_bk, x_tb>)^2 + lam ||V||_F^2

solved by alternating an exact per-task ridge for V with projected FISTA
steps for G (per task) and D (jointly).  With r = 1 the probability simplex
forces G = 1 and all tasks share one dependency vector.

Baselines: AR (own lags only), VARL2 (ridge), VARL1 (lasso), VARLG (group
lasso over the p lags of each input series).  All use the unnormalized
sum-of-squares loss plus lam times the penalty.

granger_adjacency reads the K x K dependency graph off W: series l points
to task k when its p-lag block in column k is (relatively) non-zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optim import ProxSpec, SolverConfig, fista, project_simplex, prox_regression_fit


@dataclass
class VarDesign:
    Y: np.ndarray  # T x K outputs
    X: np.ndarray  # T x Kp lagged inputs
    p: int
    K: int

    @property
    def T(self) -> int:
        return self.Y.shape[0]

    def block(self, b: int) -> slice:
        """Columns of X holding the p lags of input series b."""
        return slice(b * self.p, (b + 1) * self.p)


def build_design(series, p: int) -> VarDesign:
    """Lay out lagged inputs: row for time t holds, per series b, the values
    y_{t-1,b}, ..., y_{t-p,b}."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise ValueError("series must be T' x K")
    if p < 1:
        raise ValueError("lag order must be >= 1")
    Tp, K = series.shape
    if Tp <= p:
        raise ValueError(f"need more than p={p} observations, got {Tp}")
    Y = series[p:]
    X = np.empty((Tp - p, K * p))
    for b in range(K):
        for j in range(1, p + 1):
            X[:, b * p + j - 1] = series[p - j : Tp - j, b]
    return VarDesign(Y=Y, X=X, p=p, K=K)


@dataclass
class ClvarModel:
    V: np.ndarray  # Kp x K rescaled parameters
    D: np.ndarray  # K x r dictionary (columns on simplex(kappa))
    G: np.ndarray  # r x K weights (columns on probability simplex)
    lam: float
    kappa: float
    r: int
    p: int
    objective_trace: list = field(default_factory=list)

    @property
    def A(self) -> np.ndarray:
        return self.D @ self.G

    @property
    def Gamma(self) -> np.ndarray:
        A = self.A
        return A - np.diag(np.diag(A)) + np.eye(A.shape[0])

    @property
    def W(self) -> np.ndarray:
        """Final parameters: block (b, k) is Gamma_bk times the V block."""
        return self.V * np.repeat(self.Gamma, self.p, axis=0)


def _h_tensor(design: VarDesign, V: np.ndarray) -> np.ndarray:
    """H[t, b, k] = <v_bk, x_tb>: per-series input products for every task."""
    H = np.empty((design.T, design.K, design.K))
    for b in range(design.K):
        blk = design.block(b)
        H[:, b, :] = design.X[:, blk] @ V[blk, :]
    return H


def _clvar_objective(design, V, Gamma, lam, H=None) -> float:
    H = _h_tensor(design, V) if H is None else H
    pred = np.einsum("tbk,bk->tk", H, Gamma)
    return float(np.sum((design.Y - pred) ** 2) + lam * np.sum(V**2))


def _gamma_of(A: np.ndarray) -> np.ndarray:
    return A - np.diag(np.diag(A)) + np.eye(A.shape[0])


def _project_dict_columns(v: np.ndarray, K: int, r: int, kappa: float) -> np.ndarray:
    out = np.empty_like(v)
    for j in range(r):
        out[j * K : (j + 1) * K] = project_simplex(v[j * K : (j + 1) * K], kappa)
    return out


def clvar_fit(
    design: VarDesign,
    lam: float,
    kappa: float,
    r: int,
    cfg: SolverConfig | None = None,
    inner_cfg: SolverConfig | None = None,
) -> ClvarModel:
    """Alternating descent: exact per-task ridge for V, projected FISTA for
    the per-task weights G and the joint dictionary D."""
    if not 1 <= r <= design.K:
        raise ValueError("rank must satisfy 1 <= r <= K")
    if lam <= 0 or kappa <= 0:
        raise ValueError("lam and kappa must be > 0")
    cfg = cfg or SolverConfig(max_iter=200, tol=1e-5)
    inner_cfg = inner_cfg or SolverConfig(max_iter=300, tol=1e-8)
    K, p, T = design.K, design.p, design.T
    X, Y = design.X, design.Y

    V = var_baseline_fit(design, "VARL2", lam)  # warm start
    D = np.full((K, r), kappa / K)
    G = np.full((r, K), 1.0 / r)

    trace = [_clvar_objective(design, V, _gamma_of(D @ G), lam)]
    if not np.isfinite(trace[0]):
        raise FloatingPointError("non-finite objective at initialization")
    eye = lam * np.eye(K * p)
    for _ in range(cfg.max_iter):
        Gamma = _gamma_of(D @ G)
        # Step 1: per-task ridge on the Gamma-reweighted input blocks
        for k in range(K):
            Zk = X * np.repeat(Gamma[:, k], p)[None, :]
            V[:, k] = np.linalg.solve(Zk.T @ Zk + eye, Zk.T @ Y[:, k])
        H = _h_tensor(design, V)
        # Step 2: residuals after own history; mask own-history products
        R = np.empty((T, K))
        Hm = np.empty_like(H)
        for k in range(K):
            R[:, k] = Y[:, k] - H[:, k, k]
            Hm[:, :, k] = H[:, :, k]
            Hm[:, k, k] = 0.0
        # per-task weights g_k on the probability simplex
        for k in range(K):
            M = Hm[:, :, k] @ D  # T x r
            MtM, Mty = M.T @ M, M.T @ R[:, k]
            G[:, k] = fista(
                lambda g: float(g @ MtM @ g - 2.0 * Mty @ g),
                lambda g: 2.0 * (MtM @ g - Mty),
                lambda u, t: project_simplex(u, 1.0),
                G[:, k],
                inner_cfg,
            )
        # joint dictionary solve over vec(D) with per-column simplex projection
        M = np.vstack(
            [
                np.hstack([G[j, k] * Hm[:, :, k] for j in range(r)])
                for k in range(K)
            ]
        )  # TK x rK, column j*K+b multiplies d_bj
        rvec = R.T.reshape(-1)
        MtM, Mtr = M.T @ M, M.T @ rvec
        vecD = fista(
            lambda v: float(v @ MtM @ v - 2.0 * Mtr @ v),
            lambda v: 2.0 * (MtM @ v - Mtr),
            lambda u, t: _project_dict_columns(u, K, r, kappa),
            D.reshape(-1, order="F"),
            inner_cfg,
        )
        D = vecD.reshape(K, r, order="F")
        obj = _clvar_objective(design, V, _gamma_of(D @ G), lam)
        if not np.isfinite(obj):
            raise FloatingPointError("non-finite objective during alternation")
        trace.append(obj)
        if abs(trace[-2] - trace[-1]) <= cfg.tol * max(1.0, abs(trace[-2])):
            break
    return ClvarModel(
        V=V, D=D, G=G, lam=lam, kappa=kappa, r=r, p=p, objective_trace=trace
    )


def var_baseline_fit(
    design: VarDesign, method: str, lam: float, cfg: SolverConfig | None = None
) -> np.ndarray:
    """Baseline Kp x K parameter matrices.

    AR: per-task ridge on own lags only (block-diagonal W); VARL2: ridge on
    the full design; VARL1: lasso; VARLG: group lasso with one group per
    input-series lag block.  Loss is the unnormalized sum of squares plus
    lam times the penalty.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    X, Y, p, K, T = design.X, design.Y, design.p, design.K, design.T
    W = np.zeros((K * p, K))
    if method == "AR":
        eye = lam * np.eye(p)
        for k in range(K):
            blk = design.block(k)
            Xk = X[:, blk]
            W[blk, k] = np.linalg.solve(Xk.T @ Xk + eye, Xk.T @ Y[:, k])
        return W
    if method == "VARL2":
        return np.linalg.solve(X.T @ X + lam * np.eye(K * p), X.T @ Y)
    if method == "VARL1":
        spec = ProxSpec("l1")
    elif method == "VARLG":
        spec = ProxSpec("group_l2", groups=[np.arange(b * p, (b + 1) * p) for b in range(K)])
    else:
        raise ValueError(f"unknown baseline method: {method!r}")
    cfg = cfg or SolverConfig(max_iter=1000, tol=1e-9)
    for k in range(K):
        W[:, k] = prox_regression_fit(X, Y[:, k], lam / T, spec, cfg)
    return W


def granger_adjacency(W: np.ndarray, p: int, tol: float = 1e-6) -> np.ndarray:
    """Binary K x K graph: entry (l, k) = 1 when the lag block of input
    series l in task k has max |value| above tol times max |W|."""
    W = np.asarray(W, dtype=float)
    K = W.shape[1]
    if W.shape[0] != K * p:
        raise ValueError("W must be Kp x K")
    top = np.abs(W).max()
    adj = np.zeros((K, K), dtype=int)
    if top == 0.0:
        return adj
    for l in range(K):
        block = np.abs(W[l * p : (l + 1) * p, :]).max(axis=0)
        adj[l] = block > tol * top
    return adj


def var1_to_design_weights(A: np.ndarray, p: int) -> np.ndarray:
    """Expand first-order coefficients A (entry (l, k) = effect of series l
    on series k) into the Kp x K layout with the lag-1 rows filled."""
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    W = np.zeros((K * p, K))
    W[::p, :] = A
    return W


def forecast_onestep(W: np.ndarray, recent_lags) -> np.ndarray:
    """One-step forecast from a Kp-long lag vector in design layout."""
    return np.asarray(recent_lags, dtype=float) @ W


def sliding_holdout_eval(W: np.ndarray, series, holdout_len: int, p: int) -> np.ndarray:
    """Fixed-model one-step forecasts for the last holdout_len time points,
    sliding the lag window forward through the data."""
    design = build_design(series, p)
    if holdout_len < 1 or holdout_len > design.T:
        raise ValueError("holdout_len out of range")
    return (design.X @ W)[-holdout_len:]
