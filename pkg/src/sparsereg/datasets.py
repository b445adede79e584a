"""Synthetic data generators and stationarizing transforms.

Regression generators
---------------------
SE1  d=18,  y = sin((x1+x3)^2) sin(x7 x8 x9) + noise(0.1), relevant {1,3,7,8,9}
SE2  d=100, y = log((x1+...+x5)^2) + noise(0.1), relevant {1..5}
SE3  d=1000, two latent normals u, v with 5 noisy copies each forming the
     relevant inputs; y = 10(u^2+v^2) exp(-2(u^2+v^2)) + noise(0.01)
E1   d=18, groups of three; y sums x_i x_j x_k over ordered triples within
     groups 1 and 3 (dims {1,2,3} and {7,8,9})
E2   as E1 but sums over all index triples, with pairs of dimensions
     correlated at 0.95
E3   six latent normals with three noisy copies each; y = 10(z1^2+z3^2)
     exp(-2(z1^2+z3^2)) + noise

Noise figures denote standard deviations (validated against the mean
predictor's error on each problem).

Time-series generators
----------------------
gen_var          stationary lagged VAR with leading-indicator cluster structure
gen_psi_process  5-series MA(1) filter of centered unit-variance exponential
                 noise with a two-block dependency structure
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrueStructure:
    """Ground truth accompanying a generated dataset."""

    relevant: np.ndarray | None = None  # 0-based relevant dimensions
    groups: list | None = None  # list of index arrays (grouped designs)
    W_true: np.ndarray | None = None  # Kp x K true VAR coefficients
    adjacency: np.ndarray | None = None  # K x K binary, (l,k): l causes k
    psi: np.ndarray | None = None
    blocks: list = field(default_factory=list)


# ---------------------------------------------------------------- regression


def _se_xy(gen_id: str, n: int, rng: np.random.Generator):
    if gen_id == "SE1":
        X = rng.standard_normal((n, 18))
        signal = np.sin((X[:, 0] + X[:, 2]) ** 2) * np.sin(X[:, 6] * X[:, 7] * X[:, 8])
        y = signal + 0.1 * rng.standard_normal(n)
    elif gen_id == "SE2":
        X = rng.standard_normal((n, 100))
        signal = np.log(X[:, :5].sum(axis=1) ** 2)
        y = signal + 0.1 * rng.standard_normal(n)
    elif gen_id == "SE3":
        Z = rng.standard_normal((n, 200))
        X = np.repeat(Z, 5, axis=1) + 0.1 * rng.standard_normal((n, 1000))
        t = Z[:, 0] ** 2 + Z[:, 1] ** 2
        signal = 10.0 * t * np.exp(-2.0 * t)
        y = signal + 0.01 * rng.standard_normal(n)
    else:
        raise ValueError(f"unknown generator id: {gen_id!r}")
    return X, y, signal


def se_structure(gen_id: str) -> TrueStructure:
    if gen_id == "SE1":
        return TrueStructure(relevant=np.array([0, 2, 6, 7, 8]))
    if gen_id == "SE2":
        return TrueStructure(relevant=np.arange(5))
    if gen_id == "SE3":
        return TrueStructure(relevant=np.arange(10))
    raise ValueError(f"unknown generator id: {gen_id!r}")


def gen_se(gen_id: str, n_train: int, n_val: int, n_test: int, seed: int = 0):
    """Generate train/validation/test splits for SE1/SE2/SE3.

    Returns ({"train": (X, y), "val": ..., "test": ...}, TrueStructure).
    """
    if min(n_train, n_val, n_test) < 1:
        raise ValueError("split sizes must be >= 1")
    rng = np.random.default_rng(seed)
    X, y, _ = _se_xy(gen_id, n_train + n_val + n_test, rng)
    splits = {
        "train": (X[:n_train], y[:n_train]),
        "val": (X[n_train : n_train + n_val], y[n_train : n_train + n_val]),
        "test": (X[n_train + n_val :], y[n_train + n_val :]),
    }
    return splits, se_structure(gen_id)


def _e_groups() -> list:
    return [np.arange(3 * g, 3 * g + 3) for g in range(6)]


def gen_e(gen_id: str, n: int, seed: int = 0):
    """Generate one sample of an E1/E2/E3 dataset (rows are iid)."""
    rng = np.random.default_rng(seed)
    groups = _e_groups()
    relevant = np.array([0, 1, 2, 6, 7, 8])
    if gen_id == "E1":
        X = rng.standard_normal((n, 18))
        y = np.zeros(n)
        for g in (X[:, 0:3], X[:, 6:9]):
            for i in range(3):
                for j in range(i, 3):
                    for k in range(j, 3):
                        y += g[:, i] * g[:, j] * g[:, k]
        y += 0.01 * rng.standard_normal(n)
    elif gen_id == "E2":
        # pairs (i, i+6) for i in 1..6 and (13,16),(14,17),(15,18) at rho=0.95
        rho = 0.95
        X = np.empty((n, 18))
        base = rng.standard_normal((n, 9))
        mix = rng.standard_normal((n, 9))
        c = np.sqrt(1.0 - rho**2)
        for i in range(6):
            X[:, i] = base[:, i]
            X[:, i + 6] = rho * base[:, i] + c * mix[:, i]
        for i in range(3):
            X[:, 12 + i] = base[:, 6 + i]
            X[:, 15 + i] = rho * base[:, 6 + i] + c * mix[:, 6 + i]
        s1 = X[:, 0:3].sum(axis=1)
        s2 = X[:, 6:9].sum(axis=1)
        y = s1**3 + s2**3 + 0.01 * rng.standard_normal(n)
    elif gen_id == "E3":
        Z = rng.standard_normal((n, 6))
        X = np.repeat(Z, 3, axis=1) + 0.1 * rng.standard_normal((n, 18))
        t = Z[:, 0] ** 2 + Z[:, 2] ** 2
        y = 10.0 * t * np.exp(-2.0 * t) + 0.01 * rng.standard_normal(n)
    else:
        raise ValueError(f"unknown generator id: {gen_id!r}")
    return X, y, TrueStructure(relevant=relevant, groups=groups)


# ---------------------------------------------------------------- time series


def var_companion(W: np.ndarray, K: int) -> np.ndarray:
    """Companion matrix of a VAR(p) given its K*p x K coefficient matrix in
    the lag-blocked layout (row b*p + j-1 = series b at lag j).  The process
    is stationary iff the companion spectral radius is below one."""
    W = np.asarray(W, dtype=float)
    p = W.shape[0] // K
    if W.shape != (K * p, K):
        raise ValueError("W must be K*p x K")
    comp = np.zeros((K * p, K * p))
    for j in range(p):
        # lag-(j+1) coefficient matrix, entry (l, k): effect of series l on k
        comp[:K, j * K : (j + 1) * K] = W[j :: p, :].T
    if p > 1:
        comp[K:, :-K] = np.eye(K * (p - 1))
    return comp


def _cluster_var_coefficients(
    K: int, clusters: int, leading_per_cluster: int, lags: int,
    rng: np.random.Generator,
):
    """Draw VAR(lags) coefficients with own-history terms on every diagonal
    block and leading-indicator blocks per cluster.  Every active edge
    carries a coefficient on each lag (uniform magnitude, random sign), so
    the dependence is spread thinly across the whole lag window."""
    # A[l, k, j]: effect of series l at lag j+1 on series k
    A = np.zeros((K, K, lags))
    adjacency = np.zeros((K, K), dtype=int)
    for k in range(K):
        A[k, k, :] = rng.uniform(0.10, 0.35, lags) * rng.choice([-1.0, 1.0], lags)
        adjacency[k, k] = 1
    if clusters >= 1 and leading_per_cluster >= 1 and clusters * leading_per_cluster <= K:
        sizes = np.full(clusters, K // clusters)
        sizes[: K % clusters] += 1
        start = 0
        for c in range(clusters):
            members = np.arange(start, start + sizes[c])
            leaders = members[:leading_per_cluster]
            for l in leaders:
                for k in members:
                    if k == l:
                        continue
                    A[l, k, :] = rng.uniform(0.10, 0.32, lags) * rng.choice(
                        [-1.0, 1.0], lags
                    )
                    adjacency[l, k] = 1
            start += sizes[c]
    return A, adjacency


def _full_var_coefficients(K: int, lags: int, rng: np.random.Generator):
    A = rng.uniform(0.10, 0.32, (K, K, lags)) * rng.choice([-1.0, 1.0], (K, K, lags))
    return A, np.ones((K, K), dtype=int)


def gen_var(
    K: int,
    clusters: int,
    leading_per_cluster: int,
    T: int,
    seed: int = 0,
    lags: int = 6,
    spectral_target: float = 0.95,
    burn_in: int = 200,
):
    """Simulate a structured stationary VAR(lags) with standard-normal noise.

    leading_per_cluster = 0 gives the diagonal-only (pure AR) design;
    clusters = 0 gives the fully connected VAR.  The coefficients are
    rescaled by a common factor (bisected) so the companion spectral radius
    hits spectral_target.  Returns (series T x K, TrueStructure with W_true
    (K*lags x K) in the lag-blocked layout of build_design and the binary
    K x K adjacency including the diagonal).
    """
    rng = np.random.default_rng(seed)
    if clusters == 0:
        A, adjacency = _full_var_coefficients(K, lags, rng)
    else:
        A, adjacency = _cluster_var_coefficients(
            K, clusters, leading_per_cluster, lags, rng
        )
    # W in the build_design layout: row l*lags + j-1 = series l at lag j
    W = A.transpose(0, 2, 1).reshape(K * lags, K)

    def _radius(c: float) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(var_companion(c * W, K)))))

    lo, hi = 0.0, 1.0
    while _radius(hi) < spectral_target:
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _radius(mid) < spectral_target:
            lo = mid
        else:
            hi = mid
    W = lo * W
    assert _radius(1.0) < 1.0
    # lag-j coefficient matrices for the recursion, entry (l, k)
    A_lag = [W[j::lags, :] for j in range(lags)]
    Y = np.zeros((T + burn_in, K))
    for t in range(lags, T + burn_in):
        acc = rng.standard_normal(K)
        for j in range(lags):
            acc += A_lag[j].T @ Y[t - 1 - j]
        Y[t] = acc
    return Y[burn_in:], TrueStructure(W_true=W, adjacency=adjacency)


PSI = np.array(
    [
        [0.7, 1.3, 0.0, 0.0, 0.0],
        [0.0, 0.6, -1.5, 0.0, 0.0],
        [0.0, -1.2, 1.46, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.6, 1.4],
        [0.0, 0.0, 0.0, 1.3, -0.5],
    ]
)


def gen_psi_process(n: int, seed: int = 0):
    """y_t = e_t + Psi e_{t-1} with iid exponential noise re-centered to zero
    mean and unit variance; two independent blocks {1,2,3} and {4,5}."""
    rng = np.random.default_rng(seed)
    e = rng.exponential(1.0, (n + 1, 5)) - 1.0  # Exp(1): mean 1, var 1
    Y = e[1:] + e[:-1] @ PSI.T
    structure = TrueStructure(
        psi=PSI.copy(), blocks=[np.array([0, 1, 2]), np.array([3, 4])]
    )
    return Y, structure


# ---------------------------------------------------------------- transforms


def stationarize(series, code: int) -> np.ndarray:
    """Stationarizing transforms:
    1 identity; 2 first difference; 3 second difference; 4 log;
    5 log-returns ln(z_t / z_{t-1}); 6 first difference of log-returns."""
    z = np.asarray(series, dtype=float)
    if code == 1:
        return z.copy()
    if code == 2:
        return np.diff(z, axis=0)
    if code == 3:
        return np.diff(z, n=2, axis=0)
    if code in (4, 5, 6):
        if np.any(z <= 0):
            raise ValueError("log transforms require strictly positive values")
        logz = np.log(z)
        if code == 4:
            return logz
        if code == 5:
            return np.diff(logz, axis=0)
        return np.diff(logz, n=2, axis=0)
    raise ValueError(f"unknown transform code: {code}")
