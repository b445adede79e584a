"""Kernels, Gram matrices, kernel-derivative matrices and kernel ridge regression.

Supported kernel families (all with closed-form first and second partial
derivatives):

    linear       k(x, x') = <x, x'>
    polynomial   k(x, x') = (<x, x'> + c)^p
    gaussian     k(x, x') = exp(-||x - x'||^2 / (2 sigma^2))

`grad1_matrix(spec, X1, X2, a)[i, j]` is the partial derivative of
k(s, r) with respect to s_a evaluated at (s, r) = (X1[i], X2[j]);
`grad2_matrix(spec, X1, X2, a, b)[i, j]` additionally differentiates with
respect to r_b of the second argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with parameters.

    kind: "linear" | "polynomial" | "gaussian"
    degree/offset apply to polynomial, width to gaussian.
    """

    kind: str
    degree: int = 3
    offset: float = 1.0  # conventional inhomogeneous form (<x,x'> + c)^p
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "gaussian"):
            raise ValueError(f"unknown kernel kind: {self.kind!r}")
        if self.kind == "polynomial":
            if self.degree < 1:
                raise ValueError("polynomial degree must be >= 1")
            if self.offset < 0:
                raise ValueError("polynomial offset must be >= 0")
        if self.kind == "gaussian" and not self.width > 0:
            raise ValueError("gaussian width must be > 0")


def linear() -> KernelSpec:
    return KernelSpec("linear")


def polynomial(degree: int, offset: float = 1.0) -> KernelSpec:
    return KernelSpec("polynomial", degree=degree, offset=offset)


def gaussian(width: float) -> KernelSpec:
    return KernelSpec("gaussian", width=width)


def _as2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    return X


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    """Evaluate k(x, x') for a single pair of d-vectors."""
    x = np.asarray(x, dtype=float).ravel()
    xp = np.asarray(xp, dtype=float).ravel()
    if x.shape != xp.shape:
        raise ValueError("dimension mismatch between x and x'")
    return float(gram_matrix(spec, x[None, :], xp[None, :])[0, 0])


def gram_matrix(spec: KernelSpec, X1, X2) -> np.ndarray:
    """Pairwise kernel matrix with entries k(X1[i], X2[j])."""
    X1, X2 = _as2d(X1), _as2d(X2)
    if X1.shape[1] != X2.shape[1]:
        raise ValueError("dimension mismatch between X1 and X2")
    if spec.kind == "linear":
        return X1 @ X2.T
    if spec.kind == "polynomial":
        return (X1 @ X2.T + spec.offset) ** spec.degree
    # gaussian
    sq = cdist(X1, X2, "sqeuclidean")
    return np.exp(-sq / (2.0 * spec.width**2))


def grad1_matrix(spec: KernelSpec, X1, X2, a: int) -> np.ndarray:
    """First-derivative matrix: d/ds_a k(s, r) at (s, r) = (X1[i], X2[j]).

    Closed forms:
        linear       X2[j]_a
        polynomial   p (<s,r> + c)^(p-1) * r_a
        gaussian     k(s,r) * (r_a - s_a) / sigma^2
    """
    X1, X2 = _as2d(X1), _as2d(X2)
    d = X1.shape[1]
    if X2.shape[1] != d:
        raise ValueError("dimension mismatch between X1 and X2")
    if not 0 <= a < d:
        raise IndexError(f"dimension index {a} out of range for d={d}")
    if spec.kind == "linear":
        return np.broadcast_to(X2[:, a], (X1.shape[0], X2.shape[0])).copy()
    if spec.kind == "polynomial":
        base = X1 @ X2.T + spec.offset
        return spec.degree * base ** (spec.degree - 1) * X2[:, a][None, :]
    K = gram_matrix(spec, X1, X2)
    diff = X2[:, a][None, :] - X1[:, a][:, None]
    return K * diff / spec.width**2


def grad2_matrix(spec: KernelSpec, X1, X2, a: int, b: int) -> np.ndarray:
    """Mixed second-derivative matrix: d^2/(ds_a dr_b) k(s, r) at (X1[i], X2[j]).

    Closed forms:
        linear       delta_{ab}
        polynomial   p(p-1)(<s,r>+c)^(p-2) s_b r_a  +  delta_{ab} p(<s,r>+c)^(p-1)
        gaussian     k(s,r)/sigma^2 * (delta_{ab} - (s_a-r_a)(s_b-r_b)/sigma^2)
    """
    X1, X2 = _as2d(X1), _as2d(X2)
    d = X1.shape[1]
    if X2.shape[1] != d:
        raise ValueError("dimension mismatch between X1 and X2")
    if not (0 <= a < d and 0 <= b < d):
        raise IndexError(f"dimension indices ({a},{b}) out of range for d={d}")
    n1, n2 = X1.shape[0], X2.shape[0]
    if spec.kind == "linear":
        return np.full((n1, n2), 1.0 if a == b else 0.0)
    if spec.kind == "polynomial":
        base = X1 @ X2.T + spec.offset
        p = spec.degree
        if p >= 2:
            out = p * (p - 1) * base ** (p - 2) * np.outer(X1[:, b], X2[:, a])
        else:
            out = np.zeros((n1, n2))
        if a == b:
            out = out + p * base ** (p - 1)
        return out
    K = gram_matrix(spec, X1, X2)
    s2 = spec.width**2
    da = X1[:, a][:, None] - X2[:, a][None, :]
    db = X1[:, b][:, None] - X2[:, b][None, :]
    out = -K * da * db / s2**2
    if a == b:
        out = out + K / s2
    return out


def normalize_trace(K: np.ndarray, target: float) -> np.ndarray:
    """Rescale a square matrix so its trace equals `target`."""
    if target <= 0:
        raise ValueError("target trace must be > 0")
    tr = float(np.trace(K))
    if tr <= 0:
        raise ValueError("matrix trace must be > 0 to normalize")
    return K * (target / tr)


def median_width(X, k: int = 20) -> float:
    """Median Euclidean distance to the k nearest neighbours, pooled over points.

    Collects, for every point, the distances to its k nearest neighbours
    (self excluded) and returns the median of the pooled n*k distances.
    """
    X = _as2d(X)
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    dist = cdist(X, X)
    np.fill_diagonal(dist, np.inf)
    knn = np.partition(dist, k - 1, axis=1)[:, :k]
    sigma = float(np.median(knn))
    if sigma == 0.0:
        raise ValueError("degenerate data: zero median neighbour distance")
    return sigma


@dataclass
class KrrModel:
    """Kernel ridge regression model with dual coefficients c solving
    (K + lambda n I) c = y; prediction f(x) = sum_i c_i k(x_i, x)."""

    X: np.ndarray
    c: np.ndarray
    spec: KernelSpec
    lam: float


def krr_fit(X, y, spec: KernelSpec, lam: float) -> KrrModel:
    X = _as2d(X)
    y = np.asarray(y, dtype=float).ravel()
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    n = X.shape[0]
    if y.shape[0] != n:
        raise ValueError("X and y have inconsistent lengths")
    K = gram_matrix(spec, X, X)
    c = np.linalg.solve(K + lam * n * np.eye(n), y)
    return KrrModel(X=X, c=c, spec=spec, lam=lam)


def krr_predict(model: KrrModel, Xs) -> np.ndarray:
    Xs = _as2d(Xs)
    Kx = gram_matrix(model.spec, Xs, model.X)
    return Kx @ model.c
