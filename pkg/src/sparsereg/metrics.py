"""Error and support-recovery metrics."""

from __future__ import annotations

import numpy as np


def mse(pred, y) -> float:
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.mean((pred - y) ** 2))


def rmse(pred, y) -> float:
    return float(np.sqrt(mse(pred, y)))


def rel_mse(pred, ref_pred, y) -> float:
    """MSE of `pred` relative to the MSE of a reference predictor
    (true-model oracle or random walk)."""
    denom = mse(ref_pred, y)
    if denom == 0:
        raise ValueError("reference predictor has zero error")
    return mse(pred, y) / denom


def tanimoto(sel, true_sel) -> float:
    """1 - |A∩B| / |A∪B| between two index sets; 0 when both are empty."""
    a, b = set(np.asarray(sel).ravel().tolist()), set(np.asarray(true_sel).ravel().tolist())
    union = a | b
    if not union:
        return 0.0
    return 1.0 - len(a & b) / len(union)


def sel_error(adj, true_adj) -> float:
    """Average of the false negative and false positive rates of a binary
    selection (adjacency matrix or support indicator) vs. the truth."""
    a = np.asarray(adj).astype(bool).ravel()
    t = np.asarray(true_adj).astype(bool).ravel()
    if a.shape != t.shape:
        raise ValueError("shape mismatch between selection and truth")
    pos = t.sum()
    neg = (~t).sum()
    fnr = float((t & ~a).sum() / pos) if pos else 0.0
    fpr = float((~t & a).sum() / neg) if neg else 0.0
    return 0.5 * (fnr + fpr)


def support_size(sel) -> int:
    sel = np.asarray(sel)
    if sel.dtype == bool:
        return int(sel.sum())
    return int(np.asarray(sel).ravel().size)


def edge_proportion(adj) -> float:
    a = np.asarray(adj).astype(bool)
    return float(a.sum() / a.size)
