"""Accelerated elementwise hot kernels with a pure-numpy fallback.

The random-feature map and its gradient spend most of their time in
elementwise cos/sin over n x D matrices; those loops are compiled with
numba when available.  Set the environment variable ``SPARSEREG_NUMBA=0``
(or ``false``/``off``) to force the numpy path; the flag is read at import
time.  Both paths compute the same expressions and agree to the last bit
on identical inputs up to libm rounding.
"""

from __future__ import annotations

import os

import numpy as np


def _flag_enabled() -> bool:
    return os.environ.get("SPARSEREG_NUMBA", "1").lower() not in ("0", "false", "off")


_HAVE_NUMBA = False
if _flag_enabled():
    try:
        from numba import njit, prange

        _HAVE_NUMBA = True
    except ImportError:
        pass


def using_numba() -> bool:
    """True when the compiled path is active."""
    return _HAVE_NUMBA


def _cos_plus_phase_np(P, b, scale):
    return scale * np.cos(P + b[None, :])


def _sin_plus_phase_np(P, b):
    return np.sin(P + b[None, :])


if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _cos_plus_phase_nb(P, b, scale):  # pragma: no cover - compiled
        n, D = P.shape
        out = np.empty((n, D))
        for i in prange(n):
            for j in range(D):
                out[i, j] = scale * np.cos(P[i, j] + b[j])
        return out

    @njit(cache=True, parallel=True)
    def _sin_plus_phase_nb(P, b):  # pragma: no cover - compiled
        n, D = P.shape
        out = np.empty((n, D))
        for i in prange(n):
            for j in range(D):
                out[i, j] = np.sin(P[i, j] + b[j])
        return out


def cos_plus_phase(P: np.ndarray, b: np.ndarray, scale: float) -> np.ndarray:
    """scale * cos(P + b) broadcast over rows."""
    if _HAVE_NUMBA:
        return _cos_plus_phase_nb(np.ascontiguousarray(P), b, scale)
    return _cos_plus_phase_np(P, b, scale)


def sin_plus_phase(P: np.ndarray, b: np.ndarray) -> np.ndarray:
    """sin(P + b) broadcast over rows."""
    if _HAVE_NUMBA:
        return _sin_plus_phase_nb(np.ascontiguousarray(P), b)
    return _sin_plus_phase_np(P, b)
