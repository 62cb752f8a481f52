"""Viterbi lattice kernels.

Two interchangeable backends: a numba-compiled loop and a vectorized
numpy fallback. Set ZHSEG_NO_NUMBA=1 to force the numpy path; the
fallback is also selected automatically when numba is unavailable.
Both return bit-identical paths (first-maximum tie handling).
"""
from __future__ import annotations

import os

import numpy as np

from .corpus import END_OK, LEGAL_NEXT, START_OK

try:
    import numba as nb
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

_NO_NUMBA_ENV = os.environ.get("ZHSEG_NO_NUMBA", "") not in ("", "0")
USE_NUMBA = HAS_NUMBA and not _NO_NUMBA_ENV

_LEGAL_F = np.where(LEGAL_NEXT, 0.0, -np.inf)
_START_F = np.where(START_OK, 0.0, -np.inf)
_END_F = np.where(END_OK, 0.0, -np.inf)


def viterbi_path_np(emissions: np.ndarray, transitions: np.ndarray, masked: bool = True) -> np.ndarray:
    """Best tag path by backward DP, then a greedy forward walk.

    The forward walk takes the lowest tag index among score ties, which
    yields the lexicographically smallest optimal path under B<M<E<S.
    """
    n = emissions.shape[0]
    trans = transitions + _LEGAL_F if masked else transitions
    beta = np.empty((n, 4))
    beta[n - 1] = emissions[n - 1] + (_END_F if masked else 0.0)
    for i in range(n - 2, -1, -1):
        beta[i] = emissions[i] + (trans + beta[i + 1]).max(axis=1)
    tags = np.empty(n, dtype=np.int64)
    start = beta[0] + (_START_F if masked else 0.0)
    tags[0] = np.argmax(start)
    for i in range(1, n):
        tags[i] = np.argmax(trans[tags[i - 1]] + beta[i])
    return tags


if HAS_NUMBA:

    @nb.njit(cache=True)
    def _viterbi_nb(emissions, trans, end_pen, start_pen):  # pragma: no cover - timed via wrapper
        n = emissions.shape[0]
        beta = np.empty((n, 4))
        for t in range(4):
            beta[n - 1, t] = emissions[n - 1, t] + end_pen[t]
        for i in range(n - 2, -1, -1):
            for t in range(4):
                best = -np.inf
                for j in range(4):
                    v = trans[t, j] + beta[i + 1, j]
                    if v > best:
                        best = v
                beta[i, t] = emissions[i, t] + best
        tags = np.empty(n, dtype=np.int64)
        bt = 0
        best = -np.inf
        for t in range(4):
            v = beta[0, t] + start_pen[t]
            if v > best:
                best = v
                bt = t
        tags[0] = bt
        for i in range(1, n):
            prev = tags[i - 1]
            bt = 0
            best = -np.inf
            for j in range(4):
                v = trans[prev, j] + beta[i, j]
                if v > best:
                    best = v
                    bt = j
            tags[i] = bt
        return tags

    def viterbi_path_numba(emissions: np.ndarray, transitions: np.ndarray, masked: bool = True) -> np.ndarray:
        trans = transitions + _LEGAL_F if masked else np.asarray(transitions, dtype=np.float64)
        end_pen = _END_F if masked else np.zeros(4)
        start_pen = _START_F if masked else np.zeros(4)
        return _viterbi_nb(
            np.ascontiguousarray(emissions, dtype=np.float64),
            np.ascontiguousarray(trans, dtype=np.float64),
            end_pen,
            start_pen,
        )

else:
    viterbi_path_numba = None


viterbi_path = viterbi_path_numba if USE_NUMBA else viterbi_path_np


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
