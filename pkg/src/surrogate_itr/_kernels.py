"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``SURROGATE_ITR_NUMBA`` is not
set to ``0``. Both paths are always importable under explicit names
(``*_numpy`` / ``*_numba``) so tests and the benchmark can compare them.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SURROGATE_ITR_NUMBA", "1") != "0"


# ---------------------------------------------------------------------------
# influence values
# ---------------------------------------------------------------------------


def influence_terms_numpy(a, y, e, mu0, mu1, pi_y, pi_s, lam):
    """Rowwise (phi, omega, psi, dr_ate) for one nuisance bundle."""
    w = a / e - (1.0 - a) / (1.0 - e)
    resid = w * (y - (a * mu1 + (1.0 - a) * mu0))
    tau = mu1 - mu0
    gap = pi_y - pi_s
    phi = gap * resid + tau * gap
    omega = pi_s * resid + tau * pi_s
    centered = pi_s - lam
    psi = centered * resid + tau * centered
    return phi, omega, psi, resid + tau


def _influence_terms_loop(a, y, e, mu0, mu1, pi_y, pi_s, lam):
    n = a.shape[0]
    phi = np.empty(n)
    omega = np.empty(n)
    psi = np.empty(n)
    ate = np.empty(n)
    for i in range(n):
        ai = a[i]
        w = ai / e[i] - (1.0 - ai) / (1.0 - e[i])
        resid = w * (y[i] - (ai * mu1[i] + (1.0 - ai) * mu0[i]))
        tau = mu1[i] - mu0[i]
        gap = pi_y[i] - pi_s[i]
        phi[i] = gap * resid + tau * gap
        omega[i] = pi_s[i] * resid + tau * pi_s[i]
        centered = pi_s[i] - lam
        psi[i] = centered * resid + tau * centered
        ate[i] = resid + tau
    return phi, omega, psi, ate


# ---------------------------------------------------------------------------
# least-squares stump search
# ---------------------------------------------------------------------------


def best_split_numpy(X, order, resid, min_leaf):
    """Best single-feature threshold split of ``resid`` by squared error.

    ``order[:, j]`` must be ``argsort(X[:, j])`` (stable). Returns
    ``(feature, threshold, left_value, right_value, gain)``; feature is -1
    when no split leaves ``min_leaf`` rows on both sides.
    """
    n, d = X.shape
    total = resid.sum()
    base = total * total / n
    best = (-1, 0.0, 0.0, 0.0, 0.0)
    best_gain = 0.0
    if n < 2 * min_leaf:
        return best
    left_n = np.arange(1, n, dtype=np.float64)
    for j in range(d):
        idx = order[:, j]
        xs = X[idx, j]
        cs = np.cumsum(resid[idx])[:-1]
        right = total - cs
        gain = cs * cs / left_n + right * right / (n - left_n) - base
        valid = (xs[:-1] < xs[1:]) & (left_n >= min_leaf) & (n - left_n >= min_leaf)
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            best_gain = gain[i]
            nl = i + 1
            best = (j, 0.5 * (xs[i] + xs[i + 1]), cs[i] / nl, right[i] / (n - nl), gain[i])
    return best


def _best_split_loop(X, order, resid, min_leaf):
    n, d = X.shape
    total = 0.0
    for i in range(n):
        total += resid[i]
    base = total * total / n
    best_j = -1
    best_thr = 0.0
    best_left = 0.0
    best_right = 0.0
    best_gain = 0.0
    if n < 2 * min_leaf:
        return best_j, best_thr, best_left, best_right, best_gain
    for j in range(d):
        cs = 0.0
        for i in range(n - 1):
            cs += resid[order[i, j]]
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            x_here = X[order[i, j], j]
            x_next = X[order[i + 1, j], j]
            if not x_here < x_next:
                continue
            right = total - cs
            gain = cs * cs / nl + right * right / nr - base
            if gain > best_gain:
                best_gain = gain
                best_j = j
                best_thr = 0.5 * (x_here + x_next)
                best_left = cs / nl
                best_right = right / nr
    return best_j, best_thr, best_left, best_right, best_gain


if HAVE_NUMBA:
    influence_terms_numba = njit(cache=False)(_influence_terms_loop)
    best_split_numba = njit(cache=False)(_best_split_loop)
else:  # pragma: no cover
    influence_terms_numba = influence_terms_numpy
    best_split_numba = best_split_numpy


def influence_terms(a, y, e, mu0, mu1, pi_y, pi_s, lam):
    args = [np.ascontiguousarray(v, dtype=np.float64) for v in (a, y, e, mu0, mu1, pi_y, pi_s)]
    if USE_NUMBA:
        return influence_terms_numba(*args, float(lam))
    return influence_terms_numpy(*args, float(lam))


def best_split(X, order, resid, min_leaf):
    if USE_NUMBA:
        return best_split_numba(X, order, resid, int(min_leaf))
    return best_split_numpy(X, order, resid, int(min_leaf))


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
