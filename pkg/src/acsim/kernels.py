"""Numeric hot paths: the WSP assignment search and streaming moments.

Each kernel has a numba version and a numpy version with identical results.
Set ACSIM_NO_NUMBA=1 to force the numpy path (also used when numba is missing).
"""

import os

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

CHUNK = 1 << 16


def use_numba() -> bool:
    return HAVE_NUMBA and os.environ.get("ACSIM_NO_NUMBA", "") not in ("1", "true", "yes")


def _search_py(dom, dsize, ckind, ca, cb):
    """Odometer search; last step varies fastest. Returns (found, candidates checked)."""
    n = dsize.shape[0]
    for i in range(n):
        if dsize[i] == 0:
            return False, 0
    idx = np.zeros(n, np.int64)
    pick = np.empty(n, np.int64)
    count = 0
    nc = ckind.shape[0]
    while True:
        for i in range(n):
            pick[i] = dom[i, idx[i]]
        count += 1
        ok = True
        for c in range(nc):
            same = pick[ca[c]] == pick[cb[c]]
            if (ckind[c] == 0 and not same) or (ckind[c] == 1 and same):
                ok = False
                break
        if ok:
            return True, count
        j = n - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < dsize[j]:
                break
            idx[j] = 0
            j -= 1
        if j < 0:
            return False, count


def _moments_py(x):
    n = 0
    mean = 0.0
    m2 = 0.0
    lo = np.inf
    hi = -np.inf
    for i in range(x.shape[0]):
        v = x[i]
        n += 1
        d = v - mean
        mean += d / n
        m2 += d * (v - mean)
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return n, mean, m2, lo, hi


if HAVE_NUMBA:
    _search_jit = njit(cache=True, nogil=True)(_search_py)
    _moments_jit = njit(cache=True, nogil=True)(_moments_py)


def search_numpy(dom, dsize, ckind, ca, cb):
    """Vectorized enumeration in the same order as the odometer, chunked."""
    shape = tuple(int(s) for s in dsize)
    if any(s == 0 for s in shape):
        return False, 0
    total = int(np.prod(shape, dtype=np.int64)) if shape else 1
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        idx = np.unravel_index(flat, shape) if shape else ()
        pick = np.stack([dom[i][idx[i]] for i in range(len(shape))]) if shape else np.zeros((0, flat.size), np.int64)
        ok = np.ones(flat.size, bool)
        for k, a, b in zip(ckind, ca, cb):
            same = pick[a] == pick[b]
            ok &= same if k == 0 else ~same
        hit = np.flatnonzero(ok)
        if hit.size:
            return True, start + int(hit[0]) + 1
    return False, total


def search(dom, dsize, ckind, ca, cb):
    if use_numba():
        found, count = _search_jit(dom, dsize, ckind, ca, cb)
        return bool(found), int(count)
    return search_numpy(dom, dsize, ckind, ca, cb)


def moments(x):
    """(n, mean, sum of squared deviations, min, max) of a float array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if use_numba():
        n, mean, m2, lo, hi = _moments_jit(x)
        return int(n), float(mean), float(m2), float(lo), float(hi)
    if x.size == 0:
        return 0, 0.0, 0.0, float("inf"), float("-inf")
    mean = float(x.mean())
    return int(x.size), mean, float(((x - mean) ** 2).sum()), float(x.min()), float(x.max())
