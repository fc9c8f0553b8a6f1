"""Hot numeric kernels, JIT-compiled with numba when available.

Two kernels dominate runtime: the edit-distance DP (pool building and
every fitness evaluation) and the per-column split scan of the surrogate
tree. Both exist in a numba and a pure-numpy variant; set PROCF_NO_NUMBA=1
to force the numpy path. The two variants are bit-identical: gini terms
are accumulated as exact int64 sums of squared class counts and turned
into floats with the same operation order, so split selection cannot
diverge between paths.

``benchmarks/bench_kernels.py`` times both variants and asserts equality.
"""

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("PROCF_NO_NUMBA", "").strip().lower()
    if flag not in ("", "0", "false"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _numba_requested()


# ---------------------------------------------------------------------------
# Levenshtein distance on integer-coded sequences
# ---------------------------------------------------------------------------

def levenshtein_np(a: np.ndarray, b: np.ndarray) -> int:
    """Row-wise DP; the in-row deletion chain closes via a prefix minimum.

    With tmp[j] = min(insert, substitute) the exact row is
    cur[j] = min_{t<=j} (tmp[t] + (j - t)) = j + prefix-min(tmp[t] - t).
    """
    n, m = a.shape[0], b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    offsets = np.arange(m + 1, dtype=np.int64)
    prev = offsets.copy()
    tmp = np.empty(m + 1, dtype=np.int64)
    for i in range(n):
        tmp[0] = i + 1
        np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i]), out=tmp[1:])
        prev = np.minimum.accumulate(tmp - offsets) + offsets
    return int(prev[m])


def _levenshtein_scalar(a, b):  # pragma: no cover - jitted variant below
    n = a.shape[0]
    m = b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(n):
        cur[0] = i + 1
        ai = a[i]
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if b[j - 1] == ai else 1)
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return int(prev[m])


# ---------------------------------------------------------------------------
# Best gini split of one column (values pre-sorted ascending)
# ---------------------------------------------------------------------------
#
# decrease = (sl/nl + sr/nr)/n - st/n^2 where sl, sr, st are the sums of
# squared class counts of the left part, right part and whole node. This is
# the parent gini minus the size-weighted child gini, scaled to the node.

def best_split_np(vals: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Return (position, decrease) of the best split, or (-1, -1.0).

    A split at position i separates rows [0..i] from [i+1..]; the caller
    derives the threshold as the midpoint of vals[i] and vals[i+1].
    """
    n = vals.shape[0]
    if n < 2:
        return -1, -1.0
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y] = 1
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    st = int(np.sum(total * total))

    left = cum[:-1]
    sl = np.sum(left * left, axis=1)
    right = total[None, :] - left
    sr = np.sum(right * right, axis=1)
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl

    dec = (sl / nl + sr / nr) / n - st / (n * n)
    valid = (vals[1:] != vals[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return -1, -1.0
    dec = np.where(valid, dec, -np.inf)
    pos = int(np.argmax(dec))
    return pos, float(dec[pos])


def _best_split_scalar(vals, y, n_classes, min_leaf):  # pragma: no cover
    n = vals.shape[0]
    if n < 2:
        return -1, -1.0
    total = np.zeros(n_classes, dtype=np.int64)
    for i in range(n):
        total[y[i]] += 1
    st = 0
    for k in range(n_classes):
        st += total[k] * total[k]

    left = np.zeros(n_classes, dtype=np.int64)
    sl = 0
    sr = st
    best_pos = -1
    best_dec = -1.0
    found = False
    base = st / (n * n)
    for i in range(n - 1):
        c = y[i]
        r = total[c] - left[c]
        sl += 2 * left[c] + 1
        sr += 1 - 2 * r
        left[c] += 1
        if vals[i + 1] == vals[i]:
            continue
        nl = i + 1
        nr = n - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        dec = (sl / nl + sr / nr) / n - base
        if not found or dec > best_dec:
            best_pos = i
            best_dec = dec
            found = True
    if not found:
        return -1, -1.0
    return best_pos, best_dec


if USING_NUMBA:
    from numba import njit

    levenshtein_jit = njit(cache=True)(_levenshtein_scalar)
    best_split_jit = njit(cache=True)(_best_split_scalar)
    levenshtein_ids = levenshtein_jit
    best_split = best_split_jit
else:  # pure-numpy fallback path
    levenshtein_jit = None
    best_split_jit = None
    levenshtein_ids = levenshtein_np
    best_split = best_split_np
