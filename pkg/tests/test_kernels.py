"""The jitted and numpy kernel variants must agree exactly."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procf import _kernels
from oracles import levenshtein_recursive

seq = st.lists(st.integers(min_value=0, max_value=4), max_size=12)


@given(seq, seq)
def test_levenshtein_np_matches_recursive_oracle(a, b):
    ia = np.array(a, dtype=np.int64)
    ib = np.array(b, dtype=np.int64)
    assert _kernels.levenshtein_np(ia, ib) == levenshtein_recursive(a, b)


@pytest.mark.skipif(not _kernels.USING_NUMBA, reason="numba disabled")
@given(seq, seq)
@settings(deadline=None)
def test_levenshtein_jit_matches_np(a, b):
    ia = np.array(a, dtype=np.int64)
    ib = np.array(b, dtype=np.int64)
    assert _kernels.levenshtein_jit(ia, ib) == _kernels.levenshtein_np(ia, ib)


def _random_column(rng, n, n_classes, discrete):
    if discrete:
        vals = rng.integers(0, 4, size=n).astype(np.float64)
    else:
        vals = rng.random(n)
    order = np.argsort(vals, kind="stable")
    y = rng.integers(0, n_classes, size=n).astype(np.int64)
    return vals[order], y[order]


@pytest.mark.skipif(not _kernels.USING_NUMBA, reason="numba disabled")
def test_best_split_jit_matches_np_bitwise():
    rng = np.random.default_rng(7)
    for trial in range(200):
        n = int(rng.integers(2, 60))
        n_classes = int(rng.integers(2, 5))
        min_leaf = int(rng.integers(1, 4))
        vals, y = _random_column(rng, n, n_classes, discrete=bool(trial % 2))
        got_jit = _kernels.best_split_jit(vals, y, n_classes, min_leaf)
        got_np = _kernels.best_split_np(vals, y, n_classes, min_leaf)
        assert got_jit[0] == got_np[0]
        assert got_jit[1] == got_np[1]  # bit-identical floats


def test_best_split_rejects_constant_column():
    vals = np.ones(10)
    y = np.array([0, 1] * 5, dtype=np.int64)
    assert _kernels.best_split_np(vals, y, 2, 1) == (-1, -1.0)


def test_best_split_finds_separating_threshold():
    vals = np.array([0.0, 0.1, 0.2, 0.8, 0.9, 1.0])
    y = np.array([0, 0, 0, 1, 1, 1], dtype=np.int64)
    pos, dec = _kernels.best_split_np(vals, y, 2, 1)
    assert pos == 2
    assert dec == pytest.approx(0.5)


def test_min_leaf_constraint_respected():
    vals = np.array([0.0, 0.5, 1.0, 1.5])
    y = np.array([0, 1, 1, 1], dtype=np.int64)
    pos, _ = _kernels.best_split_np(vals, y, 2, 2)
    assert pos == 1  # only the middle split leaves 2 rows on each side
