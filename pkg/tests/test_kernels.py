"""The compiled and pure-Python kernels must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermolock import _pykernels, kernels
from thermolock.adversaries import memory_oracle_weights
from thermolock.bits import pack_words
from thermolock.hashing import random_words, toeplitz_hash_reference

compiled = kernels.compiled_impl
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


@st.composite
def hash_case(draw):
    n = draw(st.integers(1, 200))
    t = draw(st.integers(1, 80))
    x = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    y = draw(st.lists(st.integers(0, 1), min_size=n + t - 1, max_size=n + t - 1))
    return n, t, np.array(x, np.uint8), np.array(y, np.uint8)


@given(hash_case())
@settings(max_examples=150, deadline=None)
def test_python_kernel_matches_matrix_oracle(case):
    n, t, x, y = case
    wy = ((t - 1) >> 6) + ((n + 63) >> 6) + 1
    got = _pykernels.toeplitz_bits(pack_words(x), pack_words(y, wy), n, t)
    assert np.array_equal(got, toeplitz_hash_reference(x, y, t))


@needs_ext
@given(hash_case())
@settings(max_examples=150, deadline=None)
def test_compiled_kernel_matches_python(case):
    n, t, x, y = case
    wy = ((t - 1) >> 6) + ((n + 63) >> 6) + 1
    xw, yw = pack_words(x), pack_words(y, wy)
    assert np.array_equal(compiled.toeplitz_bits(xw, yw, n, t), _pykernels.toeplitz_bits(xw, yw, n, t))


@needs_ext
@pytest.mark.parametrize("n,t", [(1, 1), (63, 2), (64, 64), (65, 17), (300, 33)])
def test_batch_agrees(n, t):
    gen = np.random.default_rng(n * 100 + t)
    wx = (n + 63) >> 6
    wy = ((t - 1) >> 6) + wx + 1
    xs = random_words(gen, 50, n, wx)
    ys = random_words(gen, 50, n + t - 1, wy)
    assert np.array_equal(compiled.toeplitz_batch(xs, ys, n, t), _pykernels.toeplitz_batch(xs, ys, n, t))


@needs_ext
@given(st.integers(0, 3), st.integers(0, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_erasure_counts_agree(g, t, seed):
    width = g + t
    outs = np.random.default_rng(seed).permutation(1 << width)[: 1 << t].astype(np.int64)
    assert np.array_equal(compiled.erasure_counts(outs, width, g, t), _pykernels.erasure_counts(outs, width, g, t))


@needs_ext
@pytest.mark.parametrize("n,g,t", [(2, 1, 1), (2, 0, 2), (3, 1, 2), (3, 1, 3), (4, 1, 1)])
def test_memory_oracle_agree(n, g, t):
    w = memory_oracle_weights(n, t)
    a, b = compiled.memory_oracle(n, g, w), _pykernels.memory_oracle(n, g, w)
    assert a[0] == b[0]


def test_short_operands_rejected():
    with pytest.raises(ValueError):
        _pykernels.toeplitz_bits(np.zeros(1, np.uint64), np.zeros(1, np.uint64), 64, 2)
    if compiled is not None:
        with pytest.raises(ValueError):
            compiled.toeplitz_bits(np.zeros(1, np.uint64), np.zeros(1, np.uint64), 64, 2)


def test_selection_reports_implementation():
    assert kernels.IMPLEMENTATION in ("cython", "python")
    assert kernels.python_impl.IMPLEMENTATION == "python"
