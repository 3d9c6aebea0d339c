"""Hash layer: known-answer vectors, independent-reference equivalence, and
the compiled/fallback parity."""

import random

from hypothesis import given, strategies as st

from commitreveal2.keccak import _keccak256_py, keccak256
from oracles import keccak256_ref

KNOWN_EMPTY = bytes.fromhex(
    "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470")


def test_empty_string_known_vector():
    assert keccak256(b"") == KNOWN_EMPTY


def test_determinism():
    data = b"the same input"
    assert keccak256(data) == keccak256(data)


def test_matches_independent_reference_across_sizes():
    rng = random.Random(11)
    for size in [0, 1, 7, 31, 32, 33, 64, 135, 136, 137, 271, 272, 273, 1000]:
        data = rng.randbytes(size)
        assert keccak256(data) == keccak256_ref(data), f"size {size}"


def test_compiled_and_fallback_paths_agree():
    rng = random.Random(12)
    for size in [0, 5, 136, 137, 400]:
        data = rng.randbytes(size)
        assert keccak256(data) == _keccak256_py(data)


def test_concatenation_order_matters():
    rng = random.Random(13)
    for _ in range(1000):
        a, b = rng.randbytes(32), rng.randbytes(32)
        if a == b:
            continue
        assert keccak256(a + b) != keccak256(b + a)


@given(st.binary(max_size=600))
def test_reference_equivalence_property(data):
    assert keccak256(data) == keccak256_ref(data)


@given(st.binary(max_size=200), st.binary(min_size=1, max_size=200))
def test_distinct_inputs_distinct_digests(data, suffix):
    assert keccak256(data) != keccak256(data + suffix)
