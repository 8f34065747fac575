from __future__ import annotations

import os
import random
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schoolsim import _kernels


def oracle_lcs(x: list[str], y: list[str]) -> int:
    """Brute-force subsequence enumeration; independent of the DP kernels."""
    if len(x) > len(y):
        x, y = y, x
    n = len(x)
    best = 0
    for mask in range(1 << n):
        if mask.bit_count() <= best:
            continue
        sub = [x[i] for i in range(n) if mask >> i & 1]
        it = iter(y)
        if all(token in it for token in sub):
            best = len(sub)
    return best


def test_lcs_of_sequence_with_itself_is_its_length():
    tokens = "a b c d e f".split()
    assert _kernels.lcs_length(tokens, tokens) == len(tokens)


def test_lcs_hand_value():
    assert _kernels.lcs_length("the cat sat".split(), "the dog sat".split()) == 2


def test_lcs_disjoint_vocabularies():
    assert _kernels.lcs_length(["a", "b"], ["c", "d"]) == 0


def test_lcs_empty_inputs():
    assert _kernels.lcs_length([], ["a"]) == 0
    assert _kernels.lcs_length(["a"], []) == 0
    assert _kernels.lcs_length([], []) == 0


def test_backends_agree_on_random_inputs():
    if not _kernels.HAVE_NATIVE:
        pytest.skip("compiled kernel not built")
    rng = random.Random(7)
    vocab = [f"w{i}" for i in range(6)]
    for _ in range(300):
        x = [rng.choice(vocab) for _ in range(rng.randint(0, 40))]
        y = [rng.choice(vocab) for _ in range(rng.randint(0, 40))]
        assert _kernels.lcs_length_native(x, y) == _kernels.lcs_length_pure(x, y)


def test_kernel_matches_bruteforce_oracle_small():
    rng = random.Random(11)
    vocab = ["a", "b", "c", "d", "e"]
    for _ in range(200):
        x = [rng.choice(vocab) for _ in range(rng.randint(0, 10))]
        y = [rng.choice(vocab) for _ in range(rng.randint(0, 10))]
        assert _kernels.lcs_length(x, y) == oracle_lcs(x, y)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.sampled_from("abcde"), max_size=10),
    st.lists(st.sampled_from("abcde"), max_size=10),
)
def test_lcs_bounds_and_symmetry(x, y):
    value = _kernels.lcs_length(x, y)
    assert 0 <= value <= min(len(x), len(y))
    assert value == _kernels.lcs_length(y, x)


def test_env_var_forces_pure_backend_at_import():
    result = subprocess.run(
        [sys.executable, "-c", "from schoolsim import _kernels; print(_kernels.active_backend())"],
        env={**os.environ, "SCHOOLSIM_PURE_KERNELS": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert result.stdout.strip() == "pure"
