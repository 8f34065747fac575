"""Pure-Python fallback for the compiled kernels."""

from __future__ import annotations


def lcs_length_ids(x: list[int], y: list[int]) -> int:
    """Length of the longest common subsequence of two id sequences.

    Classic O(len(x) * len(y)) dynamic program with two rolling rows.
    """
    if not x or not y:
        return 0
    if len(x) < len(y):
        x, y = y, x
    prev = [0] * (len(y) + 1)
    curr = [0] * (len(y) + 1)
    for xi in x:
        for j, yj in enumerate(y, start=1):
            if xi == yj:
                curr[j] = prev[j - 1] + 1
            else:
                a = prev[j]
                b = curr[j - 1]
                curr[j] = a if a >= b else b
        prev, curr = curr, prev
    return prev[len(y)]
