"""Hot-loop kernels: compiled extension when available, pure Python otherwise.

The backend is selected once at import time. Set ``SCHOOLSIM_PURE_KERNELS=1``
to force the fallback (used by the benchmark and the parity tests).
"""

from __future__ import annotations

import os
from typing import Hashable, Sequence

import numpy as np

from . import pure

try:
    from . import _native  # type: ignore[attr-defined]

    HAVE_NATIVE = True
except ImportError:
    _native = None  # type: ignore[assignment]
    HAVE_NATIVE = False

USE_NATIVE = HAVE_NATIVE and os.environ.get("SCHOOLSIM_PURE_KERNELS") != "1"


def active_backend() -> str:
    return "native" if USE_NATIVE else "pure"


def _intern(x: Sequence[Hashable], y: Sequence[Hashable]) -> tuple[list[int], list[int]]:
    ids: dict[Hashable, int] = {}
    xi = [ids.setdefault(t, len(ids)) for t in x]
    yi = [ids.setdefault(t, len(ids)) for t in y]
    return xi, yi


def lcs_length_pure(x: Sequence[Hashable], y: Sequence[Hashable]) -> int:
    xi, yi = _intern(x, y)
    return pure.lcs_length_ids(xi, yi)


def lcs_length_native(x: Sequence[Hashable], y: Sequence[Hashable]) -> int:
    if not HAVE_NATIVE:
        raise RuntimeError("compiled kernel not available")
    xi, yi = _intern(x, y)
    return _native.lcs_length_ids(
        np.asarray(xi, dtype=np.int64), np.asarray(yi, dtype=np.int64)
    )


def lcs_length(x: Sequence[Hashable], y: Sequence[Hashable]) -> int:
    """Longest common subsequence length of two token sequences."""
    if USE_NATIVE:
        return lcs_length_native(x, y)
    return lcs_length_pure(x, y)
