"""Catalan numbers and the Dyck-path count they enumerate."""
from __future__ import annotations

import math
from itertools import product

from .curves import OracleError

MAX_K = 30


def catalan_moment(k: int) -> int:
    """C_k = binom(2k, k) / (k + 1), the 2k-th moment of the semicircle."""
    if k < 0:
        raise OracleError("Catalan index must be nonnegative")
    if k > MAX_K:
        raise OracleError(f"Catalan moments provided up to k = {MAX_K}")
    return math.comb(2 * k, k) // (k + 1)


def count_dyck_paths(k: int) -> int:
    """Brute force: +-1 walks of length 2k that stay >= 0 and return to 0."""
    count = 0
    for steps in product((1, -1), repeat=2 * k):
        h = 0
        for s in steps:
            h += s
            if h < 0:
                break
        else:
            count += h == 0
    return count


def semicircle_moment(k: int) -> float:
    """k-th moment of rho_sc: C_{k/2} for even k, 0 for odd k."""
    return 0.0 if k % 2 else float(catalan_moment(k // 2))
