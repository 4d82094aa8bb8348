"""Finite-N GUE kernel from orthonormal Hermite functions (weight e^{-x^2/2}).

With this weight the eigenvalues of a GUE matrix of variance 1/N are
``lambda = x / sqrt(N)``.
"""
from __future__ import annotations

import math

import numpy as np

from ..resolvent import density_semicircle
from .curves import OracleError

MAX_N = 500


def hermite_functions(n: int, x) -> np.ndarray:
    """psi_0..psi_{n-1} at x, shape (n, *x.shape), by the normalized three-term recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n,) + x.shape)
    out[0] = (2.0 * math.pi) ** -0.25 * np.exp(-x * x / 4.0)
    if n > 1:
        out[1] = x * out[0]
    for k in range(1, n - 1):
        out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    if not np.all(np.isfinite(out)):
        raise OracleError("Hermite recurrence overflowed")
    return out


def _top_two(N: int, x) -> tuple[np.ndarray, np.ndarray]:
    psi = hermite_functions(N + 1, x)
    return psi[N], psi[N - 1]


def hermite_kernel(N: int, x, y, diag_tol: float = 1e-7):
    """K_N(x, y) = sum_{k<N} psi_k(x) psi_k(y).

    Christoffel-Darboux off the diagonal, the plain sum where |x - y| < diag_tol.
    """
    if not 1 <= N <= MAX_N:
        raise OracleError(f"Hermite kernel supported for 1 <= N <= {MAX_N}")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    psx = hermite_functions(N + 1, x)
    psy = hermite_functions(N + 1, y)
    d = x - y
    near = np.abs(d) < diag_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        cd = math.sqrt(N) * (psx[N] * psy[N - 1] - psy[N] * psx[N - 1]) / d
    direct = np.sum(psx[:N] * psy[:N], axis=0)
    return np.where(near, direct, cd)[()]


def hermite_density(N: int, x):
    """K_N(x, x)."""
    psi = hermite_functions(N, x)
    return np.sum(psi * psi, axis=0)[()]


def scaled_kernel(N: int, E: float, a1, a2):
    """K_N(x, y) / (rho_sc(E) sqrt(N)) with x, y = sqrt(N)(E + alpha / (N rho_sc(E)))."""
    rho = float(density_semicircle(E))
    x = math.sqrt(N) * (E + np.asarray(a1, dtype=float) / (N * rho))
    y = math.sqrt(N) * (E + np.asarray(a2, dtype=float) / (N * rho))
    return hermite_kernel(N, x, y) / (rho * math.sqrt(N))


def pair_correlation(N: int, E: float, b: float, edges: np.ndarray,
                     n_energy: int = 41, n_sub: int = 8) -> np.ndarray:
    """Finite-N GUE prediction of the anchored, energy-averaged k=2 estimator.

    Matches ``spacing.correlation_estimate`` for k = 2: first point averaged over
    [E-b, E+b], difference measured in units of the local mean spacing, result
    normalized by the semicircle mass of the window and symmetrized in the
    difference.
    """
    edges = np.asarray(edges, dtype=float)
    ge, we = np.polynomial.legendre.leggauss(n_energy)
    lam = E + b * ge
    wl = b * we
    gs, ws = np.polynomial.legendre.leggauss(n_sub)
    out = np.zeros(edges.size - 1)
    mass = 0.0
    for lv, w in zip(lam, wl):
        rho = float(density_semicircle(lv))
        x = math.sqrt(N) * lv
        kxx = hermite_density(N, x)
        mass += w * rho
        for i in range(edges.size - 1):
            lo, hi = edges[i], edges[i + 1]
            d = 0.5 * (hi - lo) * gs + 0.5 * (hi + lo)
            vals = []
            for dd in (d, -d):
                y = x + math.sqrt(N) * dd / (N * rho)
                kyy = hermite_density(N, y)
                kxy = hermite_kernel(N, np.full_like(y, x), y)
                # two-point density in lambda units over N rho(lambda): unfolded R_2
                vals.append((kxx * kyy - kxy * kxy) * N / (N * rho) ** 2)
            r2 = 0.5 * (vals[0] + vals[1])
            # density of the anchor point is N rho(E') under the semicircle
            out[i] += w * rho * np.sum(0.5 * (hi - lo) * ws * r2) / (hi - lo)
    return out / mass
