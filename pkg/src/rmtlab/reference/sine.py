"""Bulk oracles: sine kernel, gap probability det(1 - K_alpha), Wigner surmise."""
from __future__ import annotations

import math
from itertools import product

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.special import erf

from .curves import OracleError, QuadratureRule, ReferenceCurve, cached_curve


def sine_kernel(x):
    """sin(pi x)/(pi x), equal to 1 at x = 0."""
    return np.sinc(np.asarray(x, dtype=float))[()]


def sine_det(alphas) -> float:
    """det[K(alpha_i - alpha_j)], the rescaled k-point bulk correlation."""
    a = np.atleast_1d(np.asarray(alphas, dtype=float))
    return float(np.linalg.det(sine_kernel(np.subtract.outer(a, a))))


def gap_probability(alpha: float, m: int = 40) -> float:
    """E(alpha) = det(1 - K) for the sine kernel on (0, alpha), Nystrom with m nodes."""
    if alpha <= 0:
        return 1.0
    q = QuadratureRule.gauss_legendre(m, 0.0, alpha)
    sw = np.sqrt(q.weights)
    K = sw[:, None] * sine_kernel(np.subtract.outer(q.nodes, q.nodes)) * sw[None, :]
    mu = np.linalg.eigvalsh(K)
    return float(np.prod(1.0 - mu))


def gap_probability_series(alpha: float, terms: int = 3, m: int = 12) -> float:
    """Truncated Fredholm expansion 1 + sum_{k<=terms} (-1)^k/k! int det K, tensor quadrature."""
    if alpha <= 0:
        return 1.0
    q = QuadratureRule.gauss_legendre(m, 0.0, alpha)
    total = 1.0
    for k in range(1, terms + 1):
        acc = 0.0
        for idx in product(range(m), repeat=k):
            pts = q.nodes[list(idx)]
            acc += np.prod(q.weights[list(idx)]) * sine_det(pts)
        total += (-1) ** k / math.factorial(k) * acc
    return total


def nystrom_order(alpha_max: float, m_min: int = 40) -> int:
    # sine kernel is entire; a few nodes per unit length plus slack reach 1e-14
    return max(m_min, int(math.ceil(8 * alpha_max)) + 20)


def gap_distribution(alpha_max: float = 6.0, step: float = 0.02, m: int | None = None,
                     check_convergence: bool = True) -> dict:
    """Gap law on a uniform grid: E(alpha), density p = E'', CDF = 1 + E'.

    The second derivative comes from an interpolating quintic spline of E.
    Raises when doubling the quadrature order moves E by more than 1e-8.
    """
    if not 0 < alpha_max <= 6.0 + 1e-12:
        raise OracleError("gap grid must lie in (0, 6]")
    m = m or nystrom_order(alpha_max)
    if m < 40:
        raise OracleError("quadrature order must be at least 40")
    n = int(round(alpha_max / step))
    grid = np.linspace(0.0, alpha_max, n + 1)
    E = np.array([gap_probability(a, m) for a in grid])
    if check_convergence:
        coarse = grid[:: max(1, n // 30)]
        E2 = np.array([gap_probability(a, 2 * m) for a in coarse])
        drift = np.max(np.abs(E2 - np.array([gap_probability(a, m) for a in coarse])))
        if drift > 1e-8:
            raise OracleError(f"Nystrom not converged: |E_m - E_2m| = {drift:.2e}")
    spl = make_interp_spline(grid, E, k=5)
    dens = spl.derivative(2)(grid)
    cdf = 1.0 + spl.derivative(1)(grid)
    return {"grid": grid, "E": E, "density": dens, "cdf": cdf, "order": m}


def gap_density_fredholm(alpha_max: float = 6.0, step: float = 0.02, m: int | None = None
                         ) -> tuple[ReferenceCurve, ReferenceCurve]:
    """(density, CDF) curves of the GUE bulk nearest-neighbour gap."""
    grid = np.linspace(0.0, alpha_max, int(round(alpha_max / step)) + 1)
    order = m or nystrom_order(alpha_max)
    box = {}

    def build(which):
        def _b():
            if "g" not in box:
                box["g"] = gap_distribution(alpha_max, step, order)
            g = box["g"]
            vals = np.clip(g[which], 0.0, None) if which == "density" else np.clip(g[which], 0.0, 1.0)
            return ReferenceCurve(g["grid"], vals, f"gap-{which}", {"order": order})
        return _b

    dens = cached_curve("gap-density", grid, order, build("density"))
    cdf = cached_curve("gap-cdf", grid, order, build("cdf"))
    return dens, cdf


def wigner_surmise(s, beta: int):
    s = np.asarray(s, dtype=float)
    if beta == 1:
        return (math.pi * s / 2.0 * np.exp(-math.pi * s * s / 4.0))[()]
    if beta == 2:
        return (32.0 / math.pi**2 * s * s * np.exp(-4.0 * s * s / math.pi))[()]
    raise OracleError(f"unsupported beta {beta}")


def wigner_surmise_cdf(s, beta: int):
    s = np.asarray(s, dtype=float)
    if beta == 1:
        return (-np.expm1(-math.pi * s * s / 4.0))[()]
    if beta == 2:
        return (erf(2.0 * s / math.sqrt(math.pi))
                - 4.0 * s / math.pi * np.exp(-4.0 * s * s / math.pi))[()]
    raise OracleError(f"unsupported beta {beta}")
