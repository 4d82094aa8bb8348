"""Unfolded gap statistics, k-point correlation estimates and edge statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eigvalsh_tridiagonal
from scipy.sparse.linalg import eigsh

from .ensemble import EnsembleSpec, sample_matrix, tridiagonal_model
from .reference.curves import OracleError, ReferenceCurve
from .resolvent import SpectralData, counting_semicircle, density_semicircle
from .stats import PowerFit, ecdf, fit_loglog, ks_distance

DEFAULT_KAPPA = 0.2
DEFAULT_B = 0.1
DEFAULT_BIN = 0.1


def _values(s) -> np.ndarray:
    v = s.eigenvalues if isinstance(s, SpectralData) else np.asarray(s, dtype=float)
    return np.sort(v)


def default_window(N: int) -> float:
    return N ** -0.2


@dataclass(eq=False)
class GapSample:
    E: float
    t: float
    N: int
    gaps: np.ndarray
    per_sample: list

    @property
    def count(self) -> int:
        return self.gaps.size


def sample_gaps(values: np.ndarray, N: int, E: float, t: float) -> np.ndarray:
    """N rho_sc(E) (lambda_{j+1} - lambda_j) for |lambda_j - E| <= t."""
    v = np.sort(values)
    j = np.nonzero(np.abs(v[:-1] - E) <= t)[0]
    return N * float(density_semicircle(E)) * (v[j + 1] - v[j])


def unfold_gaps(samples, E: float = 0.0, t: Optional[float] = None, N: Optional[int] = None,
                kappa: float = DEFAULT_KAPPA) -> GapSample:
    if abs(E) >= 2 - kappa:
        raise ValueError(f"energy {E} outside the bulk |E| < {2 - kappa}")
    per = []
    for s in samples:
        v = _values(s)
        n = N or v.size
        per.append(sample_gaps(v, n, E, t if t is not None else default_window(n)))
    gaps = np.concatenate(per) if per else np.empty(0)
    if gaps.size == 0:
        raise ValueError("no eigenvalue pairs in the window")
    n = N or _values(samples[0]).size
    return GapSample(E, t if t is not None else default_window(n), n, gaps, per)


@dataclass(eq=False)
class GapCdfResult:
    grid: np.ndarray
    empirical: np.ndarray
    reference: np.ndarray
    ks: float


def gap_cdf(gaps, reference: Callable, grid: Optional[np.ndarray] = None,
            min_gaps: int = 1000) -> GapCdfResult:
    """Empirical CDF of unfolded gaps and its exact KS distance to ``reference``."""
    g = np.asarray(gaps.gaps if isinstance(gaps, GapSample) else gaps, dtype=float)
    if g.size < min_gaps:
        raise ValueError(f"need at least {min_gaps} gaps, got {g.size}")
    if isinstance(reference, ReferenceCurve) and g.max() > reference.grid[-1]:
        raise OracleError("reference grid does not cover the gap data")
    if grid is None:
        grid = np.linspace(0.0, max(4.0, float(g.max())), 401)
    ks = ks_distance(g, reference)
    return GapCdfResult(grid, ecdf(g, grid), np.asarray(reference(grid)), ks)


def small_gap_exponent(gaps, lo: float = 0.05, hi: float = 0.4, n_points: int = 8) -> PowerFit:
    """Exponent a in p(s) ~ s^a, from log F(s) ~ (a+1) log s on a geometric grid of [lo, hi]."""
    g = np.sort(np.asarray(gaps.gaps if isinstance(gaps, GapSample) else gaps, dtype=float))
    s = np.geomspace(lo, hi, n_points)
    F = np.searchsorted(g, s, side="right") / g.size
    fit = fit_loglog(s, F, min(5, n_points))
    return PowerFit(fit.slope - 1.0, fit.intercept, fit.stderr, fit.n_points)


# -- k-point correlations -------------------------------------------------------

@dataclass(eq=False)
class CorrelationEstimate:
    """Rescaled correlation estimate.

    k = 1: density ratio on the alpha grid ``edges``.
    k >= 2: function of the k-1 differences to the first point, each binned by ``edges``.
    """

    k: int
    E: float
    b: float
    edges: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int
    kernel: str = "hard"

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def _k1_counts(v, N, E, b, edges, density):
    """Bin counts of N rho(E')(lambda - E') averaged over E' uniform in [E-b, E+b].

    The E'-average is done exactly: lambda lands in bin [a0, a1) for E' in
    [lambda - a1/(N rho), lambda - a0/(N rho)] (rho frozen at lambda, an O(1/N)
    approximation), so each eigenvalue contributes that interval's overlap with
    the energy window divided by 2b.
    """
    amax = max(abs(edges[0]), abs(edges[-1]))
    rho_min = float(np.min(density(np.array([E - b, E, E + b]))))
    near = v[np.abs(v - E) <= b + amax / (N * rho_min) * 1.5]
    scale = N * np.broadcast_to(np.asarray(density(near), dtype=float), near.shape)
    hi_e = near[:, None] - edges[None, :-1] / scale[:, None]
    lo_e = near[:, None] - edges[None, 1:] / scale[:, None]
    overlap = np.clip(np.minimum(hi_e, E + b) - np.maximum(lo_e, E - b), 0.0, None)
    return overlap.sum(axis=0) / (2.0 * b)


def _anchored_differences(v, N, E, b, reach, density):
    """Rows of unfolded differences d(i, i+off) for anchors in [E-b, E+b], per offset."""
    anchors = np.nonzero(np.abs(v - E) <= b)[0]
    rho = N * np.broadcast_to(np.asarray(density(v[anchors]), dtype=float), anchors.shape)
    out = {}
    off = 1
    while True:
        alive = False
        for sgn in (1, -1):
            j = anchors + sgn * off
            ok = (j >= 0) & (j < v.size)
            d = np.full(anchors.size, np.nan)
            d[ok] = rho[ok] * (v[j[ok]] - v[anchors[ok]])
            if np.any(np.abs(d[ok]) <= reach):
                alive = True
            out[sgn * off] = d
        if not alive:
            break
        off += 1
    return anchors.size, out


def _smooth_hist(points: np.ndarray, centers: np.ndarray, width: float) -> np.ndarray:
    """Sum of Lorentzians eta/(pi((x-c)^2+eta^2)) per center, times the bin width."""
    eta = 0.5 * width
    if points.size == 0:
        return np.zeros(centers.size)
    d = points[:, None] - centers[None, :]
    return np.sum(eta / (math.pi * (d * d + eta * eta)), axis=0) * width


def correlation_estimate(samples, k: int, E: float = 0.0, b: float = DEFAULT_B,
                         edges: Optional[np.ndarray] = None, N: Optional[int] = None,
                         kernel: str = "hard",
                         density: Optional[Callable] = None) -> CorrelationEstimate:
    """Energy-averaged rescaled k-point correlation, normalized by the semicircle.

    For k >= 2 every ordered tuple of distinct eigenvalues whose first point lies in
    [E-b, E+b] is binned by its unfolded differences ``N rho_sc(lambda_1)(lambda_i - lambda_1)``;
    counts are divided by the expected number of anchors ``N (n_sc(E+b) - n_sc(E-b))``
    and the bin volume. k = 2 is symmetrized in the difference.

    ``density`` replaces the semicircle for unfolding and normalization (e.g. for
    surrogate point processes).
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    if edges is None:
        edges = np.arange(-3.0, 3.0 + 1e-9, DEFAULT_BIN)
    edges = np.asarray(edges, dtype=float)
    widths = np.diff(edges)
    if not np.allclose(widths, widths[0]):
        raise ValueError("bin grid must be uniform")
    h = float(widths[0])
    vals0 = [_values(s) for s in samples]
    N = N or vals0[0].size
    if h < 1.0 / (10 * N):
        raise ValueError("bin width below the resolution floor 1/(10N)")
    if b < 10.0 / N:
        raise ValueError("averaging half-width b must be at least 10/N")
    if kernel not in ("hard", "smooth"):
        raise ValueError("kernel must be 'hard' or 'smooth'")
    centers = 0.5 * (edges[1:] + edges[:-1])
    reach = max(abs(edges[0]), abs(edges[-1])) + (5 * h if kernel == "smooth" else 0.0)
    if density is None:
        density = density_semicircle
        mass = N * (counting_semicircle(E + b) - counting_semicircle(E - b))
    else:
        mass = N * quad(lambda x: float(np.asarray(density(x))), E - b, E + b)[0]

    def hist1(x):
        if kernel == "smooth":
            return _smooth_hist(x, centers, h)
        return np.histogram(x, bins=edges)[0].astype(float)

    per = []
    for v in vals0:
        if k == 1:
            per.append(_k1_counts(v, N, E, b, edges, density) / h)
            continue
        _, diffs = _anchored_differences(v, N, E, b, reach, density)
        if k == 2:
            d = np.concatenate([x[np.isfinite(x)] for x in diffs.values()]) if diffs else np.empty(0)
            d = d[np.abs(d) <= reach]
            c = 0.5 * (hist1(d) + hist1(-d))
            per.append(c / (mass * h))
        else:
            acc = np.zeros((centers.size, centers.size))
            offs = list(diffs)
            for o1, o2 in product(offs, offs):
                if o1 == o2:
                    continue
                d1, d2 = diffs[o1], diffs[o2]
                ok = np.isfinite(d1) & np.isfinite(d2) & (np.abs(d1) <= reach) & (np.abs(d2) <= reach)
                if not ok.any():
                    continue
                if kernel == "smooth":
                    acc += np.einsum("ni,nj->ij", _smooth_hist_rows(d1[ok], centers, h),
                                     _smooth_hist_rows(d2[ok], centers, h))
                else:
                    acc += np.histogram2d(d1[ok], d2[ok], bins=[edges, edges])[0]
            per.append(acc / (mass * h * h))
    per = np.asarray(per)
    S = per.shape[0]
    mean = per.mean(axis=0)
    err = per.std(axis=0, ddof=1) / math.sqrt(S) if S > 1 else np.zeros_like(mean)
    return CorrelationEstimate(k, E, b, edges, mean, err, S, kernel)


def _smooth_hist_rows(points, centers, width):
    eta = 0.5 * width
    d = points[:, None] - centers[None, :]
    return eta / (math.pi * (d * d + eta * eta)) * width


# -- edge -----------------------------------------------------------------------

@dataclass(eq=False)
class EdgeSample:
    N: int
    upper: np.ndarray   # N^{2/3}(lambda_N - 2)
    lower: np.ndarray   # N^{2/3}(-lambda_1 - 2)
    ks_upper: Optional[float] = None
    ks_lower: Optional[float] = None


def extreme_eigenvalues(spec: EnsembleSpec, seed: int) -> tuple[float, float]:
    """(lambda_1, lambda_N) of one sample without a full diagonalization."""
    N = spec.N
    if spec.is_invariant_gaussian:
        d, e = tridiagonal_model(spec, seed)
        lo = eigvalsh_tridiagonal(d, e, select="i", select_range=(0, 0))[0]
        hi = eigvalsh_tridiagonal(d, e, select="i", select_range=(N - 1, N - 1))[0]
        return float(lo), float(hi)
    H = sample_matrix(spec, seed).entries
    if N < 64:
        ev = np.linalg.eigvalsh(H)
        return float(ev[0]), float(ev[-1])
    v0 = np.ones(N, dtype=H.dtype) / math.sqrt(N)
    hi = eigsh(H, k=1, which="LA", tol=1e-10, v0=v0, return_eigenvectors=False)[0]
    lo = eigsh(H, k=1, which="SA", tol=1e-10, v0=v0, return_eigenvectors=False)[0]
    return float(lo), float(hi)


def edge_scaled(values, N: Optional[int] = None) -> tuple[float, float]:
    v = _values(values)
    n = N or v.size
    return n ** (2.0 / 3.0) * (v[-1] - 2.0), n ** (2.0 / 3.0) * (-v[0] - 2.0)


def edge_statistics(samples, reference: Optional[Callable] = None, N: Optional[int] = None,
                    min_samples: int = 500) -> EdgeSample:
    """Scaled extreme eigenvalues at the exact edge 2 and their KS distance to ``reference``.

    ``samples`` may hold full spectra or ``(lambda_1, lambda_N)`` pairs (then ``N`` is required).
    """
    if len(samples) < min_samples:
        raise ValueError(f"edge statistics need at least {min_samples} samples")
    pairs = np.array([edge_scaled(s, N) for s in samples])
    n = N or _values(samples[0]).size
    es = EdgeSample(n, pairs[:, 0], pairs[:, 1])
    if reference is not None:
        es.ks_upper = ks_distance(es.upper, reference)
        es.ks_lower = ks_distance(es.lower, reference)
    return es
