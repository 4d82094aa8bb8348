"""Eigendecomposition, Stieltjes transforms, resolvents and semicircle quantities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import integrate

from .ensemble import MatrixSample


class ResolventError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    def __init__(self, seed, msg):
        super().__init__(f"eigensolver failed for seed {seed}: {msg}")
        self.seed = seed


@dataclass(frozen=True, eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    seed: Optional[int] = None

    @property
    def N(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class ResolventSummary:
    m: complex
    Lambda: float
    Lambda_d: float
    Lambda_o: float


def _check_eta(z):
    if np.any(np.imag(z) <= 0):
        raise ResolventError("spectral parameter needs Im z > 0")


def eigendecompose(sample: Union[MatrixSample, np.ndarray], with_vectors: bool = False
                   ) -> SpectralData:
    H = sample.entries if isinstance(sample, MatrixSample) else np.asarray(sample)
    seed = sample.seed if isinstance(sample, MatrixSample) else None
    try:
        if with_vectors:
            w, v = np.linalg.eigh(H)
            return SpectralData(w, v, seed)
        return SpectralData(np.linalg.eigvalsh(H), None, seed)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(seed, str(exc)) from exc


def stieltjes_empirical(spec: Union[SpectralData, np.ndarray], z) -> complex:
    """(1/N) sum_j 1/(lambda_j - z)."""
    _check_eta(z)
    ev = spec.eigenvalues if isinstance(spec, SpectralData) else np.asarray(spec)
    z = np.asarray(z)
    return np.mean(1.0 / (ev[..., None] - z.ravel()), axis=-2).reshape(z.shape)[()]


def stieltjes_semicircle(z):
    """Stieltjes transform of the semicircle law, ``m = -2 / (z + sqrt(z^2 - 4))``.

    The square root is ``sqrt(z - 2) sqrt(z + 2)`` with principal branches, which
    is analytic off [-2, 2] and behaves like ``z`` at infinity; also valid for real
    ``|z| > 2``.
    """
    z = np.asarray(z, dtype=complex)
    s = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    return (-2.0 / (z + s))[()]


def density_semicircle(E):
    E = np.asarray(E, dtype=float)
    return (np.sqrt(np.clip(4.0 - E * E, 0.0, None)) / (2.0 * math.pi))[()]


def density_mp(E, d: float):
    """Marchenko-Pastur density for ratio ``d = N/M`` in (0, 1]."""
    if not 0.0 < d <= 1.0:
        raise ResolventError("aspect ratio d must lie in (0, 1]")
    lo, hi = mp_edges(d)
    E = np.asarray(E, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sqrt(np.clip((hi - E) * (E - lo), 0.0, None)) / (2.0 * math.pi * d * np.abs(E))
    return np.where((E > lo) & (E < hi) & (E != 0), val, 0.0)[()]


def mp_edges(d: float) -> tuple[float, float]:
    r = math.sqrt(d)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


def counting_semicircle(E):
    """n_sc(E) = int_{-inf}^E rho_sc, closed form."""
    E = np.clip(np.asarray(E, dtype=float), -2.0, 2.0)
    val = 0.5 + E * np.sqrt(4.0 - E * E) / (4.0 * math.pi) + np.arcsin(E / 2.0) / math.pi
    return np.clip(val, 0.0, 1.0)[()]


def classical_locations(N: int, tol: float = 1e-12) -> np.ndarray:
    """gamma_j with N n_sc(gamma_j) = j, j = 1..N, by vectorized bisection."""
    if N < 1:
        raise ResolventError("N must be positive")
    target = np.arange(1, N + 1) / N
    lo = np.full(N, -2.0)
    hi = np.full(N, 2.0)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        below = counting_semicircle(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    out[-1] = 2.0
    return out


def resolvent_matrix(sample, z, spectral: Optional[SpectralData] = None) -> np.ndarray:
    """G(z) = (H - z)^{-1}; spectral form when eigenvectors are given."""
    _check_eta(z)
    if spectral is not None and spectral.eigenvectors is not None:
        U = spectral.eigenvectors
        return (U * (1.0 / (spectral.eigenvalues - z))) @ U.conj().T
    H = sample.entries if isinstance(sample, MatrixSample) else np.asarray(sample)
    A = H - z * np.eye(H.shape[0])
    try:
        return np.linalg.solve(A, np.eye(H.shape[0], dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise ResolventError(f"singular resolvent at z={z}") from exc


def summarize_resolvent(G: np.ndarray, z) -> ResolventSummary:
    msc = stieltjes_semicircle(z)
    d = np.diag(G)
    m = complex(np.mean(d))
    off = np.abs(G)
    np.fill_diagonal(off, 0.0)
    return ResolventSummary(m, abs(m - msc), float(np.max(np.abs(d - msc))),
                            float(np.max(off)) if G.shape[0] > 1 else 0.0)


def resolvent_summary(sample, z, spectral: Optional[SpectralData] = None) -> ResolventSummary:
    """m_N, Lambda = |m - m_sc|, Lambda_d = max|G_kk - m_sc|, Lambda_o = max_{k!=l}|G_kl|."""
    return summarize_resolvent(resolvent_matrix(sample, z, spectral), z)


@dataclass
class IdentityReport:
    passed: bool = True
    max_errors: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def record(self, name: str, err: float, tol: float, where=None):
        self.max_errors[name] = max(self.max_errors.get(name, 0.0), float(err))
        if not err <= tol:
            self.passed = False
            self.failures.append((name, where, float(err)))


def _minor(H: np.ndarray, k) -> np.ndarray:
    keep = np.setdiff1d(np.arange(H.shape[0]), np.atleast_1d(k))
    return H[np.ix_(keep, keep)], keep


def default_tolerance(H: np.ndarray) -> float:
    N = H.shape[0]
    if N <= 64:
        return 1e-9
    return N * np.finfo(float).eps * np.linalg.norm(H, 2) * 1e3


def verify_resolvent_identities(sample, z, tol: Optional[float] = None) -> IdentityReport:
    """Check Schur, minor-expansion, Ward and interlacing identities against dense inverses."""
    H = sample.entries if isinstance(sample, MatrixSample) else np.asarray(sample)
    N = H.shape[0]
    if N < 3:
        raise ResolventError("identity checks need N >= 3")
    _check_eta(z)
    tol = default_tolerance(H) if tol is None else tol
    rep = IdentityReport()
    G = np.linalg.inv(H - z * np.eye(N))
    eta = z.imag

    minors = {}
    for k in range(N):
        Hk, keep = _minor(H, k)
        Gk = np.full((N, N), np.nan, dtype=complex)
        Gk[np.ix_(keep, keep)] = np.linalg.inv(Hk - z * np.eye(N - 1))
        minors[k] = Gk

    for i in range(N):
        a = np.delete(H[:, i], i)
        keep = np.delete(np.arange(N), i)
        Gi = minors[i][np.ix_(keep, keep)]
        schur = 1.0 / (H[i, i] - z - a.conj() @ Gi @ a)
        rep.record("one_row", abs(schur - G[i, i]), tol, (i,))
        ward = np.sum(np.abs(G[i]) ** 2) - G[i, i].imag / eta
        rep.record("ward", abs(ward), max(tol, 1e-8), (i,))

    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            Gj = minors[j]
            rep.record("gii", abs(G[i, i] - (Gj[i, i] + G[i, j] * G[j, i] / G[j, j])), tol, (i, j))
            for k in range(N):
                if k in (i, j):
                    continue
                val = minors[k][i, j] + G[i, k] * G[k, j] / G[k, k]
                rep.record("gij", abs(G[i, j] - val), tol, (i, j, k))

    lam = np.linalg.eigvalsh(H)
    for k in range(N):
        mu = np.linalg.eigvalsh(_minor(H, k)[0])
        slack = 1e-12 * max(1.0, np.abs(lam).max())
        viol = max(np.max(lam[:-1] - mu - slack, initial=0.0),
                   np.max(mu - lam[1:] - slack, initial=0.0))
        rep.record("interlacing", max(viol, 0.0), 0.0, (k,))
    return rep


def semicircle_mass(a: float, b: float) -> float:
    return float(counting_semicircle(b) - counting_semicircle(a))


def quad_semicircle(a: float, b: float) -> float:
    """Adaptive quadrature of rho_sc on [a, b]; oracle for the closed form."""
    a, b = max(a, -2.0), min(b, 2.0)
    if b <= a:
        return 0.0
    val, _ = integrate.quad(lambda x: math.sqrt(4.0 - x * x) / (2.0 * math.pi), a, b,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val
