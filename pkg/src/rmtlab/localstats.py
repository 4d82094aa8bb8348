"""Monte Carlo measurements of local laws: semicircle scans, rigidity, delocalization,
level repulsion, overlap variables and large-deviation bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .ensemble import EnsembleSpec, EntryDistribution, MatrixSample, mix_seed, sample_matrix, stream
from .resolvent import (SpectralData, classical_locations, counting_semicircle, density_semicircle,
                        eigendecompose, stieltjes_semicircle)
from .stats import PowerFit, clopper_pearson, fit_loglog

DEFAULT_KAPPA = 0.2
BULK_INDEX_WINDOW = (0.1, 0.9)


class InsufficientSamplesError(RuntimeError):
    pass


def _values(s) -> np.ndarray:
    return s.eigenvalues if isinstance(s, SpectralData) else np.asarray(s, dtype=float)


# -- local semicircle law -------------------------------------------------------

@dataclass(frozen=True)
class LscScanConfig:
    spec: EnsembleSpec
    energies: tuple
    etas: tuple
    n_samples: int = 20
    kappa: float = DEFAULT_KAPPA
    base_seed: int = 0

    def __post_init__(self):
        if min(self.etas) <= 0:
            raise ValueError("eta grid must be positive")
        if not 0 < self.kappa < 2:
            raise ValueError("bulk cutoff kappa must lie in (0, 2)")
        if self.n_samples < 1:
            raise ValueError("sample count must be at least 1")

    @classmethod
    def geometric(cls, spec: EnsembleSpec, energies, lo_exp: float, hi_exp: float, n_eta: int,
                  **kw) -> "LscScanConfig":
        """eta from N^{lo_exp} to N^{hi_exp}, geometric."""
        N = spec.N
        etas = np.geomspace(N**lo_exp, N**hi_exp, n_eta)
        return cls(spec, tuple(float(e) for e in energies), tuple(float(e) for e in etas), **kw)


@dataclass(eq=False)
class LscScanResult:
    energies: np.ndarray
    etas: np.ndarray
    N: int
    n_samples: int
    mean: np.ndarray            # (nE, neta, 3): Lambda, Lambda_d, Lambda_o
    max: np.ndarray
    stderr: np.ndarray
    envelope_lambda: np.ndarray  # 1/(N eta)
    envelope_offdiag: np.ndarray  # sqrt(Im m_sc/(N eta)) + 1/(N eta)
    m: np.ndarray                # (nE, neta) sample mean of m_N(z)
    msc: np.ndarray              # (nE, neta) m_sc(z)
    fit_lambda: Optional[PowerFit] = None
    fit_offdiag: Optional[PowerFit] = None

    def rows(self):
        for i, E in enumerate(self.energies):
            for j, eta in enumerate(self.etas):
                m, msc = self.m[i, j], self.msc[i, j]
                yield dict(E=E, eta=eta, re_m=m.real, im_m=m.imag, re_msc=msc.real, im_msc=msc.imag,
                           lambda_mean=self.mean[i, j, 0], lambda_d_mean=self.mean[i, j, 1],
                           lambda_o_mean=self.mean[i, j, 2], lambda_max=self.max[i, j, 0],
                           lambda_d_max=self.max[i, j, 1], lambda_o_max=self.max[i, j, 2],
                           env_lambda=self.envelope_lambda[i, j], env_offdiag=self.envelope_offdiag[i, j])


def resolvent_errors(spectral: SpectralData, z: complex) -> np.ndarray:
    """(Lambda, Lambda_d, Lambda_o, Re m_N, Im m_N) from an eigendecomposition."""
    lam, U = spectral.eigenvalues, spectral.eigenvectors
    w = 1.0 / (lam - z)
    msc = stieltjes_semicircle(z)
    Gd = (np.abs(U) ** 2) @ w
    G = (U * w) @ U.conj().T
    np.fill_diagonal(G, 0.0)
    m = np.mean(w)
    return np.array([abs(m - msc), np.max(np.abs(Gd - msc)), np.max(np.abs(G)), m.real, m.imag])


def lsc_sample_errors(sd: SpectralData, energies, etas) -> np.ndarray:
    """(nE, neta, 5) array of (Lambda, Lambda_d, Lambda_o, Re m_N, Im m_N) for one sample."""
    if sd.eigenvectors is None:
        raise ValueError("lsc_scan needs eigenvectors")
    return np.array([[resolvent_errors(sd, e + 1j * h) for h in etas] for e in energies])


def lsc_scan(config: LscScanConfig, samples: Optional[Sequence[SpectralData]] = None) -> LscScanResult:
    """Average Lambda, Lambda_d, Lambda_o over samples on the (E, eta) grid and fit eta-exponents."""
    spec = config.spec
    E = np.asarray(config.energies, dtype=float)
    eta = np.asarray(config.etas, dtype=float)
    if samples is None:
        samples = (eigendecompose(sample_matrix(spec, mix_seed(config.base_seed, i)), True)
                   for i in range(config.n_samples))
    return lsc_reduce(config, np.asarray([lsc_sample_errors(sd, E, eta) for sd in samples]))


def lsc_reduce(config: LscScanConfig, vals: np.ndarray) -> LscScanResult:
    """Combine per-sample error arrays (in sample order) into an :class:`LscScanResult`."""
    N = config.spec.N
    E = np.asarray(config.energies, dtype=float)
    eta = np.asarray(config.etas, dtype=float)
    vals = np.asarray(vals)
    S = vals.shape[0]
    mean_all = vals.mean(axis=0)
    m = mean_all[..., 3] + 1j * mean_all[..., 4]
    vals = vals[..., :3]
    mean = mean_all[..., :3]
    err = vals.std(axis=0, ddof=1) / math.sqrt(S) if S > 1 else np.zeros_like(mean)
    Ng, Eg = np.meshgrid(N * eta, E)
    msc = stieltjes_semicircle(Eg + 1j * Ng / N)
    env_l = 1.0 / Ng
    env_o = np.sqrt(msc.imag / Ng) + 1.0 / Ng
    bulk = np.abs(E) <= 2 - config.kappa
    fit_l = fit_o = None
    if bulk.any() and eta.size >= 2:
        x = Ng[bulk].ravel()
        min_pts = min(5, x.size)
        fit_l = fit_loglog(x, mean[bulk, :, 0].ravel(), min_pts)
        fit_o = fit_loglog(x, mean[bulk, :, 2].ravel(), min_pts)
    return LscScanResult(E, eta, N, S, mean, vals.max(axis=0), err, env_l, env_o, m, msc, fit_l, fit_o)


# -- rigidity and counting ------------------------------------------------------

@dataclass(eq=False)
class RigidityResult:
    N: int
    deviations: np.ndarray      # (samples, N) of lambda_j - gamma_j
    envelope: np.ndarray
    Q: float

    @property
    def mean_abs(self) -> np.ndarray:
        return np.abs(self.deviations).mean(axis=0)

    def quantiles(self, qs=(0.5, 0.9, 0.99)) -> np.ndarray:
        return np.quantile(np.abs(self.deviations), qs, axis=0)

    def bulk_indices(self, window=BULK_INDEX_WINDOW) -> np.ndarray:
        j = np.arange(1, self.N + 1)
        return (j >= window[0] * self.N) & (j <= window[1] * self.N)

    def bulk_fraction_within(self, threshold: float, window=BULK_INDEX_WINDOW) -> float:
        d = np.abs(self.deviations[:, self.bulk_indices(window)])
        return float(np.mean(d <= threshold))

    def rows(self):
        q = self.quantiles()
        for j in range(self.N):
            yield dict(j=j + 1, mean_abs=self.mean_abs[j], q50=q[0, j], q90=q[1, j], q99=q[2, j],
                       envelope=self.envelope[j])


def rigidity_envelope(N: int) -> np.ndarray:
    j = np.arange(1, N + 1)
    return np.minimum(j, N - j + 1) ** (-1.0 / 3.0) * N ** (-2.0 / 3.0)


def rigidity(samples) -> RigidityResult:
    """Deviations from classical locations; Q = mean over samples of sum_j (lambda_j - gamma_j)^2."""
    arr = np.asarray([_values(s) for s in samples], dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("rigidity needs at least one full spectrum")
    N = arr.shape[1]
    dev = arr - classical_locations(N)
    Q = float(np.mean(np.sum(dev * dev, axis=1)))
    return RigidityResult(N, dev, rigidity_envelope(N), Q)


def empirical_counting(values, E) -> np.ndarray:
    """n(E) = #{lambda_j <= E} / N."""
    v = np.sort(_values(values))
    return np.searchsorted(v, np.asarray(E, dtype=float), side="right") / v.size


def counting_sup(values, grid=None) -> float:
    """sup |n(E) - n_sc(E)|; on a grid if given, else exactly (both one-sided limits at jumps)."""
    v = np.sort(_values(values))
    N = v.size
    if grid is not None:
        g = np.asarray(grid, dtype=float)
        return float(np.max(np.abs(empirical_counting(v, g) - counting_semicircle(g))))
    nsc = counting_semicircle(v)
    j = np.arange(1, N + 1)
    return float(max(np.max(np.abs(j / N - nsc)), np.max(np.abs((j - 1) / N - nsc))))


def counting_compare(samples, grid=None) -> np.ndarray:
    """N * sup |n - n_sc| per sample (grid default: exact sup over |E| <= 5)."""
    return np.array([_values(s).size * counting_sup(s, grid) for s in samples])


def count_in_interval(values, a: float, b: float) -> int:
    v = np.sort(_values(values))
    return int(np.searchsorted(v, b, side="right") - np.searchsorted(v, a, side="left"))


# -- delocalization -------------------------------------------------------------

@dataclass(eq=False)
class DelocResult:
    N: int
    ps: tuple
    scaled: dict                 # p -> list of arrays (per sample, bulk vectors)
    linf: list

    def max_scaled(self, p) -> float:
        return float(max(np.max(a) for a in self.scaled[p]))

    @property
    def max_linf(self) -> float:
        return float(max(np.max(a) for a in self.linf))


def scaled_norms(v: np.ndarray, p: float) -> np.ndarray:
    """N^{1/2 - 1/p} ||v||_p for the columns of v (p = inf gives sqrt(N) ||v||_inf)."""
    N = v.shape[0]
    a = np.abs(v)
    if math.isinf(p):
        return math.sqrt(N) * a.max(axis=0)
    return N ** (0.5 - 1.0 / p) * np.sum(a**p, axis=0) ** (1.0 / p)


def delocalization(samples, ps=(4,), kappa: float = DEFAULT_KAPPA) -> DelocResult:
    ps = tuple(ps)
    scaled = {p: [] for p in ps}
    linf = []
    N = None
    for sd in samples:
        if sd.eigenvectors is None:
            raise ValueError("delocalization needs eigenvectors")
        N = sd.N
        bulk = np.abs(sd.eigenvalues) <= 2 - kappa
        V = sd.eigenvectors[:, bulk]
        for p in ps:
            s = scaled_norms(V, p)
            if p > 2 and np.any(s < 1 - 1e-10):
                raise AssertionError("l^p lower bound violated")
            scaled[p].append(s)
        linf.append(scaled_norms(V, math.inf))
    return DelocResult(N, ps, scaled, linf)


# -- level repulsion -------------------------------------------------------------

@dataclass(eq=False)
class RepulsionResult:
    E: float
    n: int
    eps: np.ndarray
    trials: int
    counts_ge_n: np.ndarray
    counts_ge_1: np.ndarray
    fit: Optional[PowerFit]
    target_slope: float

    @property
    def prob(self) -> np.ndarray:
        return self.counts_ge_n / self.trials

    @property
    def wegner_ratio(self) -> np.ndarray:
        return self.counts_ge_1 / self.trials / self.eps

    def intervals(self):
        return [clopper_pearson(int(k), self.trials) for k in self.counts_ge_n]


def repulsion_exponent(n: int, beta: int) -> float:
    return float(n * n) if beta == 2 else n * (n + 1) / 2.0


def interval_counts(samples, N: int, E: float, eps, unit: str = "spacing") -> np.ndarray:
    """N_I for I = [E - w/2, E + w/2], w = eps/(N rho_sc(E)) (or eps/N with unit='absolute')."""
    eps = np.asarray(eps, dtype=float)
    scale = N * float(density_semicircle(E)) if unit == "spacing" else float(N)
    half = eps / (2.0 * scale)
    out = np.empty((len(samples), eps.size), dtype=int)
    for i, s in enumerate(samples):
        v = np.sort(_values(s))
        out[i] = np.searchsorted(v, E + half, side="right") - np.searchsorted(v, E - half, side="left")
    return out


def level_repulsion(samples, N: int, E: float, eps, n: int = 2, beta: int = 2,
                    unit: str = "spacing", min_points: int = 5) -> RepulsionResult:
    """Empirical P(N_I >= n) against eps with a log-log exponent fit.

    Only eps with at least one observed event enter the fit; fewer than
    ``min_points`` such values raise InsufficientSamplesError.
    """
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0) or np.any(eps > 1):
        raise ValueError("eps values must lie in (0, 1]")
    counts = interval_counts(samples, N, E, eps, unit)
    ge_n = (counts >= n).sum(axis=0)
    ge_1 = (counts >= 1).sum(axis=0)
    trials = counts.shape[0]
    ok = ge_n > 0
    if ok.sum() < min_points:
        raise InsufficientSamplesError(
            f"only {ok.sum()} eps values with observed N_I >= {n} in {trials} trials")
    fit = fit_loglog(eps[ok], ge_n[ok] / trials, min_points)
    return RepulsionResult(E, n, eps, trials, ge_n, ge_1, fit, repulsion_exponent(n, beta))


# -- overlap variables --------------------------------------------------------------

def overlaps(a: np.ndarray, U: np.ndarray) -> np.ndarray:
    """xi_alpha = N |u_alpha^* a|^2 with N = len(a) + 1."""
    N = a.size + 1
    return N * np.abs(U.conj().T @ a) ** 2


def overlap_stats(samples: Sequence[MatrixSample], k: int = 0) -> dict:
    """xi_alpha for the minor H^(k) of each sample; mean, variance and KS to the Gaussian law."""
    xs = []
    herm = None
    for s in samples:
        H = s.entries
        N = H.shape[0]
        if N < 3:
            raise ValueError("overlap statistics need N >= 3")
        keep = np.delete(np.arange(N), k)
        _, U = np.linalg.eigh(H[np.ix_(keep, keep)])
        xs.append(overlaps(H[keep, k], U))
        herm = np.iscomplexobj(H)
    xi = np.concatenate(xs)
    ref = stats.expon() if herm else stats.chi2(1)
    ks = float(stats.kstest(xi, ref.cdf).statistic)
    return {"xi": xi, "mean": float(xi.mean()), "var": float(xi.var()), "ks": ks,
            "reference": "exp(1)" if herm else "chi2(1)"}


# -- large deviations -----------------------------------------------------------------

@dataclass
class LdpReport:
    N: int
    trials: int
    threshold_linear: float
    threshold_diag: float
    threshold_offdiag: float
    freq_linear: float
    freq_diag: float
    freq_offdiag: float
    max_ratio: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return max(self.freq_linear, self.freq_diag, self.freq_offdiag) <= 1e-2


def ldp_check(dist: Optional[EntryDistribution], N: int, trials: int, seed: int = 0,
              complex_entries: bool = True, alpha: float = 1.0, chunk: int = 256,
              A: Optional[np.ndarray] = None, B_diag: Optional[np.ndarray] = None,
              B_gen: Optional[np.ndarray] = None) -> LdpReport:
    """Exceedance frequencies of the three large-deviation forms.

    Coefficients are frozen per call. The off-diagonal form uses a circulant
    ``B_ij = b_{(j - i) mod N}`` (dense, applied by FFT), so N = 10^4 fits in memory.
    """
    dist = dist or EntryDistribution.gaussian()
    rng = stream(seed, 0xA1)
    if A is None:
        A = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    if B_diag is None:
        B_diag = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    if B_gen is None:
        B_gen = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    L = math.log(N)
    sigma2 = 1.0
    t_lin = L ** (1.5 + alpha) * math.sqrt(sigma2) * np.linalg.norm(A)
    t_diag = L ** (1.5 + 2 * alpha) * sigma2 * np.linalg.norm(B_diag)
    off_norm = math.sqrt(N * (np.sum(np.abs(B_gen) ** 2) - abs(B_gen[0]) ** 2))
    t_off = L ** (3 + 2 * alpha) * sigma2 * off_norm
    corr_hat = np.conj(np.fft.fft(np.conj(B_gen)))
    hits = np.zeros(3, dtype=int)
    worst = np.zeros(3)
    done = 0
    trng = stream(seed, 0xA2)
    while done < trials:
        m = min(chunk, trials - done)
        a = dist.sample(trng, (m, N)).astype(complex)
        if complex_entries:
            a = (a + 1j * dist.sample(trng, (m, N))) / math.sqrt(2.0)
        lin = np.abs(a @ A)
        aa = np.abs(a) ** 2
        dia = np.abs(aa @ B_diag - sigma2 * B_diag.sum())
        # (B a)_i = sum_j b_{(j-i) mod N} a_j, a circular cross-correlation
        Ba = np.fft.ifft(corr_hat[None, :] * np.fft.fft(a, axis=1), axis=1)
        full = np.sum(a.conj() * Ba, axis=1)
        # a diagonal-only B leaves an empty off-diagonal sum
        off = np.abs(full - B_gen[0] * aa.sum(axis=1)) if off_norm > 0 else np.zeros(m)
        for idx, (v, t) in enumerate(((lin, t_lin), (dia, t_diag), (off, t_off))):
            hits[idx] += int(np.sum(v > t))
            if t > 0:
                worst[idx] = max(worst[idx], float(np.max(v / t)))
        done += m
    f = hits / trials
    return LdpReport(N, trials, t_lin, t_diag, t_off, f[0], f[1], f[2],
                     {"linear": worst[0], "diag": worst[1], "offdiag": worst[2]})
