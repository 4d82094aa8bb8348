"""Acceptance suite: twelve end-to-end checks of the Monte Carlo against the oracles.

Each ``criterion_k`` returns a :class:`CriterionResult`; :func:`run_all` prints one
PASS/FAIL line per criterion. Budgets are wall-clock targets for an 8-core machine
and are reported, not enforced.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from .dbm import DbmConfig, matrix_ou_flow, relaxation_scan, simulate
from .ensemble import (EnsembleSpec, EntryDistribution, match_four_moments, mix_seed,
                       sample_matrix, sample_spectrum, standardized_three_point)
from .localstats import LscScanConfig, delocalization, level_repulsion, lsc_scan, rigidity
from .reference import (airy_kernel, catalan_moment, gap_density_fredholm, hermite_density,
                        hermite_kernel, pair_correlation, scaled_kernel, sine_kernel,
                        tracy_widom_cdf, tracy_widom_curve, tracy_widom_painleve,
                        wigner_surmise_cdf)
from .resolvent import eigendecompose, stieltjes_semicircle, verify_resolvent_identities
from .runner import gfc_compare
from .spacing import (correlation_estimate, extreme_eigenvalues, gap_cdf, small_gap_exponent,
                      unfold_gaps)
from .stats import ks_distance, ks_two_sample


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_short(v)}" for k, v in self.metrics.items())
        return (f"[{status}] {self.number:2d}. {self.title} ({self.seconds:.0f}s, "
                f"budget {self.budget:.0f}s): {parts}")


def _short(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _workers() -> int:
    env = os.environ.get("RMTLAB_WORKERS")
    return max(1, int(env)) if env else max(1, os.cpu_count() or 1)


def _map(fn: Callable, items) -> list:
    """Order-preserving map, over processes when more than one core is available."""
    items = list(items)
    w = _workers()
    if w == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * w))))


def _spectra(spec: EnsembleSpec, base: int, n: int, window=None) -> list:
    return _map(partial(_spectrum, spec, window), [mix_seed(base, i) for i in range(n)])


def _spectrum(spec, window, seed):
    return sample_spectrum(spec, seed, window)


def _eig_vectors(spec, seed):
    return eigendecompose(sample_matrix(spec, seed), True)


def _extremes(spec, seed):
    return extreme_eigenvalues(spec, seed)


def _timed(number: int, title: str, budget: float):
    def deco(fn):
        def run(*a, **kw) -> CriterionResult:
            t0 = time.perf_counter()
            passed, metrics = fn(*a, **kw)
            return CriterionResult(number, title, bool(passed), metrics, time.perf_counter() - t0, budget)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return deco


def bernoulli_hermitian(N: int) -> EnsembleSpec:
    return EnsembleSpec.wigner(N, "hermitian", EntryDistribution.bernoulli())


def bin_averaged_sine_r2(edges: np.ndarray, n_sub: int = 16) -> np.ndarray:
    """Mean of 1 - sinc^2 over each bin (Gauss-Legendre)."""
    g, w = np.polynomial.legendre.leggauss(n_sub)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (hi - lo) * g + 0.5 * (hi + lo)
    return np.sum(0.5 * w * (1.0 - sine_kernel(x) ** 2), axis=1)


# -- 1 ------------------------------------------------------------------------------

@_timed(1, "local semicircle law scaling", 180)
def criterion_1(N: int = 1000, samples: int = 20, n_eta: int = 7, seed: int = 101):
    cfg = LscScanConfig.geometric(EnsembleSpec.gue(N), (-1.0, 0.0, 1.0), -0.9, -0.3, n_eta,
                                  n_samples=samples, base_seed=seed)
    sd = _map(partial(_eig_vectors, cfg.spec), [mix_seed(seed, i) for i in range(samples)])
    r = lsc_scan(cfg, sd)
    a, o = r.fit_lambda.slope, r.fit_offdiag.slope
    return (-1.2 <= a <= -0.8) and (-0.65 <= o <= -0.35), {"slope_lambda": a, "slope_lambda_o": o}


# -- 2 ------------------------------------------------------------------------------

@_timed(2, "rigidity", 180)
def criterion_2(N: int = 2000, samples: int = 20, seed: int = 202):
    r = rigidity(_spectra(EnsembleSpec.gue(N), seed, samples))
    frac = r.bulk_fraction_within(5 * math.log(N) / N)
    nq, bound = N * r.Q, math.log(N) ** 3
    return frac >= 0.99 and nq <= bound, {"bulk_fraction": frac, "NQ": nq, "log3N": bound}


# -- 3 ------------------------------------------------------------------------------

@_timed(3, "delocalization", 120)
def criterion_3(N: int = 1000, samples: int = 10, seed: int = 303):
    out, ok = {}, True
    specs = {"goe": EnsembleSpec.goe(N),
             "bernoulli": EnsembleSpec.wigner(N, "symmetric", EntryDistribution.bernoulli())}
    for name, spec in specs.items():
        sd = _map(partial(_eig_vectors, spec), [mix_seed(seed, i) for i in range(samples)])
        d = delocalization(sd, ps=(4,))
        linf, l4 = d.max_linf, d.max_scaled(4)
        out[f"{name}_linf"], out[f"{name}_l4"] = linf, l4
        ok &= linf <= 6 and l4 <= 3
    return ok, out


# -- 4 ------------------------------------------------------------------------------

@_timed(4, "gap law vs Fredholm determinant", 180)
def criterion_4(N: int = 1000, samples: int = 50, seed: int = 404):
    g = unfold_gaps(_spectra(EnsembleSpec.gue(N), seed, samples), 0.0)
    _, cdf = gap_density_fredholm()
    ks_f = gap_cdf(g, cdf).ks
    ks_s = gap_cdf(g, lambda s: wigner_surmise_cdf(s, 2)).ks
    return ks_f <= 0.02 and ks_s <= 0.05, {"ks_fredholm": ks_f, "ks_surmise": ks_s,
                                            "mean_gap": float(g.gaps.mean()), "gaps": g.count}


# -- 5 ------------------------------------------------------------------------------

@_timed(5, "bulk universality (Bernoulli vs GUE)", 300)
def criterion_5(N: int = 1000, samples: int = 50, seed: int = 505, b: float = 1.5, h: float = 0.2):
    gue = _spectra(EnsembleSpec.gue(N), seed, samples)
    ber = _spectra(bernoulli_hermitian(N), seed + 1, samples)
    gg, gb = unfold_gaps(gue, 0.0), unfold_gaps(ber, 0.0)
    _, cdf = gap_density_fredholm()
    ks2 = ks_two_sample(gg.gaps, gb.gaps)
    ksb = ks_distance(gb.gaps, cdf)
    edges = np.round(np.arange(0.0, 3.0 + h / 2, h), 12)
    cg = correlation_estimate(gue, 2, 0.0, b, edges, N)
    cb = correlation_estimate(ber, 2, 0.0, b, edges, N)
    m = (cg.centers >= 0.1) & (cg.centers <= 3.0)
    ref = bin_averaged_sine_r2(edges)
    d_ens = float(np.max(np.abs(cg.values - cb.values)[m]))
    d_sine = float(max(np.max(np.abs(cg.values - ref)[m]), np.max(np.abs(cb.values - ref)[m])))
    ok = ks2 <= 0.02 and ksb <= 0.02 and d_ens <= 0.05 and d_sine <= 0.05
    return ok, {"ks_two_sample": ks2, "ks_bernoulli_fredholm": ksb, "k2_gue_vs_bernoulli": d_ens,
                "k2_vs_sine": d_sine}


# -- 6 ------------------------------------------------------------------------------

@_timed(6, "level repulsion exponents", 480)
def criterion_6(N_gap: int = 500, gap_samples: int = 200, N_int: int = 400,
                int_samples: int = 50000, seed: int = 606):
    out, ok = {}, True
    specs = {"gue": EnsembleSpec.gue, "goe": partial(EnsembleSpec.goe, invariant=True)}
    for k, (name, make) in enumerate(specs.items()):
        spec = make(N_gap)
        fit = small_gap_exponent(unfold_gaps(_spectra(spec, seed + k, gap_samples), 0.0))
        out[f"{name}_gap_exponent"] = fit.slope
        ok &= abs(fit.slope - spec.beta) <= 0.3
    eps = np.geomspace(0.2, 1.0, 9)
    lims = {"gue": (3.2, 4.8), "goe": (2.4, 3.6)}
    for k, (name, make) in enumerate(specs.items()):
        spec = make(N_int)
        win = (-2.0 / N_int, 2.0 / N_int)
        r = level_repulsion(_spectra(spec, seed + 10 + k, int_samples, win), N_int, 0.0, eps, 2, spec.beta)
        out[f"{name}_interval_exponent"] = r.fit.slope
        ok &= lims[name][0] <= r.fit.slope <= lims[name][1]
    return ok, out


# -- 7 ------------------------------------------------------------------------------

@_timed(7, "finite-N Hermite kernel oracle", 60)
def criterion_7(N: int = 200, samples: int = 2000, seed: int = 707, b: float = 0.5, h: float = 0.2):
    a = np.linspace(-3.0, 3.0, 61)
    A1, A2 = np.meshgrid(a, a)
    sup = float(np.max(np.abs(scaled_kernel(N, 0.0, A1, A2) - sine_kernel(A1 - A2))))
    edges = np.round(np.arange(0.0, 3.0 + h / 2, h), 12)
    est = correlation_estimate(_spectra(EnsembleSpec.gue(N), seed, samples), 2, 0.0, b, edges, N)
    pred = pair_correlation(N, 0.0, b, edges)
    m = est.centers >= 0.1
    dev = float(np.max(np.abs(est.values - pred)[m]))
    return sup <= 0.02 and dev <= 0.05, {"kernel_sup": sup, "k2_vs_detK": dev}


# -- 8 ------------------------------------------------------------------------------

@_timed(8, "edge universality (Tracy-Widom)", 360)
def criterion_8(N: int = 1000, samples: int = 2000, seed: int = 808):
    curve = tracy_widom_curve()
    s = np.linspace(-6.0, 4.0, 101)
    route = float(np.max(np.abs(np.asarray(tracy_widom_cdf(s)) - np.asarray(tracy_widom_painleve(s)))))
    out = {"fredholm_vs_painleve": route}
    ok = route <= 1e-6
    for name, spec, tol in (("gue", EnsembleSpec.gue(N), 0.05),
                            ("bernoulli", bernoulli_hermitian(N), 0.06)):
        ext = np.asarray(_map(partial(_extremes, spec), [mix_seed(seed, i) for i in range(samples)]))
        up = N ** (2.0 / 3.0) * (ext[:, 1] - 2.0)
        ks = ks_distance(np.clip(up, -8.0, 6.0), curve)
        out[f"ks_{name}"] = ks
        ok &= ks <= tol
    return ok, out


# -- 9 ------------------------------------------------------------------------------

@_timed(9, "moment method (Catalan numbers)", 60)
def criterion_9(N: int = 500, samples: int = 200, seed: int = 909, kmax: int = 5):
    sp = np.asarray(_spectra(EnsembleSpec.gue(N), seed, samples))
    rel, odd = [], []
    for k in range(1, kmax + 1):
        even = np.mean(sp ** (2 * k), axis=1)
        rel.append(abs(even.mean() - catalan_moment(k)) / catalan_moment(k))
        o = np.mean(sp ** (2 * k + 1), axis=1)
        odd.append(abs(o.mean()) / (o.std(ddof=1) / math.sqrt(samples)))
    return max(rel) <= 0.05 and max(odd) <= 3.0, {"max_rel_err_even": max(rel), "max_odd_in_se": max(odd)}


# -- 10 -----------------------------------------------------------------------------

@_timed(10, "DBM consistency and fast relaxation", 480)
def criterion_10(N_sde: int = 200, runs: int = 200, t: float = 0.5, dt: float = 1e-4,
                 N_relax: int = 500, relax_samples: int = 100, seed: int = 1010):
    H0 = sample_matrix(bernoulli_hermitian(N_sde), seed)
    x0 = np.linalg.eigvalsh(H0.entries)
    tr = simulate(DbmConfig(beta=2, N=N_sde, dt=dt, t_end=t, seed=seed), np.tile(x0, (runs, 1)))
    ou = _map(partial(_ou_spectrum, H0, t), [mix_seed(seed + 1, i) for i in range(runs)])
    ks = ks_two_sample(unfold_gaps(list(tr.final()), 0.0, N=N_sde).gaps,
                       unfold_gaps(ou, 0.0, N=N_sde).gaps)
    times = [0.0, N_relax ** -1.0, N_relax ** -0.75, N_relax ** -0.5, N_relax ** -0.25, 1.0]
    scan = relaxation_scan(bernoulli_hermitian(N_relax), times, "gap-ks", relax_samples, seed + 2)
    at = float(scan.distance[times.index(N_relax ** -0.5)])
    mono = scan.nonincreasing(2.0)
    ok = ks <= 0.03 and at <= scan.noise_floor + 0.03 and mono
    return ok, {"ks_sde_vs_ou": ks, "dist_at_N^-1/2": at, "noise_floor": scan.noise_floor,
                "nonincreasing": mono}


def _ou_spectrum(H0, t, seed):
    return np.linalg.eigvalsh(matrix_ou_flow(H0, t, seed).entries)


# -- 11 -----------------------------------------------------------------------------

@_timed(11, "Green function comparison", 240)
def criterion_11(N: int = 500, samples: int = 400, seed: int = 1111):
    gue = EnsembleSpec.gue(N)
    matched = EnsembleSpec.wigner(N, "hermitian", match_four_moments(0.0, 3.0, 0.0))
    rep = gfc_compare(gue, matched, samples, seed)
    z = np.abs(rep.diff) / rep.stderr
    return rep.passed, {"max_diff_in_se": float(z.max()), "dm4": rep.moments["dm4"],
                        "support": [round(x, 6) + 0.0 for x in matched.dist.base.support]}


# -- 12 -----------------------------------------------------------------------------

@_timed(12, "exact identities", 60)
def criterion_12(seed: int = 1212):
    out, ok = {}, True
    # resolvent identities, Ward, interlacing on small matrices of both symmetry classes
    worst = 0.0
    for k, spec in enumerate((EnsembleSpec.gue(12),
                              EnsembleSpec.wigner(12, "symmetric", EntryDistribution.bernoulli()))):
        for z in (0.3 + 0.05j, -1.1 + 0.5j):
            rep = verify_resolvent_identities(sample_matrix(spec, mix_seed(seed, k)), z)
            ok &= rep.passed
            worst = max(worst, max(rep.max_errors.values()))
    out["resolvent_max_err"] = worst
    # self-consistent equation for m_sc
    E, eta = np.meshgrid(np.linspace(-3, 3, 61), np.geomspace(1e-6, 10, 31))
    zz = E + 1j * eta
    m = stieltjes_semicircle(zz)
    res = float(np.max(np.abs(m + 1.0 / (zz + m))))
    out["selfcons_residual"] = res
    ok &= res <= 1e-12 and bool(np.all(m.imag > 0))
    # moment matching exactness
    mm = 0.0
    for m3, m4 in ((0.0, 3.0), (0.5, 2.0), (-1.0, 4.5), (0.0, 1.0)):
        xi = standardized_three_point(m3, m4)
        mom = np.concatenate([[np.sum(xi.probs)], xi.moments(4)])
        mm = max(mm, float(np.max(np.abs(mom - [1.0, 0.0, 1.0, m3, m4]))))
    out["moment_match_err"] = mm
    ok &= mm <= 1e-12
    # projector properties of the kernels
    Nk = 20
    g, w = np.polynomial.hermite_e.hermegauss(Nk + 5)
    w = w * np.exp(g * g / 2)          # plain weights for integrands carrying e^{-x^2/2}
    x = np.array([-1.3, 0.2, 2.5])
    K = hermite_kernel(Nk, x[:, None], g[None, :])
    repro = float(np.max(np.abs((K * w) @ K.T - hermite_kernel(Nk, x[:, None], x[None, :]))))
    trace = abs(float(np.sum(w * hermite_density(Nk, g))) - Nk)
    out["hermite_reproducing"], out["hermite_trace"] = repro, trace
    ok &= repro <= 1e-8 and trace <= 1e-8
    grid = np.linspace(0.0, 4.0, 20)
    psd = {
        "sine": sine_kernel(grid[:, None] - grid[None, :]),
        "hermite": hermite_kernel(50, grid[:, None], grid[None, :]),
        "airy": airy_kernel(grid[:, None], grid[None, :]),
    }
    for name, M in psd.items():
        ev = np.linalg.eigvalsh(0.5 * (M + M.T))
        sym = float(np.max(np.abs(M - M.T)))
        out[f"{name}_min_eig"] = float(ev.min())
        ok &= ev.min() >= -1e-10 and sym == 0.0
    return ok, out


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run_all(only: Optional[list] = None, echo: bool = True) -> list:
    results = []
    for i in (only or sorted(CRITERIA)):
        r = CRITERIA[i]()
        if echo:
            print(r.line(), flush=True)
        results.append(r)
    if echo:
        n = sum(r.passed for r in results)
        print(f"{n}/{len(results)} criteria passed", flush=True)
    return results
