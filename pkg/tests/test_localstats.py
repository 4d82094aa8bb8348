import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rmtlab.ensemble import EnsembleSpec, EntryDistribution, MatrixSample, mix_seed, sample_matrix, sample_spectrum
from rmtlab.localstats import (InsufficientSamplesError, LscScanConfig, count_in_interval, counting_compare,
                               counting_sup, delocalization, empirical_counting, interval_counts,
                               ldp_check, level_repulsion, lsc_scan, overlap_stats, overlaps, repulsion_exponent,
                               rigidity, scaled_norms)
from rmtlab.resolvent import SpectralData, classical_locations, eigendecompose


# -- local semicircle law ---------------------------------------------------------------

def test_lsc_config_validation():
    spec = EnsembleSpec.gue(10)
    with pytest.raises(ValueError):
        LscScanConfig(spec, (0.0,), (0.1, 0.0))
    with pytest.raises(ValueError):
        LscScanConfig(spec, (0.0,), (0.1,), kappa=2.5)


def test_lsc_scan_slopes_small():
    spec = EnsembleSpec.gue(300)
    cfg = LscScanConfig.geometric(spec, [0.0], -0.9, -0.3, 7, n_samples=8)
    res = lsc_scan(cfg)
    assert res.mean.shape == (1, 7, 3)
    assert -1.25 <= res.fit_lambda.slope <= -0.75
    assert -0.7 <= res.fit_offdiag.slope <= -0.3
    # Lambda <= Lambda_d
    assert np.all(res.mean[..., 0] <= res.mean[..., 1] + 1e-15)
    # nonincreasing in eta within two standard errors
    m, se = res.mean[0, :, 0], res.stderr[0, :, 0]
    assert np.all(np.diff(m) <= 2 * (se[1:] + se[:-1]))
    assert len(list(res.rows())) == 7


def test_lsc_large_eta_trivial():
    spec = EnsembleSpec.gue(200)
    cfg = LscScanConfig(spec, tuple(np.linspace(-1.5, 1.5, 5)), (10.0,), n_samples=3)
    assert np.all(lsc_scan(cfg).mean[..., 0] <= 0.05)


# -- rigidity ------------------------------------------------------------------------------------

def test_rigidity_classical_input():
    g = classical_locations(100)
    r = rigidity([g, g])
    assert r.Q == 0 and np.all(r.deviations == 0)
    assert r.bulk_fraction_within(0.0) == 1.0


def test_rigidity_gue():
    N = 1000
    r = rigidity([sample_spectrum(EnsembleSpec.gue(N), mix_seed(0, i)) for i in range(10)])
    assert r.bulk_fraction_within(5 * math.log(N) / N) >= 0.99
    assert N * r.Q <= math.log(N) ** 3
    assert len(list(r.rows())) == N


def test_counting_classical_and_gue():
    N = 200
    g = classical_locations(N)
    assert counting_sup(g) <= 1.0 / N + 1e-12
    N = 1000
    vals = [sample_spectrum(EnsembleSpec.gue(N), s) for s in range(10)]
    assert np.median(counting_compare(vals)) <= math.log(N) ** 2


def test_counting_helpers():
    v = np.array([-1.0, 0.0, 0.5, 2.0])
    np.testing.assert_allclose(empirical_counting(v, [-2, 0, 3]), [0, 0.5, 1])
    assert count_in_interval(v, -0.1, 0.5) == 2


# -- delocalization ------------------------------------------------------------------------

def test_scaled_norm_references():
    N = 50
    e1 = np.zeros((N, 1))
    e1[0] = 1
    assert scaled_norms(e1, math.inf)[0] == pytest.approx(math.sqrt(N))
    flat = np.full((N, 1), N**-0.5)
    for p in (2, 3, 4, 10, math.inf):
        assert scaled_norms(flat, p)[0] == pytest.approx(1.0)


@given(st.integers(3, 30), st.integers(0, 1000))
def test_scaled_norm_lower_bound(N, seed):
    v = np.random.default_rng(seed).standard_normal((N, 3))
    v /= np.linalg.norm(v, axis=0)
    assert np.all(scaled_norms(v, 4) >= 1 - 1e-12)


def test_delocalization_goe():
    N = 1000
    sds = [eigendecompose(sample_matrix(EnsembleSpec.goe(N), s), True) for s in range(3)]
    res = delocalization(sds, ps=(4,))
    assert res.max_linf <= 6
    assert res.max_scaled(4) <= 2
    with pytest.raises(ValueError):
        delocalization([SpectralData(np.zeros(3))])


# -- level repulsion --------------------------------------------------------------------

def test_repulsion_exponents():
    assert repulsion_exponent(2, 2) == 4
    assert repulsion_exponent(2, 1) == 3
    assert repulsion_exponent(1, 2) == 1


def test_interval_counts_saturate():
    N = 100
    vals = [sample_spectrum(EnsembleSpec.gue(N), s) for s in range(5)]
    c = interval_counts(vals, N, 0.0, [6.0 * N], unit="absolute")
    assert np.all(c[:, 0] == N)


def test_repulsion_gue_slope():
    N, E = 200, 0.0
    spec = EnsembleSpec.gue(N)
    vals = [sample_spectrum(spec, mix_seed(5, i), window=(-0.03, 0.03)) for i in range(20000)]
    res = level_repulsion(vals, N, E, np.geomspace(0.2, 1.0, 9), n=1)
    # one-level events are Wegner-type: P(N_I >= 1) ~ eps
    assert 0.8 <= res.fit.slope <= 1.2
    assert np.all(res.wegner_ratio <= 2)
    res2 = level_repulsion(vals, N, E, np.geomspace(0.4, 1.0, 9), n=2, min_points=5)
    assert res2.fit.slope > 2.5
    lo, hi = res2.intervals()[-1]
    assert lo <= res2.prob[-1] <= hi


def test_repulsion_reports_insufficient():
    vals = [np.array([-1.0, 1.0])] * 5
    with pytest.raises(InsufficientSamplesError):
        level_repulsion(vals, 2, 0.0, [0.1, 0.2, 0.3, 0.4, 0.5])
    with pytest.raises(ValueError):
        level_repulsion(vals, 2, 0.0, [0.0, 2.0])


# -- overlaps ---------------------------------------------------------------------------------

def test_overlap_parseval():
    N = 6
    a = np.zeros(N - 1)
    a[0] = 1
    U = np.linalg.qr(np.random.default_rng(1).standard_normal((N - 1, N - 1)))[0]
    assert overlaps(a, U).sum() == pytest.approx(N)


def test_overlap_gaussian_law():
    samples = [sample_matrix(EnsembleSpec.gue(100), s) for s in range(20)]
    st_ = overlap_stats(samples)
    assert st_["reference"] == "exp(1)"
    assert st_["ks"] <= 0.05
    assert abs(st_["mean"] - 1) < 0.1
    with pytest.raises(ValueError):
        overlap_stats([MatrixSample(np.eye(2), 0)])


# -- large deviations -------------------------------------------------------------------------

def test_ldp_single_term_and_diag_only():
    N = 64
    A = np.zeros(N, complex)
    A[0] = 1
    B = np.zeros(N, complex)
    B[0] = 1.0   # circulant with only the diagonal: off-diagonal form vanishes
    rep = ldp_check(None, N, 500, seed=1, A=A, B_gen=B)
    assert rep.freq_linear == 0
    assert rep.freq_offdiag == 0 and rep.max_ratio["offdiag"] == 0


def test_ldp_gaussian_flat():
    rep = ldp_check(EntryDistribution.gaussian(), 1000, 1000, seed=2)
    assert rep.passed
