
import numpy as np
import pytest
from hypothesis import given, strategies as st

from rmtlab.ensemble import EnsembleSpec, EntryDistribution, mix_seed, sample_spectrum, stream
from rmtlab.reference import OracleError, ReferenceCurve, gap_density_fredholm, sine_kernel, tracy_widom_cdf
from rmtlab.reference import wigner_surmise_cdf
from rmtlab.resolvent import classical_locations
from rmtlab.spacing import (correlation_estimate, edge_scaled, edge_statistics, extreme_eigenvalues, gap_cdf,
                            sample_gaps, small_gap_exponent, unfold_gaps)
from rmtlab.stats import ks_two_sample


@pytest.fixture(scope="module")
def fredholm_cdf():
    return gap_density_fredholm(alpha_max=6.0)[1]


@pytest.fixture(scope="module")
def gue_bulk():
    N = 1000
    spec = EnsembleSpec.gue(N)
    return N, [sample_spectrum(spec, mix_seed(3, i), window=(-0.8, 0.8)) for i in range(200)]


# -- unfolding -----------------------------------------------------------------------

def test_classical_locations_unfold_to_one():
    N = 1000
    g = unfold_gaps([classical_locations(N)], E=0.0, t=0.05)
    np.testing.assert_allclose(g.gaps, 1.0, atol=5.0 / N)


def test_mean_gap_gue(gue_bulk):
    N, vals = gue_bulk
    g = unfold_gaps(vals[:50], E=0.0, N=N)
    assert 0.97 <= g.gaps.mean() <= 1.03
    assert np.all(g.gaps > 0)


def test_empty_window_and_edge_energy():
    with pytest.raises(ValueError, match="window"):
        unfold_gaps([np.array([-1.0, 1.0])], E=0.0, t=0.1)
    with pytest.raises(ValueError, match="bulk"):
        unfold_gaps([np.array([-1.0, 1.0])], E=1.9)


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=50, unique=True))
def test_gaps_nonnegative(v):
    g = sample_gaps(np.array(v), 10, 0.0, 5.0)
    assert g.size == len(v) - 1 and np.all(g >= 0)


# -- gap distribution ---------------------------------------------------------------------

def test_degenerate_cdf_is_step():
    ref = lambda s: np.clip(np.asarray(s) - 0.5, 0, 1)
    res = gap_cdf(np.ones(2000), ref, grid=np.array([0.5, 0.99, 1.0, 1.5]))
    np.testing.assert_array_equal(res.empirical, [0, 0, 1, 1])


def test_gap_cdf_rejects_short_reference():
    curve = ReferenceCurve(np.linspace(0, 2, 5), np.linspace(0, 1, 5), "short")
    with pytest.raises(OracleError):
        gap_cdf(np.full(1000, 3.0), curve)
    with pytest.raises(ValueError):
        gap_cdf(np.ones(10), curve)


def test_gue_gaps_vs_oracles(gue_bulk, fredholm_cdf):
    N, vals = gue_bulk
    g = unfold_gaps(vals, E=0.0, N=N)
    assert g.count > 20000
    assert gap_cdf(g, fredholm_cdf).ks <= 0.02
    assert gap_cdf(g, lambda s: wigner_surmise_cdf(s, 2)).ks <= 0.05


def test_small_gap_exponent(gue_bulk):
    N, vals = gue_bulk
    fit = small_gap_exponent(unfold_gaps(vals, E=0.0, N=N))
    assert abs(fit.slope - 2) <= 0.3


def test_small_gap_exponent_goe():
    N = 500
    spec = EnsembleSpec.goe(N, invariant=True)
    vals = [sample_spectrum(spec, mix_seed(4, i), window=(-0.6, 0.6)) for i in range(200)]
    fit = small_gap_exponent(unfold_gaps(vals, E=0.0, N=N))
    assert abs(fit.slope - 1) <= 0.3


def test_bernoulli_gue_gap_universality():
    N = 500
    g = EnsembleSpec.gue(N)
    bern = EnsembleSpec.wigner(N, "hermitian", EntryDistribution.bernoulli())
    a = unfold_gaps([sample_spectrum(g, mix_seed(6, i)) for i in range(40)], E=0.0, N=N)
    b = unfold_gaps([sample_spectrum(bern, mix_seed(7, i)) for i in range(40)], E=0.0, N=N)
    assert ks_two_sample(a.gaps, b.gaps) <= 0.04


# -- correlation functions ------------------------------------------------------------------------

def test_k1_density_ratio(gue_bulk):
    N, vals = gue_bulk
    est = correlation_estimate(vals[:50], 1, E=0.0, b=0.1, N=N)
    assert np.max(np.abs(est.values - 1)) <= 0.03


def test_k2_sine_law(gue_bulk):
    N, vals = gue_bulk
    edges = np.arange(-3.0, 3.0 + 1e-9, 0.1)
    est = correlation_estimate(vals, 2, E=0.0, b=0.1, edges=edges, N=N)
    c = est.centers
    target = 1 - sine_kernel(c) ** 2
    sel = (np.abs(c) >= 0.1) & (np.abs(c) <= 3)
    # the hard kernel returns bin averages; compare against the bin-averaged sine law
    fine = np.linspace(-0.05, 0.05, 21)
    avg = np.array([np.mean(1 - sine_kernel(x + fine) ** 2) for x in c])
    assert np.max(np.abs(est.values - avg)[sel]) <= 0.05 + 3 * est.stderr[sel].max()
    assert np.max(np.abs(target - avg)) < 0.02
    # exact symmetry of the symmetrized estimator
    np.testing.assert_array_equal(est.values, est.values[::-1])


def test_k2_poisson_surrogate():
    N = 1000
    pts = [np.sort(stream(9, i).uniform(-2, 2, size=N)) for i in range(100)]
    flat = lambda x: np.full(np.shape(x), 0.25)
    est = correlation_estimate(pts, 2, E=0.0, b=0.5, N=N, density=flat, edges=np.arange(-3, 3.01, 0.5))
    z = (est.values - 1) / est.stderr
    assert np.max(np.abs(z)) < 4.5


def test_k3_shape_and_symmetry():
    N = 300
    vals = [sample_spectrum(EnsembleSpec.gue(N), s) for s in range(10)]
    edges = np.arange(-2.0, 2.01, 0.5)
    est = correlation_estimate(vals, 3, E=0.0, b=0.2, edges=edges, N=N)
    assert est.values.shape == (8, 8)
    np.testing.assert_allclose(est.values, est.values.T)
    assert np.all(est.values >= 0)


def test_smooth_kernel_runs():
    N = 300
    vals = [sample_spectrum(EnsembleSpec.gue(N), s) for s in range(5)]
    est = correlation_estimate(vals, 2, E=0.0, b=0.2, N=N, kernel="smooth")
    assert est.kernel == "smooth" and np.all(est.values >= 0)


@pytest.mark.parametrize("kw,match", [
    (dict(k=4), "k must"),
    (dict(k=2, edges=np.array([0.0, 0.1, 0.3])), "uniform"),
    (dict(k=2, edges=np.arange(0, 0.01, 1e-5)), "resolution"),
    (dict(k=2, b=0.001), "at least"),
    (dict(k=2, kernel="box"), "kernel"),
])
def test_correlation_errors(kw, match):
    vals = [np.linspace(-2, 2, 100)]
    with pytest.raises(ValueError, match=match):
        correlation_estimate(vals, **kw)


# -- edge ------------------------------------------------------------------------------------

def test_extreme_eigenvalues_match_dense():
    for spec in (EnsembleSpec.gue(120), EnsembleSpec.wigner(120, "hermitian", EntryDistribution.bernoulli()),
                 EnsembleSpec.wigner(30, "symmetric")):
        lo, hi = extreme_eigenvalues(spec, 5)
        ev = sample_spectrum(spec, 5)
        assert lo == pytest.approx(ev[0], abs=1e-9) and hi == pytest.approx(ev[-1], abs=1e-9)


def test_edge_statistics_gue():
    N = 400
    spec = EnsembleSpec.gue(N)
    pairs = [extreme_eigenvalues(spec, mix_seed(8, i)) for i in range(800)]
    es = edge_statistics(pairs, lambda s: tracy_widom_cdf(np.clip(s, -8, 6)), N=N)
    assert es.ks_upper <= 0.08
    assert np.mean(es.upper > 3) <= 0.01
    assert ks_two_sample(es.upper, es.lower) <= 0.08
    with pytest.raises(ValueError):
        edge_statistics(pairs[:10])


def test_edge_scaled():
    up, lo = edge_scaled(np.array([-2.0, 0.0, 2.0]))
    assert up == 0 and lo == 0
