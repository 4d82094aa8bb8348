import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from rmtlab.reference import (OracleError, QuadratureRule, ReferenceCurve, airy_derivative, airy_function,
                              airy_kernel, catalan_moment, count_dyck_paths, gap_density_fredholm,
                              gap_distribution, gap_probability, gap_probability_series, hermite_density,
                              hermite_functions, hermite_kernel, scaled_kernel, semicircle_moment, sine_det,
                              sine_kernel, tail_asymptotic, tracy_widom_cdf, tracy_widom_curve,
                              tracy_widom_painleve, tracy_widom_tail, wigner_surmise, wigner_surmise_cdf)
from rmtlab.reference.curves import cached_curve


def _min_eig(M):
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())


# -- quadrature and curves -----------------------------------------------------------------

@given(st.integers(1, 80), st.floats(-5, 5), st.floats(0.1, 10))
def test_quadrature_rule(m, a, length):
    q = QuadratureRule.gauss_legendre(m, a, a + length)
    assert np.all(q.weights > 0)
    assert abs(q.integrate(np.ones_like) - length) <= 1e-13 * max(1, length)


def test_reference_curve_interpolation_and_bounds(tmp_path):
    c = ReferenceCurve(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 4.0]), "sq")
    assert c(1.5) == pytest.approx(2.5)
    with pytest.raises(OracleError):
        c(2.5)
    with pytest.raises(OracleError):
        ReferenceCurve(np.array([0.0, 0.0]), np.zeros(2), "bad")
    c.to_csv(tmp_path / "c.csv")
    text = (tmp_path / "c.csv").read_text().splitlines()
    assert text[0].startswith("# schema: rmtlab.oracle/1") and text[1] == "# x,value"


def test_curve_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("RMTLAB_CACHE", str(tmp_path))
    calls = []
    grid = np.linspace(0, 1, 5)

    def build():
        calls.append(1)
        return ReferenceCurve(grid, grid**2, "demo")

    a = cached_curve("demo", grid, 10, build)
    b = cached_curve("demo", grid, 10, build)
    assert len(calls) == 1 and b.meta["cached"]
    np.testing.assert_array_equal(a.values, b.values)
    cached_curve("demo", grid, 20, build)
    assert len(calls) == 2


# -- sine kernel -----------------------------------------------------------------------------

def test_sine_kernel_values():
    assert sine_kernel(0.0) == 1
    assert abs(sine_kernel(1.0)) < 1e-16
    assert sine_kernel(0.5) == pytest.approx(2 / math.pi)
    x = np.linspace(-5, 5, 41)
    np.testing.assert_array_equal(sine_kernel(x), sine_kernel(-x))


def test_sine_det():
    assert sine_det([0.3]) == pytest.approx(1.0)
    assert sine_det([0.7, 0.7]) == pytest.approx(0.0, abs=1e-15)
    assert sine_det([0.0, 0.5]) == pytest.approx(1 - 4 / math.pi**2)


@given(st.lists(st.floats(-4, 4), min_size=2, max_size=6))
def test_sine_det_nonnegative(alphas):
    assert sine_det(alphas) >= -1e-12


def test_kernel_matrices_psd():
    g = np.linspace(-3, 3, 20)
    S = sine_kernel(np.subtract.outer(g, g))
    np.testing.assert_array_equal(S, S.T)
    assert _min_eig(S) >= -1e-10
    H = hermite_kernel(30, g[:, None], g[None, :])
    np.testing.assert_allclose(H, H.T, atol=1e-14)
    assert _min_eig(H) >= -1e-10
    a = np.linspace(0, 4, 20)
    A = airy_kernel(a[:, None], a[None, :])
    np.testing.assert_array_equal(A, A.T)
    assert _min_eig(A) >= -1e-10


# -- gap probability -------------------------------------------------------------------------------

def test_gap_probability_limits():
    assert gap_probability(0.0) == 1.0
    assert gap_probability(1e-6) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5])
def test_gap_probability_series(alpha):
    assert abs(gap_probability(alpha) - gap_probability_series(alpha, terms=3)) <= 1e-3


@pytest.fixture(scope="module")
def gap_law():
    return gap_distribution(6.0)


def test_gap_probability_monotone(gap_law):
    E = gap_law["E"]
    assert np.all(np.diff(E) <= 1e-14)
    assert np.all((E > 0) & (E <= 1))


def test_gap_density_normalization(gap_law):
    g, p = gap_law["grid"], gap_law["density"]
    assert np.all(p >= -1e-8)
    assert abs(integrate.trapezoid(p, g) - 1) <= 1e-3
    assert abs(integrate.trapezoid(g * p, g) - 1) <= 1e-3


def test_gap_density_vs_surmise(gap_law):
    g, p = gap_law["grid"], gap_law["density"]
    sel = g <= 3
    assert np.max(np.abs(p[sel] - wigner_surmise(g[sel], 2))) <= 0.02


def test_gap_nystrom_convergence():
    for a in (0.5, 2.0, 5.0):
        assert abs(gap_probability(a, 60) - gap_probability(a, 120)) <= 1e-8


def test_gap_grid_errors():
    with pytest.raises(OracleError):
        gap_distribution(7.0)
    with pytest.raises(OracleError):
        gap_distribution(2.0, m=10)


def test_gap_curves():
    dens, cdf = gap_density_fredholm(alpha_max=4.0)
    assert cdf(0.0) == pytest.approx(0.0, abs=1e-8)
    assert np.all(np.diff(cdf.values) >= -1e-10)
    assert dens.kind == "gap-density"


# -- Wigner surmise -------------------------------------------------------------------------------

@pytest.mark.parametrize("beta,power", [(1, 1), (2, 2)])
def test_surmise(beta, power):
    assert wigner_surmise(0.0, beta) == 0
    s = np.array([1e-3, 2e-3])
    r = wigner_surmise(s, beta)
    assert math.log(r[1] / r[0]) / math.log(2) == pytest.approx(power, abs=1e-3)
    norm = integrate.quad(lambda x: wigner_surmise(x, beta), 0, np.inf, epsabs=1e-13)[0]
    mean = integrate.quad(lambda x: x * wigner_surmise(x, beta), 0, np.inf, epsabs=1e-13)[0]
    assert norm == pytest.approx(1, abs=1e-10)
    assert mean == pytest.approx(1, abs=1e-10)
    assert wigner_surmise_cdf(1.3, beta) == pytest.approx(
        integrate.quad(lambda x: wigner_surmise(x, beta), 0, 1.3, epsabs=1e-13)[0], abs=1e-10)
    with pytest.raises(OracleError):
        wigner_surmise(1.0, 4)


# -- Hermite kernel -------------------------------------------------------------------------------

def test_hermite_orthonormal():
    x, w = special.roots_hermitenorm(80)
    psi = hermite_functions(40, x) * np.exp(x * x / 4)
    G = (psi * w) @ psi.T
    np.testing.assert_allclose(G, np.eye(40), atol=1e-10)


def test_hermite_reproducing_and_trace():
    N = 20
    t, w = special.roots_hermitenorm(60)
    w = w * np.exp(t * t / 2)
    for x, y in [(0.3, -1.1), (2.0, 2.5), (-4.0, 1.0)]:
        lhs = np.sum(w * hermite_kernel(N, x, t) * hermite_kernel(N, t, y))
        assert abs(lhs - hermite_kernel(N, x, y)) <= 1e-8
    assert abs(np.sum(w * hermite_density(N, t)) - N) <= 1e-8


def test_hermite_cd_matches_sum():
    x = np.linspace(-5, 5, 11)
    y = x + 0.37
    psx, psy = hermite_functions(25, x), hermite_functions(25, y)
    np.testing.assert_allclose(hermite_kernel(25, x, y), np.sum(psx * psy, axis=0), atol=1e-12)


def test_hermite_sine_limit():
    a = np.linspace(-3, 3, 31)
    A1, A2 = np.meshgrid(a, a)
    err = np.abs(scaled_kernel(200, 0.0, A1, A2) - sine_kernel(A1 - A2))
    assert err.max() <= 0.02


def test_hermite_range():
    with pytest.raises(OracleError):
        hermite_kernel(501, 0.0, 0.0)


# -- Airy ---------------------------------------------------------------------------------------------

def test_airy_at_zero_by_quadrature():
    # (1/pi) int_0^inf cos(t^3/3) dt, substituting u = t^3/3
    f = lambda u: (3 * u) ** (-2 / 3)
    head = integrate.quad(lambda u: math.cos(u) * f(u), 0, 1, limit=200)[0]
    tail = integrate.quad(f, 1, np.inf, weight="cos", wvar=1.0)[0]
    assert airy_function(0.0) == pytest.approx((head + tail) / math.pi, abs=1e-8)


def test_airy_against_scipy():
    x = np.linspace(-15, 15, 601)
    ai, aip, _, _ = special.airy(x)
    scale = np.maximum(1.0, np.abs(x)) ** 0.25
    assert np.max(np.abs(airy_function(x) - ai)) <= 1e-10
    assert np.max(np.abs(airy_derivative(x) - aip) / scale) <= 1e-9


def test_airy_decay_and_ode():
    x = np.linspace(2, 15, 300)
    assert np.all(np.diff(airy_function(x)) < 0) and np.all(airy_function(x) > 0)
    h = 1e-3
    g = np.linspace(-10, 5, 301)
    d2 = (airy_function(g + h) - 2 * airy_function(g) + airy_function(g - h)) / h**2
    assert np.max(np.abs(d2 - g * airy_function(g))) <= 1e-5
    with pytest.raises(OracleError):
        airy_function(16.0)


def test_airy_kernel_diagonal():
    for x in (-3.0, 0.0, 1.5):
        assert abs(airy_kernel(x, x + 1e-7) - airy_kernel(x, x)) <= 1e-5
    assert airy_kernel(0.4, 1.3) == airy_kernel(1.3, 0.4)


# -- Tracy-Widom -------------------------------------------------------------------------------------

def test_tw_tails():
    assert tracy_widom_cdf(6.0) >= 1 - 1e-8
    r = tracy_widom_tail(4.0) / tail_asymptotic(4.0)
    assert 1 / 1.2 <= r <= 1.2
    with pytest.raises(OracleError):
        tracy_widom_cdf(0.0, beta=1)
    with pytest.raises(OracleError):
        tracy_widom_cdf(-9.0)


def test_tw_two_routes():
    s = np.linspace(-6, 4, 101)
    assert np.max(np.abs(tracy_widom_cdf(s) - tracy_widom_painleve(s))) <= 1e-6


def test_tw_curve_monotone():
    c = tracy_widom_curve(-6, 4, 0.1)
    assert np.all(np.diff(c.values) >= -1e-12)
    # known moments of F2: mean -1.7711, variance 0.8132
    dens = np.gradient(c.values, c.grid)
    mean = integrate.trapezoid(c.grid * dens, c.grid)
    assert mean == pytest.approx(-1.7711, abs=5e-3)


# -- Catalan -----------------------------------------------------------------------------------------

def test_catalan():
    assert [catalan_moment(k) for k in range(5)] == [1, 1, 2, 5, 14]
    assert catalan_moment(30) == 3814986502092304
    for k in range(6):
        assert count_dyck_paths(k) == catalan_moment(k)
    assert semicircle_moment(3) == 0 and semicircle_moment(4) == 2
    with pytest.raises(OracleError):
        catalan_moment(-1)
