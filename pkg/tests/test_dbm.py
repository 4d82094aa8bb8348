import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from rmtlab.dbm import (DbmConfig, OrderingError, ParticleState, dbm_drift, dbm_step, interaction_drift,
                        local_relaxation_drift, matrix_ou_flow, matrix_time, q_diagnostic, read_trajectory_csv,
                        relaxation_scan, simulate, stationary_spec, write_relaxation_csv, write_trajectory_csv)
from rmtlab.ensemble import (EnsembleSpec, EntryDistribution, build_variance_profile, mix_seed, sample_matrix,
                             sample_spectrum, stream)
from rmtlab.resolvent import classical_locations, semicircle_mass
from rmtlab.spacing import unfold_gaps
from rmtlab.stats import ks_two_sample


class ZeroRng:
    """Stand-in generator with the noise switched off."""

    def standard_normal(self, size):
        return np.zeros(size)


def bernoulli_start(N, runs, seed=0):
    spec = EnsembleSpec.wigner(N, "hermitian", EntryDistribution.bernoulli())
    return np.array([sample_spectrum(spec, mix_seed(seed, r)) for r in range(runs)])


# -- drift -----------------------------------------------------------------------------

@pytest.mark.parametrize("beta", [1, 2])
def test_two_particle_drift(beta):
    a = 0.7
    x = np.array([-a, a])
    N = 2
    np.testing.assert_allclose(interaction_drift(x, beta), [-beta / (4 * N * a), beta / (4 * N * a)])
    np.testing.assert_allclose(dbm_drift(x, beta) - interaction_drift(x, beta), [beta * a / 4, -beta * a / 4])


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=30, unique=True), st.sampled_from([1, 2]))
def test_drift_symmetry_and_momentum(pts, beta):
    x = np.sort(np.array(pts))
    if np.min(np.diff(x)) < 1e-6:
        return
    assert abs(interaction_drift(x, beta).sum()) <= 1e-10 * max(1.0, np.abs(interaction_drift(x, beta)).max())
    # reflection x -> -x reverses the order and flips the drift
    np.testing.assert_allclose(dbm_drift(-x[::-1], beta)[::-1], -dbm_drift(x, beta), atol=1e-9)


def test_drift_near_equilibrium():
    N = 100
    g = classical_locations(N)
    g[-1] = 2.0 - 1e-3  # keep the last point off the hard edge
    d = dbm_drift(g, 2)
    j = np.arange(1, N + 1)
    bulk = (j >= 0.1 * N) & (j <= 0.9 * N)
    assert np.max(np.abs(d[bulk])) <= 0.5


def test_coincident_points():
    with pytest.raises(ValueError):
        dbm_drift(np.array([0.0, 0.0, 1.0]), 2)


def test_batched_drift_matches_rows():
    x = bernoulli_start(20, 3)
    np.testing.assert_array_equal(dbm_drift(x, 2)[1], dbm_drift(x[1], 2))


# -- local relaxation ----------------------------------------------------------------------

def test_local_relaxation_limits():
    N = 50
    g = classical_locations(N)
    g[-1] = 1.99
    x = bernoulli_start(N, 1)[0]
    np.testing.assert_array_equal(local_relaxation_drift(x, math.inf, g, 2), dbm_drift(x, 2))
    np.testing.assert_array_equal(local_relaxation_drift(g, 0.3, g, 2), dbm_drift(g, 2))
    with pytest.raises(ValueError):
        local_relaxation_drift(x, 0.0, g, 2)


def test_local_relaxation_speeds_up_q():
    N, runs = 100, 20
    R = N ** -0.25
    cfg = DbmConfig(beta=2, N=N, dt=1e-4, t_end=0.05, seed=3)
    g = classical_locations(N)
    x0 = 0.7 * bernoulli_start(N, runs, seed=1)
    plain = simulate(cfg, x0)
    fast = simulate(cfg, x0, R=R)
    qa = np.sum((plain.final() - g) ** 2, axis=1)
    qb = np.sum((fast.final() - g) ** 2, axis=1)
    wins = int(np.sum(qb < qa))
    assert stats.binomtest(wins, runs, 0.5, alternative="greater").pvalue < 0.05


# -- stepping --------------------------------------------------------------------------------------

@pytest.mark.parametrize("beta", [1, 2])
def test_scalar_ou_decay(beta):
    dt, n = 1e-3, 1000
    st_ = ParticleState(np.array([1.5]))
    for _ in range(n):
        st_ = dbm_step(st_, dt, ZeroRng(), beta)
    exact = 1.5 * math.exp(-beta / 4 * n * dt)
    assert abs(st_.x[0] - exact) <= 10 * n * dt**2
    assert st_.t == pytest.approx(n * dt)


def test_state_validation():
    with pytest.raises(ValueError):
        ParticleState(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        DbmConfig(beta=4)
    with pytest.raises(ValueError):
        DbmConfig(scheme="rk4")
    with pytest.raises(ValueError):
        dbm_step(ParticleState(np.array([0.0, 1.0])), 0.0, stream(0))


def test_bridge_recovers_ordering():
    # a step large enough to cross, which bridge halving must repair
    x = ParticleState(np.array([-1e-3, 1e-3]))
    rng = stream(1)
    for _ in range(200):
        x = dbm_step(x, 1e-2, rng, 2)
    assert np.all(np.diff(x.x) > 0)


def test_raise_policy_reports_snapshot():
    cfg = DbmConfig(beta=2, N=2, dt=1.0, collision="raise")
    x = ParticleState(np.array([-1e-3, 1e-3]))
    attract = lambda y: np.array([1.0, -1.0])
    with pytest.raises(OrderingError) as exc:
        dbm_step(x, 1.0, stream(0), 2, cfg, attract)
    np.testing.assert_array_equal(exc.value.snapshot, x.x)
    # the bridge policy gives up after max_halvings on a drift that always crosses
    cfg = DbmConfig(beta=2, N=2, dt=1.0, max_halvings=3)
    with pytest.raises(OrderingError):
        dbm_step(x, 1.0, stream(0), 2, cfg, attract)


def test_ordering_stress():
    N = 200
    cfg = DbmConfig(beta=2, N=N, t_end=1e5 * 0.1 / N**2, seed=11)
    assert cfg.n_steps == 100000
    traj = simulate(cfg, bernoulli_start(N, 1))
    assert np.all(np.diff(traj.final(), axis=1) > 0)


def test_substep_scheme_runs_and_orders():
    N = 30
    cfg = DbmConfig(beta=1, N=N, dt=1e-3, t_end=0.2, scheme="euler-substep", substeps=3, seed=2)
    traj = simulate(cfg, classical_locations(N) * 0.99)
    assert traj.states.shape == (1, 2, N)
    assert np.all(np.diff(traj.final(), axis=1) > 0)


def test_simulate_deterministic_per_run():
    N = 20
    cfg = DbmConfig(N=N, dt=1e-4, t_end=0.01, seed=5)
    x0 = bernoulli_start(N, 3)
    a = simulate(cfg, x0).final()
    b = simulate(cfg, x0[1:2]).final()
    # run index keys the noise stream, so run 0 of a 1-run batch equals run 0 of the 3-run batch
    np.testing.assert_array_equal(simulate(cfg, x0[:1]).final()[0], a[0])
    assert not np.array_equal(a[1], b[0])


def test_equilibration_density():
    N, runs = 100, 40
    cfg = DbmConfig(beta=2, N=N, dt=1e-4, t_end=2.0, seed=7)
    x = simulate(cfg, bernoulli_start(N, runs, seed=2)).final().ravel()
    edges = np.arange(-1.5, 1.51, 0.5)
    counts = np.histogram(x, bins=edges)[0] / x.size
    expected = np.array([semicircle_mass(a, b) for a, b in zip(edges[:-1], edges[1:])])
    assert np.max(np.abs(counts / expected - 1)) <= 0.05


def test_matrix_time_mapping():
    assert matrix_time(0.5, 2) == 0.5
    assert matrix_time(0.5, 1) == 0.25


def test_sde_matches_matrix_flow_small():
    N, runs, t = 100, 60, 0.5
    spec = EnsembleSpec.wigner(N, "hermitian", EntryDistribution.bernoulli())
    base = [sample_matrix(spec, mix_seed(4, r)) for r in range(runs)]
    x0 = np.array([np.linalg.eigvalsh(b.entries) for b in base])
    cfg = DbmConfig(beta=2, N=N, dt=1e-4, t_end=t, seed=8)
    sde = simulate(cfg, x0).final()
    ou = [np.linalg.eigvalsh(matrix_ou_flow(b, matrix_time(t, 2), mix_seed(9, r)).entries)
          for r, b in enumerate(base)]
    ga = unfold_gaps(list(sde), E=0.0, N=N)
    gb = unfold_gaps(ou, E=0.0, N=N)
    assert ks_two_sample(ga.gaps, gb.gaps) <= 0.06
    # and the one-point density agrees
    assert ks_two_sample(sde.ravel(), np.ravel(ou)) <= 0.03


# -- matrix flow ------------------------------------------------------------------------------------

def test_matrix_ou_limits():
    spec = EnsembleSpec.wigner(20, "symmetric", EntryDistribution.bernoulli())
    base = sample_matrix(spec, 1)
    assert matrix_ou_flow(base, 0.0, 3) is base
    V = matrix_ou_flow(base, math.inf, 3)
    assert V.spec.dist.kind == "gaussian"


# -- Q diagnostic -------------------------------------------------------------------------------------

def test_q_pinned_is_zero():
    g = classical_locations(30)
    q = q_diagnostic(np.tile(g, (4, 3, 1)))
    assert q.sup == 0


def test_q_stationary_for_gue_start():
    N, runs = 100, 30
    x0 = np.array([sample_spectrum(EnsembleSpec.gue(N), mix_seed(1, r)) for r in range(runs)])
    cfg = DbmConfig(beta=2, N=N, dt=1e-4, t_end=0.4, seed=4)
    traj = simulate(cfg, x0, record=[0.0, 0.2, 0.4])
    q = q_diagnostic(traj.states, traj.times)
    assert np.ptp(q.Q) <= 4 * q.stderr.max()


def test_q_bernoulli_regime():
    N, runs = 500, 6
    cfg = DbmConfig(beta=2, N=N, dt=1e-4, t_end=0.1, seed=6)
    traj = simulate(cfg, bernoulli_start(N, runs, seed=3))
    q = q_diagnostic(traj.final())
    assert N * q.sup <= math.log(N) ** 3


# -- relaxation scan ----------------------------------------------------------------------------------

def test_relaxation_scan_equilibrium_limit(tmp_path):
    N = 60
    spec = EnsembleSpec.wigner(N, "hermitian", EntryDistribution.bernoulli())
    scan = relaxation_scan(spec, [0.0, math.inf], "gap-ks", n_samples=30, seed=2, n_boot=10)
    assert np.all(scan.distance >= 0) and scan.noise_floor >= 0
    assert abs(scan.distance[-1] - scan.noise_floor) <= 3 * math.hypot(scan.stderr[-1], scan.noise_floor_stderr)
    write_relaxation_csv(tmp_path / "r.csv", scan)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "# schema: rmtlab.relaxation/1" and lines[2] == "t,distance,stderr"
    with pytest.raises(ValueError):
        relaxation_scan(spec, [0.0], "mean", n_samples=2)


def test_relaxation_from_diagonal_start_decreases():
    # a diagonal (Poisson-like) start is far from equilibrium and relaxes toward it
    N = 80
    diag = EnsembleSpec(N, "hermitian", profile=build_variance_profile("explicit", N, sigma=np.eye(N)))
    scan = relaxation_scan(diag, [0.0, 0.05, 1.0, math.inf], "gap-ks", n_samples=30, seed=3, n_boot=10)
    d, e = scan.distance, scan.stderr
    assert d[0] > 0.25 and d[0] > d[1] + 3 * e[1] and d[1] > d[2] + 3 * e[2]
    # t = inf is an independent draw from the stationary law
    assert abs(d[3] - scan.noise_floor) < 3 * math.hypot(e[3], scan.noise_floor_stderr)


def test_ou_noise_is_flat_for_profiled_start():
    N = 30
    diag = EnsembleSpec(N, "hermitian", profile=build_variance_profile("explicit", N, sigma=np.eye(N)))
    H = matrix_ou_flow(sample_matrix(diag, 1), math.inf, 2).entries
    assert np.count_nonzero(np.abs(H - np.diag(np.diag(H))) > 0) == N * (N - 1)
    assert stationary_spec(diag).profile.kind == "flat"


# -- trajectory I/O ----------------------------------------------------------------------------------

def test_trajectory_csv_round_trip(tmp_path):
    N = 5
    cfg = DbmConfig(N=N, dt=1e-3, t_end=0.01, seed=1)
    traj = simulate(cfg, classical_locations(N) * 0.9, record=np.arange(11) * 1e-3)
    write_trajectory_csv(tmp_path / "t.csv", traj, stride=2)
    head = (tmp_path / "t.csv").read_text().splitlines()[:3]
    assert head[0] == "# schema: rmtlab.trajectory/1"
    assert head[2] == "t,x1,x2,x3,x4,x5"
    t, x = read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(t, traj.times[::2])
    np.testing.assert_array_equal(x, traj.states[0, ::2])
