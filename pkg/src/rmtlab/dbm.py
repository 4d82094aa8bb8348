"""Dyson Brownian motion, the matrix Ornstein-Uhlenbeck flow and local relaxation.

Eigenvalue SDE (time ``t``)::

    dx_i = dB_i / sqrt(N) + [ -(beta/4) x_i + (beta / 2N) sum_{j != i} 1/(x_i - x_j) ] dt

For beta = 2 it is the eigenvalue process of ``dH = dB/sqrt(N) - H/2 dt`` at the same
time; for beta = 1 the matrix time is ``t/2`` (see :func:`matrix_time`).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .ensemble import (EnsembleSpec, MatrixSample, gaussian_convolve_matrix,
                       mix_seed, sample_matrix, sample_spectrum, stream)
from .resolvent import classical_locations
from .spacing import correlation_estimate, unfold_gaps
from .stats import ks_two_sample

SCHEMES = ("euler-maruyama", "euler-substep")
COLLISION_POLICIES = ("bridge", "raise")
TRAJECTORY_SCHEMA = "rmtlab.trajectory/1"
RELAX_SCHEMA = "rmtlab.relaxation/1"


class OrderingError(RuntimeError):
    """Ordering could not be restored by step halving."""

    def __init__(self, msg: str, snapshot: np.ndarray, t: float):
        super().__init__(msg)
        self.snapshot = snapshot
        self.t = t


@dataclass(frozen=True)
class DbmConfig:
    beta: int = 2
    N: int = 100
    dt: Optional[float] = None    # default 0.1 / N^2
    t_end: float = 1.0
    scheme: str = "euler-maruyama"
    collision: str = "bridge"
    seed: int = 0
    max_halvings: int = 20
    substeps: int = 2             # only for euler-substep

    def __post_init__(self):
        if self.beta not in (1, 2):
            raise ValueError("beta must be 1 or 2")
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.collision not in COLLISION_POLICIES:
            raise ValueError(f"collision must be one of {COLLISION_POLICIES}")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else 0.1 / self.N**2

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.step))


@dataclass
class ParticleState:
    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if not is_ordered(self.x):
            raise ValueError("particle positions must be strictly increasing")


def is_ordered(x: np.ndarray) -> bool:
    return bool(np.all(np.diff(x, axis=-1) > 0))


def matrix_time(t_sde: float, beta: int) -> float:
    """Matrix OU time equivalent to SDE time ``t_sde``."""
    return beta * t_sde / 2.0


# -- drift ----------------------------------------------------------------------

@numba.njit(cache=True)
def _interaction(x, out):
    R, N = x.shape
    for r in range(R):
        for i in range(N):
            out[r, i] = 0.0
        for i in range(N):
            xi = x[r, i]
            acc = 0.0
            for j in range(i + 1, N):
                v = 1.0 / (xi - x[r, j])
                acc += v
                out[r, j] -= v
            out[r, i] += acc


def interaction_drift(x, beta: int) -> np.ndarray:
    """(beta / 2N) sum_{j != i} 1/(x_i - x_j), over the last axis."""
    x = np.asarray(x, dtype=float)
    xb = np.ascontiguousarray(x.reshape(-1, x.shape[-1]))
    out = np.empty_like(xb)
    _interaction(xb, out)
    return (out * (beta / (2.0 * x.shape[-1]))).reshape(x.shape)


def dbm_drift(x, beta: int) -> np.ndarray:
    """Full DBM drift; ``x`` may be a batch ``(runs, N)``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.diff(x, axis=-1) == 0):
        raise ValueError("coincident points")
    return -(beta / 4.0) * x + interaction_drift(x, beta)


def local_relaxation_drift(x, R: float, gammas: np.ndarray, beta: int) -> np.ndarray:
    """DBM drift plus the confinement ``-(x_j - gamma_j) / (2 R^2)``; ``R = inf`` is plain DBM."""
    if not R > 0:
        raise ValueError("R must be positive")
    base = dbm_drift(x, beta)
    if math.isinf(R):
        return base
    return base - (np.asarray(x) - gammas) / (2.0 * R * R)


# -- stepping -------------------------------------------------------------------

def _advance(x, dt, dB, drift_fn, rng, level, cfg, t):
    """One Euler-Maruyama step with Brownian-bridge halving on ordering violations."""
    y = x + drift_fn(x) * dt + dB
    if is_ordered(y):
        return y
    if cfg.collision == "raise" or level >= cfg.max_halvings:
        raise OrderingError(f"ordering violated at t={t:.6g} after {level} halvings", x.copy(), t)
    h = 0.5 * dt
    # bridge: first half given the total increment
    dB1 = 0.5 * dB + math.sqrt(h / 2.0) * rng.standard_normal(x.size) / math.sqrt(x.size)
    mid = _advance(x, h, dB1, drift_fn, rng, level + 1, cfg, t)
    return _advance(mid, h, dB - dB1, drift_fn, rng, level + 1, cfg, t + h)


def dbm_step(state: ParticleState, dt: float, rng: np.random.Generator, beta: int = 2,
             cfg: Optional[DbmConfig] = None, drift_fn: Optional[Callable] = None) -> ParticleState:
    """Advance one step of length ``dt``; noise has standard deviation sqrt(dt/N)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    cfg = cfg or DbmConfig(beta=beta, N=state.x.size, dt=dt)
    drift_fn = drift_fn or (lambda y: dbm_drift(y, beta))
    N = state.x.size
    dB = rng.standard_normal(N) * math.sqrt(dt / N)
    if cfg.scheme == "euler-substep":
        x = state.x
        h = dt / cfg.substeps
        rest = dB
        for k in range(cfg.substeps, 0, -1):
            # bridge-split the remaining increment into one substep and the rest
            piece = rest / k + math.sqrt(h * (k - 1) / k) * rng.standard_normal(N) / math.sqrt(N) if k > 1 else rest
            x = _advance(x, h, piece, drift_fn, rng, 0, cfg, state.t)
            rest = rest - piece
        return ParticleState(x, state.t + dt)
    return ParticleState(_advance(state.x, dt, dB, drift_fn, rng, 0, cfg, state.t), state.t + dt)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # (runs, len(times), N)
    config: DbmConfig
    R: float = math.inf

    def final(self) -> np.ndarray:
        return self.states[:, -1, :]


def simulate(cfg: DbmConfig, x0: np.ndarray, record: Optional[Sequence[float]] = None,
             R: float = math.inf, gammas: Optional[np.ndarray] = None) -> Trajectory:
    """Integrate a batch of runs; run ``r`` draws noise from stream ``(cfg.seed, r)``.

    ``x0`` has shape ``(runs, N)`` (or ``(N,)``). ``R < inf`` adds the local
    relaxation confinement toward ``gammas`` (default: classical locations).
    """
    x = np.array(x0, dtype=float, ndmin=2)
    runs, N = x.shape
    if not is_ordered(x):
        raise ValueError("initial state must be strictly increasing")
    if not R > 0:
        raise ValueError("R must be positive")
    if gammas is None and not math.isinf(R):
        gammas = classical_locations(N)
    dt, n = cfg.step, cfg.n_steps
    rec_steps = sorted({int(round(r / dt)) for r in (record if record is not None else [0.0, cfg.t_end])})
    if rec_steps and rec_steps[-1] > n:
        raise ValueError("record time beyond t_end")
    rngs = [stream(cfg.seed, r) for r in range(runs)]
    bridge_rngs = [stream(cfg.seed, r, 0xB1) for r in range(runs)]
    scale = math.sqrt(dt / N)
    b4 = cfg.beta / 4.0
    inv2R2 = 0.0 if math.isinf(R) else 1.0 / (2.0 * R * R)

    def drift(y):
        d = -b4 * y + interaction_drift(y, cfg.beta)
        if inv2R2:
            d = d - (y - gammas) * inv2R2
        return d

    out = np.empty((runs, len(rec_steps), N))
    k = 0
    if rec_steps and rec_steps[0] == 0:
        out[:, 0] = x
        k = 1
    simple = cfg.scheme == "euler-maruyama"
    for step in range(1, n + 1):
        if simple:
            dB = np.stack([g.standard_normal(N) for g in rngs]) * scale
            y = x + drift(x) * dt + dB
            bad = np.nonzero(np.any(np.diff(y, axis=1) <= 0, axis=1))[0]
            for r in bad:
                y[r] = _advance(x[r], dt, dB[r], drift, bridge_rngs[r], 0, cfg, (step - 1) * dt)
            x = y
        else:
            for r in range(runs):
                st = dbm_step(ParticleState(x[r], (step - 1) * dt), dt, rngs[r], cfg.beta, cfg, drift)
                x[r] = st.x
        if k < len(rec_steps) and rec_steps[k] == step:
            out[:, k] = x
            k += 1
    times = np.array(rec_steps, dtype=float) * dt
    return Trajectory(times, out, cfg, R)


# -- matrix route ---------------------------------------------------------------

def stationary_spec(start: EnsembleSpec) -> EnsembleSpec:
    """Stationary law of the matrix OU flow: the flat Gaussian ensemble of the same symmetry."""
    return EnsembleSpec(start.N, start.symmetry, diagonal_factor=start.diagonal_factor)


def matrix_ou_flow(base: MatrixSample, t: float, seed: int) -> MatrixSample:
    """Exact-in-law matrix OU at time ``t``: ``e^{-t/2} H + sqrt(1 - e^{-t}) V``; ``t = inf`` gives V.

    ``V`` is drawn from the flat Gaussian ensemble whatever the variance profile of ``H``.
    """
    spec = stationary_spec(base.spec) if base.spec is not None else None
    return gaussian_convolve_matrix(base, t, seed, spec)


# -- diagnostics ----------------------------------------------------------------

@dataclass(eq=False)
class QEstimate:
    times: np.ndarray
    Q: np.ndarray
    stderr: np.ndarray

    @property
    def sup(self) -> float:
        return float(np.max(self.Q))


def q_diagnostic(states: np.ndarray, times=None, gammas: Optional[np.ndarray] = None) -> QEstimate:
    """Monte Carlo estimate of sum_j E(x_j - gamma_j)^2 at each recorded time.

    ``states`` has shape ``(runs, T, N)`` (a :class:`Trajectory`'s states) or ``(runs, N)``.
    """
    s = np.asarray(states, dtype=float)
    if s.ndim == 2:
        s = s[:, None, :]
    g = classical_locations(s.shape[-1]) if gammas is None else gammas
    per = np.sum((s - g) ** 2, axis=-1)          # (runs, T)
    runs = per.shape[0]
    err = per.std(axis=0, ddof=1) / math.sqrt(runs) if runs > 1 else np.zeros(per.shape[1])
    t = np.arange(per.shape[1], dtype=float) if times is None else np.asarray(times, dtype=float)
    return QEstimate(t, per.mean(axis=0), err)


@dataclass(eq=False)
class RelaxationScan:
    times: np.ndarray
    distance: np.ndarray
    stderr: np.ndarray
    noise_floor: float
    noise_floor_stderr: float
    statistic: str
    meta: dict = field(default_factory=dict)

    def rows(self):
        for t, d, e in zip(self.times, self.distance, self.stderr):
            yield {"t": float(t), "distance": float(d), "stderr": float(e)}

    def nonincreasing(self, n_err: float = 2.0) -> bool:
        d, e = self.distance, self.stderr
        return all(d[i + 1] <= d[i] + n_err * math.hypot(e[i], e[i + 1]) for i in range(d.size - 1))


STATISTICS = ("gap-ks", "k2-distance")


def _k2_curve(spectra, N, E, b, edges):
    return correlation_estimate(spectra, 2, E, b, edges, N=N).values


def _distance(stat, spectra, eq, N, E, t_window, b, edges):
    if stat == "gap-ks":
        return ks_two_sample(unfold_gaps(spectra, E, t_window, N).gaps,
                             unfold_gaps(eq, E, t_window, N).gaps)
    return float(np.max(np.abs(_k2_curve(spectra, N, E, b, edges) - _k2_curve(eq, N, E, b, edges))))


def _bootstrap(stat, spectra, eq, N, E, t_window, b, edges, n_boot, rng):
    S = len(spectra)
    vals = []
    for _ in range(n_boot):
        i = rng.integers(0, S, S)
        j = rng.integers(0, len(eq), len(eq))
        vals.append(_distance(stat, [spectra[k] for k in i], [eq[k] for k in j], N, E, t_window, b, edges))
    return float(np.std(vals, ddof=1))


def relaxation_sample(start: EnsembleSpec, times: Sequence[float], seed: int, i: int,
                      n_samples: int) -> tuple[list, np.ndarray, np.ndarray]:
    """Spectra of sample ``i``: H_t for each t (same base matrix), plus two equilibrium draws."""
    twin = stationary_spec(start)
    base = sample_matrix(start, mix_seed(seed, i))
    flow_seed = mix_seed(seed, n_samples + i)
    spectra = [np.linalg.eigvalsh(matrix_ou_flow(base, t, flow_seed).entries) for t in times]
    eq = sample_spectrum(twin, mix_seed(seed, 2 * n_samples + i))
    eq2 = sample_spectrum(twin, mix_seed(seed, 3 * n_samples + i))
    return spectra, eq, eq2


def relaxation_reduce(times, per_sample, statistic: str, N: int, seed: int = 0, E: float = 0.0,
                      t_window: Optional[float] = None, b: float = 0.5,
                      edges: Optional[np.ndarray] = None, n_boot: int = 20,
                      meta: Optional[dict] = None) -> RelaxationScan:
    """Combine :func:`relaxation_sample` outputs (in sample order) into a scan."""
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}")
    edges = np.arange(0.0, 3.0 + 1e-9, 0.2) if edges is None else edges
    eq = [p[1] for p in per_sample]
    eq2 = [p[2] for p in per_sample]
    rng = stream(seed, 0xB007)
    dist, err = [], []
    for k in range(len(times)):
        spectra = [p[0][k] for p in per_sample]
        dist.append(_distance(statistic, spectra, eq, N, E, t_window, b, edges))
        err.append(_bootstrap(statistic, spectra, eq, N, E, t_window, b, edges, n_boot, rng))
    floor = _distance(statistic, eq2, eq, N, E, t_window, b, edges)
    floor_err = _bootstrap(statistic, eq2, eq, N, E, t_window, b, edges, n_boot, rng)
    return RelaxationScan(np.asarray(times, dtype=float), np.array(dist), np.array(err),
                          floor, floor_err, statistic, dict(meta or {}))


def relaxation_scan(start: EnsembleSpec, times: Sequence[float], statistic: str = "gap-ks",
                    n_samples: int = 100, seed: int = 0, E: float = 0.0,
                    t_window: Optional[float] = None, b: float = 0.5,
                    edges: Optional[np.ndarray] = None, n_boot: int = 20) -> RelaxationScan:
    """Distance of a local statistic of ``H_t`` (matrix OU from ``start``) to equilibrium.

    The same base matrices are reused across the time grid. Equilibrium is a fresh
    batch from the flow's stationary law; the noise floor is the distance between two
    independent equilibrium batches. Error bars are bootstrap over samples.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}")
    per = [relaxation_sample(start, times, seed, i, n_samples) for i in range(n_samples)]
    meta = {"ensemble": start.digest(), "n_samples": n_samples, "seed": seed, "E": E}
    return relaxation_reduce(times, per, statistic, start.N, seed, E, t_window, b, edges, n_boot, meta)


# -- output ---------------------------------------------------------------------

def write_trajectory_csv(path, traj: Trajectory, run: int = 0, stride: int = 1) -> None:
    N = traj.states.shape[-1]
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {TRAJECTORY_SCHEMA}\n")
        fh.write(f"# beta: {traj.config.beta}, N: {N}, dt: {traj.config.step!r}, seed: {traj.config.seed}, run: {run}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(N)])
        for k in range(0, traj.times.size, stride):
            w.writerow([repr(float(traj.times[k]))] + [repr(float(v)) for v in traj.states[run, k]])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=3)
    data = np.atleast_2d(data)
    return data[:, 0], data[:, 1:]


def write_relaxation_csv(path, scan: RelaxationScan) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {RELAX_SCHEMA}\n")
        fh.write(f"# statistic: {scan.statistic}, noise_floor: {scan.noise_floor!r}, "
                 f"noise_floor_stderr: {scan.noise_floor_stderr!r}\n")
        w = csv.writer(fh)
        w.writerow(["t", "distance", "stderr"])
        for r in scan.rows():
            w.writerow([repr(r["t"]), repr(r["distance"]), repr(r["stderr"])])
