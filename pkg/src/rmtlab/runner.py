"""Experiment orchestration: config parsing, per-sample seeding, parallel execution, persistence."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import pickle
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .dbm import DbmConfig, relaxation_reduce, relaxation_sample, simulate, write_trajectory_csv
from .ensemble import (EnsembleSpec, SpecError, mix_seed, sample_matrix,
                       sample_spectrum, spec_from_mapping)
from .localstats import (LscScanConfig, counting_sup, level_repulsion, lsc_reduce,
                         lsc_sample_errors, rigidity, scaled_norms)
from .reference import (catalan_moment, gap_density_fredholm, tracy_widom_curve,
                        wigner_surmise_cdf)
from .resolvent import density_semicircle, eigendecompose
from .spacing import correlation_estimate, default_window, extreme_eigenvalues, sample_gaps
from .stats import ecdf, ks_distance

KINDS = ("lsc-scan", "rigidity", "deloc", "repulsion", "gaps", "corr", "edge",
         "dbm-relax", "moments", "gfc-compare")
MANIFEST_SCHEMA = "rmtlab.manifest/1"
ENSEMBLE_KEYS = ("n", "symmetry", "dist", "profile", "band_width", "gamma", "m3", "m4",
                 "diagonal_factor", "diagonal_dist")
MAX_N = 20000


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


class MomentMismatchError(ValueError):
    """Green-function comparison refused: the first four moments do not match."""

    def __init__(self, report: dict):
        super().__init__(f"moment mismatch: {report}")
        self.report = report


# -- parameters -----------------------------------------------------------------

def _floats(v) -> tuple:
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).replace(";", ",").split(",") if x.strip())


# key -> (parser, default); defaults may depend on N via callables
PARAMS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "lsc-scan": {"energies": (_floats, (-1.0, 0.0, 1.0)), "eta_lo": (float, -0.9),
                 "eta_hi": (float, -0.3), "n_eta": (int, 7), "kappa": (float, 0.2)},
    "rigidity": {"threshold_c": (float, 5.0)},
    "deloc": {"kappa": (float, 0.2)},
    "repulsion": {"e": (float, 0.0), "order": (int, 2), "eps": (_floats, None),
                  "unit": (str, "spacing")},
    "gaps": {"e": (float, 0.0), "t": (float, None), "s_max": (float, 4.0), "bin": (float, 0.1)},
    "corr": {"e": (float, 0.0), "k": (int, 2), "b": (float, 0.1), "bin": (float, 0.1),
             "alpha_max": (float, 3.0), "kernel": (str, "hard")},
    "edge": {"s_lo": (float, -6.0), "s_hi": (float, 4.0), "step": (float, 0.05)},
    "dbm-relax": {"times": (_floats, None), "statistic": (str, "gap-ks"), "e": (float, 0.0),
                  "b": (float, 0.5), "trajectory": (int, 0), "dt": (float, 1e-4),
                  "stride": (int, 100)},
    "moments": {"kmax": (int, 5)},
    "gfc-compare": {"energies": (_floats, None), "eta_scale": (float, 1.0),
                    "b_dist": (str, "matched"), "b_m3": (float, None), "b_m4": (float, None),
                    "b_gamma": (float, 0.0), "b_symmetry": (str, None)},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    spec: EnsembleSpec
    samples: int = 20
    seed: int = 0
    params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    out: Optional[str] = None

    @property
    def N(self) -> int:
        return self.spec.N

    def digest(self) -> str:
        blob = json.dumps({"kind": self.kind, "raw": self.raw}, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    def seed_of(self, i: int) -> int:
        return mix_seed(self.seed, i)

    @classmethod
    def from_mapping(cls, cfg: dict, kind: Optional[str] = None, out: Optional[str] = None
                     ) -> "ExperimentConfig":
        cfg = {str(k).strip().lower(): v for k, v in cfg.items()}
        kind = kind or cfg.get("kind")
        if kind is None:
            raise ConfigError("kind", "missing experiment kind")
        if cfg.get("kind", kind) != kind:
            raise ConfigError("kind", f"config says {cfg['kind']!r} but {kind!r} was requested")
        if kind not in KINDS:
            raise ConfigError("kind", f"unknown kind {kind!r}; expected one of {KINDS}")
        table = PARAMS[kind]
        known = set(ENSEMBLE_KEYS) | {"kind", "samples", "seed", "sigma", "out"} | set(table)
        for k in cfg:
            if k not in known:
                raise ConfigError(k, f"unknown key for kind {kind!r}")
        try:
            samples = int(cfg.get("samples", 20))
        except (TypeError, ValueError):
            raise ConfigError("samples", "not an integer") from None
        if samples < 1:
            raise ConfigError("samples", "sample count must be >= 1")
        try:
            seed = int(cfg.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError("seed", "not an integer") from None
        if seed < 0:
            raise ConfigError("seed", "must be nonnegative")
        if "n" not in cfg:
            raise ConfigError("n", "missing matrix size")
        try:
            n = int(cfg["n"])
        except (TypeError, ValueError):
            raise ConfigError("n", "not an integer") from None
        if not 2 <= n <= MAX_N:
            raise ConfigError("n", f"must lie in [2, {MAX_N}]")
        try:
            spec = spec_from_mapping(cfg)
        except (SpecError, ValueError) as exc:
            raise ConfigError(_guess_field(str(exc)), str(exc)) from None
        params = {}
        for k, (parse, default) in table.items():
            if k in cfg and cfg[k] is not None and cfg[k] != "":
                try:
                    params[k] = parse(cfg[k])
                except (TypeError, ValueError):
                    raise ConfigError(k, f"cannot parse {cfg[k]!r}") from None
            else:
                params[k] = default
        raw = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(cfg.items()) if k != "out"}
        raw["kind"] = kind
        conf = cls(kind, spec, samples, seed, params, raw, out or cfg.get("out"))
        _validate(conf)
        return conf


def _guess_field(msg: str) -> str:
    for k in ("gamma", "m4", "m3", "band_width", "symmetry", "profile", "dist", "diagonal"):
        if k.replace("_", " ") in msg or k in msg:
            return k
    return "dist"


def _validate(c: ExperimentConfig) -> None:
    p, N = c.params, c.N

    def need(cond, key, msg):
        if not cond:
            raise ConfigError(key, msg)

    if c.kind == "lsc-scan":
        need(-1.0 <= p["eta_lo"] < p["eta_hi"] < 0, "eta_lo", "need -1 <= eta_lo < eta_hi < 0")
        need(p["n_eta"] >= 2, "n_eta", "need at least 2 eta values")
        need(0 < p["kappa"] < 2, "kappa", "must lie in (0, 2)")
        need(all(abs(e) <= 2 - p["kappa"] for e in p["energies"]), "energies", "must lie in the bulk")
    elif c.kind == "repulsion":
        need(abs(p["e"]) < 1.8, "e", "must lie in the bulk")
        need(p["order"] >= 1, "order", "must be >= 1")
        need(p["eps"] is None or all(0 < e <= 1 for e in p["eps"]), "eps", "values must lie in (0, 1]")
        need(p["unit"] in ("spacing", "absolute"), "unit", "must be 'spacing' or 'absolute'")
    elif c.kind == "gaps":
        need(abs(p["e"]) < 1.8, "e", "must lie in the bulk")
        need(p["t"] is None or 0 < p["t"] < 1, "t", "window must lie in (0, 1)")
        need(p["bin"] > 0 and p["s_max"] > p["bin"], "bin", "need 0 < bin < s_max")
    elif c.kind == "corr":
        need(p["k"] in (1, 2, 3), "k", "must be 1, 2 or 3")
        need(p["b"] >= 10.0 / N, "b", "must be >= 10/N")
        need(abs(p["e"]) + p["b"] < 2, "b", "averaging window leaves the spectrum")
        need(p["bin"] >= 1.0 / (10 * N), "bin", "below the resolution floor 1/(10N)")
        need(p["alpha_max"] > p["bin"], "alpha_max", "must exceed the bin width")
        need(p["kernel"] in ("hard", "smooth"), "kernel", "must be 'hard' or 'smooth'")
    elif c.kind == "edge":
        need(p["s_lo"] < p["s_hi"] and p["step"] > 0, "step", "need s_lo < s_hi and step > 0")
        need(-8 <= p["s_lo"] and p["s_hi"] <= 6, "s_lo", "grid must lie in [-8, 6]")
    elif c.kind == "dbm-relax":
        need(p["statistic"] in ("gap-ks", "k2-distance"), "statistic", "gap-ks or k2-distance")
        need(p["times"] is None or all(t >= 0 for t in p["times"]), "times", "must be nonnegative")
        need(p["dt"] is None or p["dt"] > 0, "dt", "must be positive")
        need(p["stride"] >= 1, "stride", "must be >= 1")
    elif c.kind == "moments":
        need(1 <= p["kmax"] <= 30, "kmax", "must lie in [1, 30]")
    elif c.kind == "gfc-compare":
        need(p["eta_scale"] > 0, "eta_scale", "must be positive")
        need(p["energies"] is None or all(abs(e) < 2 for e in p["energies"]), "energies",
             "must lie in (-2, 2)")


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines (``#`` comments), or a JSON object with the same keys."""
    s = text.strip()
    if s.startswith("{"):
        try:
            d = json.loads(s)
        except json.JSONDecodeError as exc:
            raise ConfigError("json", str(exc)) from None
        if not isinstance(d, dict):
            raise ConfigError("json", "top level must be an object")
        return d
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        k, v = (x.strip() for x in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {lineno}", "empty key")
        if k.lower() in out:
            raise ConfigError(k, "duplicate key")
        out[k.lower()] = v
    return out


def load_config(path, kind: Optional[str] = None, out: Optional[str] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    return ExperimentConfig.from_mapping(parse_config_text(text), kind, out)


# -- per-sample work ------------------------------------------------------------

def _lsc_grid(c: ExperimentConfig):
    p = c.params
    return LscScanConfig.geometric(c.spec, p["energies"], p["eta_lo"], p["eta_hi"], p["n_eta"],
                                   n_samples=c.samples, kappa=p["kappa"], base_seed=c.seed)


def _eps_grid(c):
    return np.asarray(c.params["eps"] if c.params["eps"] is not None else np.geomspace(0.05, 1.0, 10))


def _gfc_specs(c: ExperimentConfig):
    p = c.params
    d = dict(c.raw)
    d["symmetry"] = p["b_symmetry"] or d.get("symmetry", "hermitian")
    d["dist"] = p["b_dist"]
    d["gamma"] = p["b_gamma"]
    a = c.spec.dist
    d["m3"] = p["b_m3"] if p["b_m3"] is not None else a.moment(3)
    d["m4"] = p["b_m4"] if p["b_m4"] is not None else a.moment(4)
    d = {k: v for k, v in d.items() if k in ENSEMBLE_KEYS}
    return c.spec, spec_from_mapping(d)


def _gfc_energies(c):
    return np.asarray(c.params["energies"] if c.params["energies"] is not None
                      else np.linspace(-1.5, 1.5, 7))


def _im_m(values, z):
    return np.array([float(np.mean(1.0 / (values - zz)).imag) for zz in z])


def sample_result(c: ExperimentConfig, i: int):
    """Everything a reducer needs from sample ``i``; a pure function of (config, i)."""
    seed = c.seed_of(i)
    spec, p, N = c.spec, c.params, c.N
    if c.kind == "lsc-scan":
        g = _lsc_grid(c)
        return lsc_sample_errors(eigendecompose(sample_matrix(spec, seed), True), g.energies, g.etas)
    if c.kind in ("rigidity", "moments", "gaps", "corr"):
        return sample_spectrum(spec, seed)
    if c.kind == "edge":
        lo, hi = extreme_eigenvalues(spec, seed)
        return N ** (2.0 / 3.0) * np.array([hi - 2.0, -lo - 2.0])
    if c.kind == "deloc":
        sd = eigendecompose(sample_matrix(spec, seed), True)
        V = sd.eigenvectors[:, np.abs(sd.eigenvalues) <= 2 - p["kappa"]]
        return np.array([scaled_norms(V, math.inf).max(), scaled_norms(V, 4).max()])
    if c.kind == "repulsion":
        # covers both width conventions since rho_sc <= 1/pi < 1
        half = float(_eps_grid(c).max()) / (N * float(density_semicircle(p["e"])))
        return sample_spectrum(spec, seed, window=(p["e"] - half, p["e"] + half))
    if c.kind == "dbm-relax":
        return relaxation_sample(spec, _relax_times(c), c.seed, i, c.samples)
    if c.kind == "gfc-compare":
        sa, sb = _gfc_specs(c)
        z = _gfc_energies(c) + 1j * p["eta_scale"] / N
        return np.stack([_im_m(sample_spectrum(sa, seed), z),
                         _im_m(sample_spectrum(sb, mix_seed(seed, 0xB)), z)])
    raise ConfigError("kind", f"unknown kind {c.kind!r}")


def _relax_times(c):
    N = c.N
    t = c.params["times"]
    return tuple(t) if t is not None else (0.0, N**-1.0, N**-0.75, N**-0.5, N**-0.25, 1.0)


class SampleFailure(RuntimeError):
    """A sample failed (e.g. eigensolver non-convergence); the run is aborted, nothing is dropped."""

    def __init__(self, index: int, seed: int, reason: str):
        super().__init__(index, seed, reason)
        self.index, self.seed, self.reason = index, seed, reason

    def __str__(self):
        return f"sample {self.index} (seed {self.seed}) failed: {self.reason}"


def _chunk(args):
    c, idx = args
    out = []
    for i in idx:
        try:
            out.append(sample_result(c, i))
        except (np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
            raise SampleFailure(i, c.seed_of(i), str(exc)) from exc
    return out


def collect(c: ExperimentConfig, workers: int = 1, chunk: int = 8,
            checkpoint: Optional[Path] = None) -> list:
    """Per-sample results in index order; optional chunk checkpoints for resuming."""
    chunks = [list(range(s, min(s + chunk, c.samples))) for s in range(0, c.samples, chunk)]
    done: dict[int, list] = {}
    if checkpoint is not None:
        checkpoint.mkdir(parents=True, exist_ok=True)
        for k in range(len(chunks)):
            f = checkpoint / f"chunk_{k:06d}.pkl"
            if f.exists():
                with open(f, "rb") as fh:
                    done[k] = pickle.load(fh)
    todo = [k for k in range(len(chunks)) if k not in done]

    def store(k, res):
        done[k] = res
        if checkpoint is not None:
            tmp = checkpoint / f"chunk_{k:06d}.tmp"
            with open(tmp, "wb") as fh:
                pickle.dump(res, fh)
            os.replace(tmp, checkpoint / f"chunk_{k:06d}.pkl")

    if workers <= 1 or len(todo) <= 1:
        for k in todo:
            store(k, _chunk((c, chunks[k])))
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for k, res in zip(todo, ex.map(_chunk, [(c, chunks[k]) for k in todo])):
                store(k, res)
    return [r for k in range(len(chunks)) for r in done[k]]


# -- reducers and tables --------------------------------------------------------

@dataclass
class Table:
    name: str
    schema: str
    columns: list
    rows: list
    plot: bool = True


def _t(name, columns, rows):
    return Table(name, f"rmtlab.{name}/1", list(columns), rows)


def reduce_results(c: ExperimentConfig, res: list) -> tuple[list, dict]:
    """Turn per-sample results into output tables and a JSON summary."""
    spec, p, N = c.spec, c.params, c.N
    if c.kind == "lsc-scan":
        r = lsc_reduce(_lsc_grid(c), np.asarray(res))
        cols = ["E", "eta", "re_m", "im_m", "re_msc", "im_msc", "lambda", "lambda_d", "lambda_o",
                "lambda_max", "lambda_d_max", "lambda_o_max", "env_lambda", "env_offdiag"]
        keys = ["E", "eta", "re_m", "im_m", "re_msc", "im_msc", "lambda_mean", "lambda_d_mean",
                "lambda_o_mean", "lambda_max", "lambda_d_max", "lambda_o_max", "env_lambda", "env_offdiag"]
        rows = [[d[k] for k in keys] for d in r.rows()]
        summary = {"slope_lambda": r.fit_lambda.slope if r.fit_lambda else None,
                   "slope_lambda_o": r.fit_offdiag.slope if r.fit_offdiag else None}
        return [_t("lsc", cols, rows)], summary
    if c.kind == "rigidity":
        r = rigidity(res)
        rows = [[d["j"], d["mean_abs"], d["q50"], d["q90"], d["q99"], d["envelope"]] for d in r.rows()]
        thr = p["threshold_c"] * math.log(N) / N
        summary = {"Q": r.Q, "NQ": N * r.Q, "log_cubed": math.log(N) ** 3,
                   "bulk_fraction_within": r.bulk_fraction_within(thr), "threshold": thr,
                   "counting_sup_max": max(counting_sup(v) for v in res)}
        return [_t("rigidity", ["j", "mean_abs", "q50", "q90", "q99", "envelope"], rows)], summary
    if c.kind == "deloc":
        a = np.asarray(res)
        rows = [[i, a[i, 0], a[i, 1]] for i in range(a.shape[0])]
        summary = {"max_linf": float(a[:, 0].max()), "max_l4": float(a[:, 1].max())}
        return [_t("deloc", ["sample", "max_linf_scaled", "max_l4_scaled"], rows)], summary
    if c.kind == "repulsion":
        eps = _eps_grid(c)
        r = level_repulsion(res, N, p["e"], eps, p["order"], spec.beta, p["unit"], min_points=2)
        ci = r.intervals()
        rows = [[eps[i], int(r.counts_ge_n[i]), int(r.counts_ge_1[i]), r.trials, r.prob[i], ci[i][0], ci[i][1]]
                for i in range(eps.size)]
        summary = {"slope": r.fit.slope, "stderr": r.fit.stderr, "target": r.target_slope}
        return [_t("repulsion", ["eps", "count_ge_n", "count_ge_1", "trials", "prob", "ci_lo", "ci_hi"],
                   rows)], summary
    if c.kind == "gaps":
        t = p["t"] if p["t"] is not None else default_window(N)
        gaps = np.concatenate([sample_gaps(v, N, p["e"], t) for v in res])
        if gaps.size == 0:
            raise RuntimeError("no eigenvalue pairs in the window")
        edges = np.arange(0.0, p["s_max"] + p["bin"] / 2, p["bin"])
        cnt, _ = np.histogram(gaps, edges)
        dens = cnt / (gaps.size * p["bin"])
        rows = [[0.5 * (edges[i] + edges[i + 1]), dens[i], int(cnt[i])] for i in range(cnt.size)]
        summary = {"count": int(gaps.size), "mean_gap": float(gaps.mean()),
                   "ks_surmise": ks_distance(gaps, lambda s: wigner_surmise_cdf(s, spec.beta))}
        if spec.beta == 2:
            _, cdf = gap_density_fredholm()
            summary["ks_fredholm"] = ks_distance(gaps, cdf)
        return [_t("gaps", ["s", "density", "count"], rows)], summary
    if c.kind == "corr":
        k = p["k"]
        edges = np.arange(-p["alpha_max"] if k != 2 else 0.0, p["alpha_max"] + p["bin"] / 2, p["bin"])
        per = np.asarray([correlation_estimate([v], k, p["e"], p["b"], edges, N, p["kernel"]).values
                          for v in res])
        mean = per.mean(axis=0)
        err = per.std(axis=0, ddof=1) / math.sqrt(per.shape[0]) if per.shape[0] > 1 else np.zeros_like(mean)
        cen = 0.5 * (edges[1:] + edges[:-1])
        if k <= 2:
            rows = [[cen[i], mean[i], err[i]] for i in range(cen.size)]
            cols = ["alpha", "value", "stderr"]
        else:
            rows = [[cen[i], cen[j], mean[i, j], err[i, j]] for i in range(cen.size) for j in range(cen.size)]
            cols = ["alpha1", "alpha2", "value", "stderr"]
        summary = {"k": k, "b": p["b"], "bin": p["bin"]}
        if k == 2:
            summary["max_dev_sine"] = float(np.max(np.abs(mean - (1 - np.sinc(cen) ** 2))[cen >= 0.1]))
        return [_t("corr", cols, rows)], summary
    if c.kind == "edge":
        a = np.asarray(res)
        curve = tracy_widom_curve()
        grid = np.round(np.arange(p["s_lo"], p["s_hi"] + p["step"] / 2, p["step"]), 12)
        Fe = ecdf(a[:, 0], grid)
        Fl = ecdf(a[:, 1], grid)
        Fr = curve(grid) if spec.beta == 2 else np.full(grid.size, np.nan)
        rows = [[grid[i], Fe[i], Fl[i], Fr[i]] for i in range(grid.size)]
        summary = {"p_scaled_gt_3": float(np.mean(a[:, 0] > 3))}
        if spec.beta == 2:
            summary["ks_upper"] = ks_distance(np.clip(a[:, 0], -8, 6), curve)
            summary["ks_lower"] = ks_distance(np.clip(a[:, 1], -8, 6), curve)
        return [_t("edge", ["s", "F_emp", "F_emp_lower", "F_ref"], rows)], summary
    if c.kind == "dbm-relax":
        times = _relax_times(c)
        scan = relaxation_reduce(times, res, p["statistic"], N, c.seed, p["e"], None, p["b"])
        rows = [[r["t"], r["distance"], r["stderr"]] for r in scan.rows()]
        summary = {"noise_floor": scan.noise_floor, "noise_floor_stderr": scan.noise_floor_stderr,
                   "nonincreasing": scan.nonincreasing()}
        return [_t("relaxation", ["t", "distance", "stderr"], rows)], summary
    if c.kind == "moments":
        kmax = p["kmax"]
        pw = np.asarray([[np.mean(v**j) for j in range(1, 2 * kmax + 2)] for v in res])
        mean = pw.mean(axis=0)
        err = pw.std(axis=0, ddof=1) / math.sqrt(pw.shape[0]) if pw.shape[0] > 1 else np.zeros_like(mean)
        rows = []
        for j in range(1, 2 * kmax + 2):
            ref = catalan_moment(j // 2) if j % 2 == 0 else 0.0
            rows.append([j, mean[j - 1], err[j - 1], ref])
        return [_t("moments", ["order", "mean", "stderr", "semicircle"], rows)], {"kmax": kmax}
    if c.kind == "gfc-compare":
        a = np.asarray(res)              # (samples, 2, nE)
        S = a.shape[0]
        mean = a.mean(axis=0)
        err = a.std(axis=0, ddof=1) / math.sqrt(S) if S > 1 else np.zeros_like(mean)
        diff = mean[1] - mean[0]
        se = np.hypot(err[0], err[1])
        E = _gfc_energies(c)
        rows = [[E[i], mean[0, i], mean[1, i], diff[i], se[i]] for i in range(E.size)]
        ok = bool(np.all(np.abs(diff) <= 3 * se))
        return [_t("gfc", ["E", "im_m_a", "im_m_b", "diff", "stderr"], rows)], \
            {"passed": ok, "moment_gaps": moment_report(*_gfc_specs(c))}
    raise ConfigError("kind", f"unknown kind {c.kind!r}")


# -- Green function comparison ---------------------------------------------------

def moment_report(a: EnsembleSpec, b: EnsembleSpec) -> dict:
    N = a.N
    d3 = abs(a.dist.moment(3) - b.dist.moment(3))
    d4 = abs(a.dist.moment(4) - b.dist.moment(4))
    return {"dm3": d3, "dm4": d4, "max_dm3": N**-0.5, "max_dm4": 0.1,
            "matched": bool(d3 <= N**-0.5 and d4 <= 0.1)}


@dataclass
class GfcReport:
    energies: np.ndarray
    mean_a: np.ndarray
    mean_b: np.ndarray
    stderr: np.ndarray
    moments: dict

    @property
    def diff(self) -> np.ndarray:
        return self.mean_b - self.mean_a

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.diff) <= 3 * self.stderr))


def gfc_compare(a: EnsembleSpec, b: EnsembleSpec, samples: int = 400, seed: int = 0,
                energies=None, eta: Optional[float] = None) -> GfcReport:
    """Difference of E[(1/N) Im Tr G(E + i eta)] between two moment-matched ensembles."""
    if a.N != b.N:
        raise ValueError("ensembles must have the same N")
    rep = moment_report(a, b)
    if not rep["matched"]:
        raise MomentMismatchError(rep)
    N = a.N
    E = np.linspace(-1.5, 1.5, 7) if energies is None else np.asarray(energies, dtype=float)
    z = E + 1j * (1.0 / N if eta is None else eta)
    va = np.array([_im_m(sample_spectrum(a, mix_seed(seed, i)), z) for i in range(samples)])
    vb = np.array([_im_m(sample_spectrum(b, mix_seed(mix_seed(seed, i), 0xB)), z) for i in range(samples)])
    se = np.hypot(va.std(axis=0, ddof=1), vb.std(axis=0, ddof=1)) / math.sqrt(samples)
    return GfcReport(E, va.mean(axis=0), vb.mean(axis=0), se, rep)


# -- persistence ------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def table_csv(t: Table, ensemble: str, N: int, seeds: int) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {t.schema}\n")
    buf.write(f"# ensemble: {ensemble}, N: {N}, seeds: {seeds}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(t.columns) + ["ensemble", "N", "seeds"])
    for r in t.rows:
        w.writerow([_fmt(v) for v in r] + [ensemble, N, seeds])
    return buf.getvalue()


def table_plot_data(t: Table) -> str:
    lines = [f"# {t.schema}", "# " + " ".join(t.columns)]
    lines += [" ".join(_fmt(v) for v in r) for r in t.rows]
    return "\n".join(lines) + "\n"


def read_table(path) -> tuple[dict, list, np.ndarray]:
    """Parse an emitted CSV: (header metadata, column names, numeric array of the leading columns)."""
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        for part in lines[k][1:].split(","):
            if ":" in part:
                key, val = part.split(":", 1)
                meta[key.strip()] = val.strip()
        k += 1
    cols = lines[k].split(",")
    body = [r.split(",") for r in lines[k + 1:] if r]
    ncol = len(cols) - 3
    data = np.array([[float(x) for x in r[:ncol]] for r in body]) if body else np.empty((0, ncol))
    return meta, cols, data


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    kind: str
    config_hash: str
    version: str
    started: str
    finished: str
    wall_seconds: float
    workers: int
    files: dict
    summary: dict
    config: dict

    def to_json(self) -> str:
        d = {"schema": MANIFEST_SCHEMA, **self.__dict__}
        return json.dumps(d, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def run_experiment(c: ExperimentConfig, out: Optional[str] = None, workers: int = 1,
                   plot_data: bool = False, resume: bool = True) -> RunManifest:
    """Run, write result CSVs, ``summary.json`` and ``manifest.json``; return the manifest.

    Completed sample chunks are checkpointed under ``.partial``; a rerun with the
    same config hash resumes from them. Result files do not depend on ``workers``.
    """
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")
    outdir = Path(out or c.out or f"rmtlab-{c.kind}")
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("out", f"cannot create output directory: {exc}") from None
    if c.kind == "gfc-compare":
        rep = moment_report(*_gfc_specs(c))
        if not rep["matched"]:
            raise MomentMismatchError(rep)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    h = c.digest()
    ckpt = outdir / ".partial" / h[:16]
    if not resume and ckpt.exists():
        for f in ckpt.iterdir():
            f.unlink()
    res = collect(c, workers, checkpoint=ckpt)
    tables, summary = reduce_results(c, res)
    files = {}
    ens = c.spec.digest()
    for t in tables:
        path = outdir / f"{t.name}.csv"
        path.write_text(table_csv(t, ens, c.N, c.samples))
        files[path.name] = sha256_file(path)
        if plot_data:
            dpath = outdir / f"{t.name}.dat"
            dpath.write_text(table_plot_data(t))
            files[dpath.name] = sha256_file(dpath)
    if c.kind == "dbm-relax" and c.params["trajectory"] > 0:
        path = outdir / "trajectory.csv"
        _write_dbm_trajectory(c, path)
        files[path.name] = sha256_file(path)
    spath = outdir / "summary.json"
    spath.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    files[spath.name] = sha256_file(spath)
    man = RunManifest(c.kind, h, __version__, started, datetime.now(timezone.utc).isoformat(),
                      time.perf_counter() - t0, workers, files, summary, c.raw)
    (outdir / "manifest.json").write_text(man.to_json() + "\n")
    for f in ckpt.iterdir():
        f.unlink()
    ckpt.rmdir()
    try:
        ckpt.parent.rmdir()
    except OSError:
        pass
    return man


def _write_dbm_trajectory(c: ExperimentConfig, path: Path) -> None:
    """One SDE path started from the first sample's spectrum."""
    spec, p = c.spec, c.params
    x0 = np.linalg.eigvalsh(sample_matrix(spec, c.seed_of(0)).entries)
    t_end = max(t for t in _relax_times(c) if math.isfinite(t))
    beta = spec.beta
    cfg = DbmConfig(beta=beta, N=c.N, dt=p["dt"], t_end=t_end * 2.0 / beta, seed=c.seed)
    rec = np.arange(0, cfg.n_steps + 1, p["stride"]) * cfg.step
    write_trajectory_csv(path, simulate(cfg, x0, rec))


def verify_manifest(outdir) -> list:
    """Names of files whose checksum no longer matches the manifest."""
    outdir = Path(outdir)
    man = json.loads((outdir / "manifest.json").read_text())
    return [n for n, s in man["files"].items()
            if not (outdir / n).exists() or sha256_file(outdir / n) != s]
