"""Wigner-type ensembles: entry laws, variance profiles and matrix samples.

Every random draw is keyed by ``(seed, row)`` so a sample is a pure function
of its spec and seed, independent of evaluation order or worker count.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.optimize import minimize_scalar

PROB_TOL = 1e-12
ROW_SUM_TOL = 1e-10
MOMENT_C2 = 100.0
WINDOW_BISECT_FRACTION = 0.02


class SpecError(ValueError):
    """Invalid ensemble specification or parameters."""


class SymmetryClass(Enum):
    SYMMETRIC = 1
    HERMITIAN = 2

    @property
    def beta(self) -> int:
        return self.value

    @classmethod
    def parse(cls, value: Union[str, int, "SymmetryClass"]) -> "SymmetryClass":
        if isinstance(value, SymmetryClass):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower()
        aliases = {"symmetric": cls.SYMMETRIC, "goe": cls.SYMMETRIC, "real": cls.SYMMETRIC,
                   "1": cls.SYMMETRIC, "hermitian": cls.HERMITIAN, "gue": cls.HERMITIAN,
                   "complex": cls.HERMITIAN, "2": cls.HERMITIAN}
        if key not in aliases:
            raise SpecError(f"unknown symmetry class {value!r}")
        return aliases[key]


def _gaussian_moment(k: int) -> float:
    if k % 2:
        return 0.0
    return float(math.prod(range(k - 1, 0, -2))) if k else 1.0


@dataclass(frozen=True)
class EntryDistribution:
    """Standardized (mean 0, variance 1) real law for one matrix-entry component.

    ``kind`` is one of ``gaussian``, ``bernoulli``, ``discrete`` or
    ``convolved``. A convolved law is ``sqrt(1-gamma) * base + sqrt(gamma) * G``
    with ``G`` an independent standard Gaussian.
    """

    kind: str = "gaussian"
    support: tuple = ()
    probs: tuple = ()
    base: Optional["EntryDistribution"] = None
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "bernoulli", "discrete", "convolved"):
            raise SpecError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "discrete":
            p = np.asarray(self.probs, dtype=float)
            x = np.asarray(self.support, dtype=float)
            if p.shape != x.shape or p.size == 0:
                raise SpecError("discrete law needs matching support and probabilities")
            if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
                raise SpecError("probabilities must be nonnegative and sum to 1")
            if abs(self.moment(1)) > 1e-10 or abs(self.moment(2) - 1.0) > 1e-10:
                raise SpecError("discrete law must have mean 0 and variance 1")
        if self.kind == "convolved":
            if self.base is None:
                raise SpecError("convolved law needs a base distribution")
            if not 0.0 <= self.gamma <= 1.0:
                raise SpecError("convolution weight must lie in [0, 1]")

    @classmethod
    def gaussian(cls) -> "EntryDistribution":
        return cls("gaussian")

    @classmethod
    def bernoulli(cls) -> "EntryDistribution":
        return cls("bernoulli")

    @classmethod
    def discrete(cls, support: Sequence[float], probs: Sequence[float]) -> "EntryDistribution":
        return cls("discrete", tuple(float(s) for s in support), tuple(float(p) for p in probs))

    @classmethod
    def convolved(cls, base: "EntryDistribution", gamma: float) -> "EntryDistribution":
        return cls("convolved", base=base, gamma=float(gamma))

    def moment(self, k: int) -> float:
        """Exact k-th raw moment."""
        if self.kind == "gaussian":
            return _gaussian_moment(k)
        if self.kind == "bernoulli":
            return 0.0 if k % 2 else 1.0
        if self.kind == "discrete":
            x = np.asarray(self.support)
            return math.fsum(np.asarray(self.probs) * x**k)
        a, b = math.sqrt(1.0 - self.gamma), math.sqrt(self.gamma)
        return math.fsum(math.comb(k, j) * a**j * b ** (k - j) * self.base.moment(j)
                         * _gaussian_moment(k - j) for j in range(k + 1))

    def moments(self, upto: int = 4) -> np.ndarray:
        return np.array([self.moment(k) for k in range(1, upto + 1)])

    @property
    def is_gaussian(self) -> bool:
        if self.kind == "gaussian":
            return True
        return self.kind == "convolved" and self.gamma == 1.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "bernoulli":
            return 2.0 * rng.integers(0, 2, size=size) - 1.0
        if self.kind == "discrete":
            idx = rng.choice(len(self.support), size=size, p=np.asarray(self.probs))
            return np.asarray(self.support)[idx]
        base = self.base.sample(rng, size)
        return math.sqrt(1.0 - self.gamma) * base + math.sqrt(self.gamma) * rng.standard_normal(size)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "discrete":
            d.update(support=list(self.support), probs=list(self.probs))
        if self.kind == "convolved":
            d.update(base=self.base.to_dict(), gamma=self.gamma)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EntryDistribution":
        kind = d["kind"]
        if kind == "discrete":
            return cls.discrete(d["support"], d["probs"])
        if kind == "convolved":
            return cls.convolved(cls.from_dict(d["base"]), d["gamma"])
        return cls(kind)


@dataclass(frozen=True)
class VarianceProfile:
    """Matrix of entry variances ``sigma_ij^2``; ``sigma`` is None for the flat 1/N case."""

    kind: str
    N: int
    sigma: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    band_width: Optional[float] = None

    @property
    def spread(self) -> float:
        """M = 1 / max sigma_ij^2."""
        if self.sigma is None:
            return float(self.N)
        return 1.0 / float(self.sigma.max())

    def matrix(self) -> np.ndarray:
        if self.sigma is None:
            return np.full((self.N, self.N), 1.0 / self.N)
        return self.sigma

    def std(self) -> Union[float, np.ndarray]:
        if self.sigma is None:
            return 1.0 / math.sqrt(self.N)
        return np.sqrt(self.sigma)


def _periodic_distance(N: int) -> np.ndarray:
    d = np.subtract.outer(np.arange(N), np.arange(N)) % N
    return np.where(d > N // 2, d - N, d)


def build_variance_profile(kind: str, N: int, *, band_width: Optional[float] = None,
                           f: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                           sigma: Optional[np.ndarray] = None) -> VarianceProfile:
    """Build a doubly stochastic variance profile.

    ``band``: ``sigma_ij^2 ∝ f([i-j]_N / (2W))`` with ``f`` supported on
    ``[-1/2, 1/2]`` (default the indicator), so the band holds ``|[i-j]_N| <= W``.
    Rows are renormalized to sum to exactly one.
    ``explicit``: ``sigma`` is validated, not modified.
    """
    if N < 2:
        raise SpecError("matrix dimension must be at least 2")
    if kind == "flat":
        return VarianceProfile("flat", N)
    if kind == "band":
        if band_width is None or band_width <= 0:
            raise SpecError("band width must be positive")
        if band_width > N:
            raise SpecError("band width cannot exceed N")
        if f is None:
            def f(x):
                return (np.abs(x) <= 0.5).astype(float)
        d = _periodic_distance(N)
        vals = np.asarray(f(d / (2.0 * band_width)), dtype=float)
        if np.any(vals < 0):
            raise SpecError("band profile values must be nonnegative")
        rows = vals.sum(axis=1)
        if np.any(rows <= 0):
            raise SpecError("band profile vanishes on a whole row")
        s = vals / rows[:, None]
        # circulant, so per-row renormalization keeps the matrix symmetric
        s = 0.5 * (s + s.T)
        return VarianceProfile("band", N, s, band_width=float(band_width))
    if kind == "explicit":
        if sigma is None:
            raise SpecError("explicit profile needs a variance matrix")
        s = np.array(sigma, dtype=float)
        if s.shape != (N, N):
            raise SpecError("variance matrix shape does not match N")
        if np.any(s < 0):
            raise SpecError("variances must be nonnegative")
        if not np.array_equal(s, s.T):
            raise SpecError("variance matrix must be symmetric")
        if np.max(np.abs(s.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise SpecError("variance matrix rows must sum to 1")
        return VarianceProfile("explicit", N, s)
    raise SpecError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class EnsembleSpec:
    """Full recipe for one random-matrix ensemble.

    Diagonal entries are real with variance ``diagonal_factor * sigma_ii^2``;
    ``diagonal_factor=2`` with Gaussian entries gives the invariant GOE.
    """

    N: int
    symmetry: SymmetryClass = SymmetryClass.HERMITIAN
    dist: EntryDistribution = EntryDistribution()
    profile: Optional[VarianceProfile] = None
    diagonal_dist: Optional[EntryDistribution] = None
    diagonal_factor: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise SpecError("N must be positive")
        object.__setattr__(self, "symmetry", SymmetryClass.parse(self.symmetry))
        if self.profile is None and self.N >= 2:
            object.__setattr__(self, "profile", VarianceProfile("flat", self.N))
        if self.profile is not None and self.profile.N != self.N:
            raise SpecError("profile dimension differs from N")
        if self.diagonal_factor < 0:
            raise SpecError("diagonal variance factor must be nonnegative")

    @property
    def beta(self) -> int:
        return self.symmetry.beta

    @property
    def diag(self) -> EntryDistribution:
        return self.diagonal_dist if self.diagonal_dist is not None else self.dist

    @property
    def is_invariant_gaussian(self) -> bool:
        """Exactly GOE/GUE, so the tridiagonal spectral model applies."""
        return (self.dist.is_gaussian and self.diag.is_gaussian
                and (self.profile is None or self.profile.kind == "flat")
                and self.diagonal_factor == 2.0 / self.beta)

    @classmethod
    def gue(cls, N: int) -> "EnsembleSpec":
        return cls(N, SymmetryClass.HERMITIAN)

    @classmethod
    def goe(cls, N: int, invariant: bool = False) -> "EnsembleSpec":
        return cls(N, SymmetryClass.SYMMETRIC, diagonal_factor=2.0 if invariant else 1.0)

    @classmethod
    def wigner(cls, N: int, symmetry="hermitian", dist: Optional[EntryDistribution] = None,
               **kw) -> "EnsembleSpec":
        return cls(N, SymmetryClass.parse(symmetry), dist or EntryDistribution.gaussian(), **kw)

    def gaussian_twin(self) -> "EnsembleSpec":
        """Gaussian ensemble with the same size, symmetry and variance profile."""
        return replace(self, dist=EntryDistribution.gaussian(), diagonal_dist=None)

    def to_dict(self) -> dict:
        d = {"n": self.N, "symmetry": self.symmetry.name.lower(), "dist": self.dist.to_dict(),
             "profile": self.profile.kind if self.profile else "flat",
             "diagonal_factor": self.diagonal_factor}
        if self.profile is not None and self.profile.kind == "band":
            d["band_width"] = self.profile.band_width
        if self.profile is not None and self.profile.kind == "explicit":
            d["sigma"] = self.profile.sigma.tolist()
        if self.diagonal_dist is not None:
            d["diagonal_dist"] = self.diagonal_dist.to_dict()
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class MatrixSample:
    entries: np.ndarray
    seed: int
    spec: Optional[EnsembleSpec] = None

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.entries)


# -- random streams -----------------------------------------------------------

_MASK64 = (1 << 64) - 1


def mix_seed(base: int, index: int) -> int:
    """splitmix64 of ``base + golden * (index + 1)``; the per-sample seed mixer."""
    z = (int(base) + 0x9E3779B97F4A7C15 * (int(index) + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-style generator keyed by ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & _MASK64, *key])))


# -- sampling -----------------------------------------------------------------

def sample_matrix(spec: EnsembleSpec, seed: int) -> MatrixSample:
    """Draw one matrix; row ``i`` of the upper triangle comes from stream ``(seed, i)``."""
    N = spec.N
    herm = spec.symmetry is SymmetryClass.HERMITIAN
    H = np.zeros((N, N), dtype=complex if herm else float)
    for i in range(N):
        rng = stream(seed, i)
        H[i, i] = spec.diag.sample(rng, 1)[0] * math.sqrt(spec.diagonal_factor)
        m = N - i - 1
        if m:
            if herm:
                re = spec.dist.sample(rng, m)
                im = spec.dist.sample(rng, m)
                H[i, i + 1:] = (re + 1j * im) / math.sqrt(2.0)
            else:
                H[i, i + 1:] = spec.dist.sample(rng, m)
    H *= spec.profile.std() if spec.profile is not None else 1.0
    upper = np.triu(H, 1)
    H = np.diag(np.diag(H).real).astype(H.dtype) + upper + upper.conj().T
    return MatrixSample(H, int(seed), spec)


def tridiagonal_model(spec: EnsembleSpec, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the beta-Hermite tridiagonal model, scaled by 1/sqrt(N)."""
    N, beta = spec.N, spec.beta
    rng = stream(seed, 0xD1A6)
    d = rng.standard_normal(N) * math.sqrt(2.0)
    e = np.sqrt(rng.chisquare(beta * np.arange(N - 1, 0, -1)))
    scale = 1.0 / math.sqrt(beta * N)
    return d * scale, e * scale


def sample_spectrum(spec: EnsembleSpec, seed: int,
                    window: Optional[tuple] = None) -> np.ndarray:
    """Ascending eigenvalues of one sample.

    Invariant Gaussian specs use the exact tridiagonal model with chi-distributed
    off-diagonals (O(N) work, optionally restricted to ``window``). Other specs
    fall back to a dense matrix.
    """
    if not spec.is_invariant_gaussian:
        ev = np.linalg.eigvalsh(sample_matrix(spec, seed).entries)
        if window is not None:
            ev = ev[(ev >= window[0]) & (ev <= window[1])]
        return ev
    N = spec.N
    d, e = tridiagonal_model(spec, seed)
    if N == 1:
        ev = d.copy()
    elif window is None or _semicircle_fraction(*window) > WINDOW_BISECT_FRACTION:
        ev = eigvalsh_tridiagonal(d, e)
        if window is not None:
            ev = ev[(ev >= window[0]) & (ev <= window[1])]
    else:
        # bisection only pays off when the window holds few eigenvalues
        ev = eigvalsh_tridiagonal(d, e, select="v", select_range=window)
    return np.sort(ev)


def _semicircle_fraction(a: float, b: float) -> float:
    def n(x):
        x = min(max(x, -2.0), 2.0)
        return 0.5 + x * math.sqrt(4.0 - x * x) / (4.0 * math.pi) + math.asin(x / 2.0) / math.pi
    return n(b) - n(a)


def sample_covariance_matrix(M: int, N: int, dist: Optional[EntryDistribution] = None,
                             seed: int = 0, complex_entries: bool = False) -> MatrixSample:
    """``H = X* X`` with ``X`` an ``M x N`` array of i.i.d. entries of variance ``1/M``."""
    if M < 1 or N < 1:
        raise SpecError("covariance dimensions must be positive")
    dist = dist or EntryDistribution.gaussian()
    rng = stream(seed, 0xC0F)
    X = dist.sample(rng, (M, N))
    if complex_entries:
        X = (X + 1j * dist.sample(rng, (M, N))) / math.sqrt(2.0)
    X = X / math.sqrt(M)
    H = X.conj().T @ X
    H = 0.5 * (H + H.conj().T)
    return MatrixSample(H, int(seed), None)


def gaussian_convolve_matrix(base: MatrixSample, t: float, seed: int,
                             spec: Optional[EnsembleSpec] = None) -> MatrixSample:
    """``e^{-t/2} H + (1 - e^{-t})^{1/2} V`` with ``V`` an independent Gaussian ensemble.

    ``t = inf`` returns ``V`` itself. ``V`` shares symmetry, variance profile and
    diagonal convention with ``spec`` (default: the base sample's spec).
    """
    if t < 0 or math.isnan(t):
        raise SpecError("convolution time must be nonnegative")
    if t == 0:
        return base
    spec = spec or base.spec
    if spec is None:
        herm = base.is_complex
        spec = EnsembleSpec(base.N, SymmetryClass.HERMITIAN if herm else SymmetryClass.SYMMETRIC)
    V = sample_matrix(spec.gaussian_twin(), mix_seed(seed, 0x0F)).entries
    if math.isinf(t):
        return MatrixSample(V, int(seed), spec.gaussian_twin())
    a = math.exp(-t / 2.0)
    b = math.sqrt(-math.expm1(-t))
    H = a * base.entries + b * V
    return MatrixSample(H, int(seed), spec)


# -- four-moment matching -------------------------------------------------------

def _three_point(t: float, m3: float, m4: float) -> tuple[np.ndarray, np.ndarray]:
    """Three-atom law with moments (0, 1, m3, m4) and one atom prescribed at ``t``.

    The node polynomial ``(x - t)(x^2 + u x + v)`` must be orthogonal to 1 and x,
    which needs only m0..m4; the weights are then positive whenever
    ``m4 - m3^2 - 1 > 0`` (a Radau-type quadrature).
    """
    A = np.array([[1.0, -t], [m3 - t, 1.0]])
    u, v = np.linalg.solve(A, np.array([t - m3, t * m3 - m4]))
    r = math.sqrt(max(u * u - 4.0 * v, 0.0))
    x = np.sort(np.array([t, (-u - r) / 2.0, (-u + r) / 2.0]))
    w = np.linalg.solve(np.vander(x, 3, increasing=True).T, np.array([1.0, 0.0, 1.0]))
    return x, w


def _two_point(m3: float) -> tuple[np.ndarray, np.ndarray]:
    disc = math.sqrt(m3 * m3 + 4.0)
    x = np.array([(m3 - disc) / 2.0, (m3 + disc) / 2.0])
    w = np.array([x[1] / (x[1] - x[0]), -x[0] / (x[1] - x[0])])
    return x, w


def standardized_three_point(m3: float, m4: float) -> EntryDistribution:
    """Finitely supported law with moments (0, 1, m3, m4), smallest support diameter."""
    excess = m4 - m3 * m3 - 1.0
    if excess < -1e-12:
        raise SpecError("moments violate m4 - m3^2 - 1 >= 0")
    if excess <= 1e-12:
        x, w = _two_point(m3)
        return EntryDistribution.discrete(x, w)

    def diameter(t):
        # t on the two-point nodes makes the system singular
        if abs(1.0 + t * (m3 - t)) < 1e-10:
            return math.inf
        x, _ = _three_point(t, m3, m4)
        return x[-1] - x[0]

    # the prescribed atom is the free parameter of the family; coarse scan, then refine
    span = 4.0 * (abs(m3) + math.sqrt(m4) + 1.0)
    ts = np.linspace(-span, span, 2001) + 1e-7 * span
    i = int(np.argmin([diameter(t) for t in ts]))
    res = minimize_scalar(diameter, bounds=(ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    t = res.x if res.fun <= diameter(ts[i]) else ts[i]
    x, w = _three_point(t, m3, m4)
    if np.any(w < 0):
        raise SpecError("no valid three-point law for these moments")
    dist = EntryDistribution.discrete(x, w / w.sum())
    got = dist.moments(4)
    if abs(got[2] - m3) > 1e-12 * max(1.0, abs(m3)) or abs(got[3] - m4) > 1e-12 * max(1.0, m4):
        raise SpecError("three-point construction lost precision")
    return dist


def match_four_moments(m3: float, m4: float, gamma: float) -> EntryDistribution:
    """Gaussian-convolved law with moments (0, 1, m3, m4') and ``|m4' - m4| <= C gamma``.

    The discrete part has third moment ``(1-gamma)^{-3/2} m3`` and fourth moment
    ``m3_gamma^2 + (m4 - m3^2)``; convolving with weight ``gamma`` restores ``m3``.
    """
    if m4 - m3 * m3 - 1.0 < -1e-12:
        raise SpecError("moments violate m4 - m3^2 - 1 >= 0")
    if m4 > MOMENT_C2:
        raise SpecError(f"fourth moment exceeds the bound {MOMENT_C2}")
    if not 0.0 <= gamma < 1.0:
        raise SpecError("gamma must lie in [0, 1)")
    m3g = (1.0 - gamma) ** -1.5 * m3
    m4g = m3g * m3g + (m4 - m3 * m3)
    xi = standardized_three_point(m3g, m4g)
    return EntryDistribution.convolved(xi, gamma)


# -- config and binary I/O -------------------------------------------------------

def spec_from_mapping(cfg: dict) -> EnsembleSpec:
    """Build a spec from flat keys: n, symmetry, dist, profile, band_width, gamma, m3, m4."""
    try:
        N = int(cfg["n"])
    except (KeyError, ValueError) as exc:
        raise SpecError("config key 'n' missing or not an integer") from exc
    sym = SymmetryClass.parse(cfg.get("symmetry", "hermitian"))
    kind = str(cfg.get("dist", "gaussian")).lower()
    if isinstance(cfg.get("dist"), dict):
        dist = EntryDistribution.from_dict(cfg["dist"])
    elif kind in ("gaussian", "bernoulli"):
        dist = EntryDistribution(kind)
        if float(cfg.get("gamma", 0.0)) > 0:
            dist = EntryDistribution.convolved(dist, float(cfg["gamma"]))
    elif kind in ("matched", "moments"):
        dist = match_four_moments(float(cfg.get("m3", 0.0)), float(cfg.get("m4", 3.0)),
                                  float(cfg.get("gamma", 0.0)))
    else:
        raise SpecError(f"unknown dist {kind!r}")
    pkind = str(cfg.get("profile", "flat")).lower()
    if pkind == "band":
        profile = build_variance_profile("band", N, band_width=float(cfg.get("band_width", 0)))
    elif pkind == "explicit":
        profile = build_variance_profile("explicit", N, sigma=np.asarray(cfg["sigma"]))
    else:
        profile = build_variance_profile(pkind, N) if N >= 2 else None
    diag = cfg.get("diagonal_dist")
    if isinstance(diag, dict):
        diag = EntryDistribution.from_dict(diag)
    elif isinstance(diag, str):
        diag = EntryDistribution(diag)
    return EnsembleSpec(N, sym, dist, profile, diag, float(cfg.get("diagonal_factor", 1.0)))


_MAGIC = b"RMTL"


def write_matrix(path: Union[str, Path], sample: MatrixSample) -> None:
    """Flat binary: magic, rows, cols (uint64), symmetry tag (uint8), row-major payload."""
    H = np.ascontiguousarray(sample.entries)
    tag = 2 if np.iscomplexobj(H) else 1
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<QQB", H.shape[0], H.shape[1], tag))
        fh.write(H.astype("<c16" if tag == 2 else "<f8").tobytes())


def read_matrix(path: Union[str, Path]) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(4 + 17)
        if head[:4] != _MAGIC:
            raise SpecError("not an rmtlab matrix file")
        rows, cols, tag = struct.unpack("<QQB", head[4:])
        dtype = "<c16" if tag == 2 else "<f8"
        data = np.frombuffer(fh.read(), dtype=dtype)
    return data.reshape(rows, cols)
