from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule mapped to [a, b]."""

    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float

    @classmethod
    def gauss_legendre(cls, m: int, a: float = -1.0, b: float = 1.0) -> "QuadratureRule":
        x, w = np.polynomial.legendre.leggauss(m)
        half = 0.5 * (b - a)
        return cls(half * x + 0.5 * (a + b), half * w, a, b)

    @property
    def order(self) -> int:
        return self.nodes.size

    def integrate(self, f: Callable) -> float:
        return float(np.sum(self.weights * f(self.nodes)))


@dataclass(frozen=True, eq=False)
class ReferenceCurve:
    grid: np.ndarray
    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.grid) <= 0):
            raise OracleError("reference grid must be strictly ascending")

    def __call__(self, x):
        """Linear interpolation; raises outside the grid."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.grid[0] - 1e-12) or np.any(x > self.grid[-1] + 1e-12):
            raise OracleError(f"{self.kind} curve evaluated outside [{self.grid[0]}, {self.grid[-1]}]")
        return np.interp(x, self.grid, self.values)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.grid, self.values]), delimiter=",",
                   header=f"schema: rmtlab.oracle/1 kind={self.kind}\nx,value", comments="# ")


def cache_dir() -> Optional[Path]:
    root = os.environ.get("RMTLAB_CACHE")
    return Path(root) if root else None


def cached_curve(kind: str, grid: np.ndarray, order: int,
                 build: Callable[[], ReferenceCurve]) -> ReferenceCurve:
    """Disk cache keyed by (kind, grid hash, quadrature order) under $RMTLAB_CACHE."""
    root = cache_dir()
    if root is None:
        return build()
    key = hashlib.sha256(np.ascontiguousarray(grid, dtype=float).tobytes()).hexdigest()[:16]
    path = root / f"{kind}-{key}-m{order}.npz"
    if path.exists():
        with np.load(path) as data:
            return ReferenceCurve(data["grid"], data["values"], kind, {"order": order, "cached": True})
    curve = build()
    root.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, grid=curve.grid, values=curve.values)
    os.replace(tmp, path)
    return curve
