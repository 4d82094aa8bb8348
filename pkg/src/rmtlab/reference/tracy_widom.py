"""Tracy-Widom F_2 by two independent routes: Airy Fredholm determinant and Painleve II."""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp

from .airy import airy_pair
from .curves import OracleError, QuadratureRule, ReferenceCurve, cached_curve

S_MIN, S_MAX = -8.0, 6.0
PAINLEVE_START = 6.0


def _check_s(s):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < S_MIN - 1e-12) or np.any(s > S_MAX + 1e-12):
        raise OracleError(f"Tracy-Widom oracle supported on [{S_MIN}, {S_MAX}]")
    return s


def _airy_operator(s: float, m: int, scale: float = 10.0) -> np.ndarray:
    """Symmetrized Nystrom matrix of the Airy kernel on (s, inf) via x = s + c tan(pi u / 2)."""
    q = QuadratureRule.gauss_legendre(m, 0.0, 1.0)
    t = 0.5 * math.pi * q.nodes
    x = s + scale * np.tan(t)
    w = q.weights * scale * 0.5 * math.pi / np.cos(t) ** 2
    sw = np.sqrt(w)
    with np.errstate(under="ignore"):
        # Ai, Ai' once per node; the kernel matrix is built from outer products
        a, ap = airy_pair(x)
        d = x[:, None] - x[None, :]
        np.fill_diagonal(d, 1.0)
        K = (np.outer(a, ap) - np.outer(ap, a)) / d
        np.fill_diagonal(K, ap * ap - x * a * a)
    return sw[:, None] * K * sw[None, :]


def tw2_log_fredholm(s: float, m: int = 80) -> float:
    """log F_2(s) = sum log(1 - mu_i) over eigenvalues of the discretized Airy operator."""
    mu = np.linalg.eigvalsh(_airy_operator(s, m))
    if np.any(mu >= 1.0):
        raise OracleError(f"Airy operator eigenvalue >= 1 at s={s}; Nystrom failed")
    return float(np.sum(np.log1p(-mu)))


def tracy_widom_cdf(s, beta: int = 2, m: int = 80):
    """F_2(s) = det(1 - A) on L^2(s, inf), s in [-8, 6]."""
    if beta != 2:
        raise OracleError("only beta = 2 has an exact oracle")
    s = _check_s(s)
    out = np.array([math.exp(tw2_log_fredholm(v, m)) for v in s])
    return out if out.size > 1 else float(out[0])


def tracy_widom_tail(s: float, m: int = 80) -> float:
    """1 - F_2(s) without cancellation."""
    return -math.expm1(tw2_log_fredholm(float(_check_s(s)[0]), m))


def tail_asymptotic(s):
    """Leading right-tail law e^{-(4/3)s^{3/2}} / (16 pi s^{3/2})."""
    s = np.asarray(s, dtype=float)
    return (np.exp(-4.0 / 3.0 * s**1.5) / (16.0 * math.pi * s**1.5))[()]


def _painleve_start(s0: float):
    ai, aip = airy_pair(s0)
    q = QuadratureRule.gauss_legendre(80, s0, s0 + 25.0)
    a2 = airy_pair(q.nodes)[0] ** 2
    I = float(np.sum(q.weights * (q.nodes - s0) * a2))
    Ip = -float(np.sum(q.weights * a2))
    return np.array([ai, aip, I, Ip])


def tracy_widom_painleve(s, s0: float = PAINLEVE_START, rtol: float = 1e-13):
    """F_2 via q'' = s q + 2 q^3 integrated backward from q(s0) = Ai(s0).

    ``F(s) = exp(-I(s))`` with ``I'' = q^2``, ``I(s) = int_s^inf (x - s) q(x)^2 dx``.
    """
    s = _check_s(s)

    def rhs(x, y):
        q, qp, _, Ip = y
        return [qp, x * q + 2.0 * q**3, Ip, q * q]

    order = np.sort(np.unique(s))[::-1]
    sol = solve_ivp(rhs, (s0, min(order.min(), s0)), _painleve_start(s0), method="DOP853",
                    t_eval=order[order <= s0], rtol=rtol, atol=1e-300, dense_output=True)
    if not sol.success:
        raise OracleError(f"Painleve integration failed: {sol.message}")
    I = sol.sol(np.minimum(s, s0))[2]
    # points right of s0 are evaluated from the Airy tail directly
    right = s > s0
    if np.any(right):
        I[right] = [_painleve_start(v)[2] for v in s[right]]
    out = np.exp(-I)
    return out if out.size > 1 else float(out[0])


def tracy_widom_curve(lo: float = S_MIN, hi: float = S_MAX, step: float = 0.02,
                      m: int = 80) -> ReferenceCurve:
    grid = np.round(np.arange(lo, hi + step / 2, step), 12)

    def build():
        return ReferenceCurve(grid, np.asarray(tracy_widom_cdf(grid, 2, m)), "tw2-cdf", {"order": m})

    return cached_curve("tw2-cdf", grid, m, build)
