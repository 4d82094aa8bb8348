"""Airy function Ai and its derivative from series and asymptotic expansions."""
from __future__ import annotations

import math

import numpy as np

from .curves import OracleError

AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)

# Maclaurin series on [NEG_SWITCH, POS_SWITCH], asymptotic expansions outside.
# Switch points chosen where series and asymptotic errors cross (~1e-12 absolute).
POS_SWITCH = 5.5
NEG_SWITCH = -7.0
SUPPORTED = 15.0

_N_SERIES = 70
_N_ASYM = 40


def _asym_coeffs(n: int):
    k = np.arange(n)
    logu = np.array([math.lgamma(3 * i + 0.5) - i * math.log(54.0) - math.lgamma(i + 1)
                     - math.lgamma(i + 0.5) for i in k])
    u = np.exp(logu)
    v = -(6 * k + 1) / (6 * k - 1) * u
    return u, v


_U, _V = _asym_coeffs(_N_ASYM)


def _series(x: np.ndarray):
    x3 = x**3
    f = np.ones_like(x)
    g = x.copy()
    fp = x * x / 2.0
    gp = np.ones_like(x)
    t, u, w, v = f.copy(), g.copy(), fp.copy(), gp.copy()
    for k in range(1, _N_SERIES):
        t = t * x3 / ((3 * k - 1) * (3 * k))
        u = u * x3 / ((3 * k) * (3 * k + 1))
        w = w * x3 / ((3 * k) * (3 * k + 2))
        v = v * x3 / ((3 * k) * (3 * k - 2))
        f += t
        g += u
        fp += w
        gp += v
    return AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp


def _truncated(coeffs, signs, inv):
    """Sum of an asymptotic series, stopped at its smallest term."""
    total = np.zeros_like(inv)
    prev = np.full_like(inv, np.inf)
    active = np.ones(inv.shape, dtype=bool)
    power = np.ones_like(inv)
    for c, s in zip(coeffs, signs):
        term = s * c * power
        mag = np.abs(term)
        active &= mag < prev
        total += np.where(active, term, 0.0)
        prev = np.where(active, mag, prev)
        power = power * inv
    return total


def _asym_pos(x: np.ndarray):
    zeta = 2.0 / 3.0 * x**1.5
    inv = 1.0 / zeta
    signs = (-1.0) ** np.arange(_N_ASYM)
    su = _truncated(_U, signs, inv)
    sv = _truncated(_V, signs, inv)
    pref = np.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    return pref * x**-0.25 * su, -pref * x**0.25 * sv


def _asym_neg(x: np.ndarray):
    y = -x
    zeta = 2.0 / 3.0 * y**1.5
    inv2 = zeta**-2
    alt = (-1.0) ** np.arange(_N_ASYM // 2)
    ue, uo = _U[0::2], _U[1::2]
    ve, vo = _V[0::2], _V[1::2]
    P = _truncated(ue, alt, inv2)
    Q = _truncated(uo, alt, inv2) / zeta
    R = _truncated(ve, alt, inv2)
    S = _truncated(vo, alt, inv2) / zeta
    ph = zeta - math.pi / 4.0
    c, s = np.cos(ph), np.sin(ph)
    ai = (c * P + s * Q) / (math.sqrt(math.pi) * y**0.25)
    aip = y**0.25 * (s * R - c * S) / math.sqrt(math.pi)
    return ai, aip


def airy_pair(x, check_range: bool = False):
    """(Ai(x), Ai'(x)) elementwise."""
    x = np.asarray(x, dtype=float)
    if check_range and np.any(np.abs(x) > SUPPORTED):
        raise OracleError(f"Airy evaluation supported on [-{SUPPORTED}, {SUPPORTED}]")
    flat = np.atleast_1d(x).ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    mid = (flat >= NEG_SWITCH) & (flat <= POS_SWITCH)
    pos = flat > POS_SWITCH
    neg = flat < NEG_SWITCH
    if mid.any():
        ai[mid], aip[mid] = _series(flat[mid])
    if pos.any():
        with np.errstate(under="ignore"):
            ai[pos], aip[pos] = _asym_pos(flat[pos])
    if neg.any():
        ai[neg], aip[neg] = _asym_neg(flat[neg])
    return ai.reshape(x.shape)[()], aip.reshape(x.shape)[()]


def airy_function(x):
    """Ai(x) on [-15, 15]."""
    return airy_pair(x, check_range=True)[0]


def airy_derivative(x):
    return airy_pair(x, check_range=True)[1]


def airy_kernel(x, y, diag_tol: float = 1e-6):
    """(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y), with the diagonal limit Ai'^2 - x Ai^2."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    ax, apx = airy_pair(x)
    ay, apy = airy_pair(y)
    d = x - y
    near = np.abs(d) < diag_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        off = (ax * apy - apx * ay) / d
    # symmetric midpoint diagonal keeps A(x, y) = A(y, x) exactly
    mid = 0.5 * (x + y)
    am, apm = airy_pair(mid)
    diag = apm * apm - mid * am * am
    return np.where(near, diag, off)[()]
