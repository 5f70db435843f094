"""Airy function, Airy kernel and variances of exponential linear statistics.

``Ai`` is evaluated by three routes chosen by the argument:

* ``-8 <= x <= 2``: Maclaurin series of the two standard solutions, summed
  in extended precision;
* ``x > 2``: the shifted-contour integral
  ``Ai(x) = exp(-zeta)/pi * int_0^inf cos(s^3/3) exp(-sqrt(x) s^2) ds``
  with ``zeta = 2 x^(3/2) / 3``, which keeps full relative accuracy where the
  series cancels catastrophically;
* ``x < -8``: the oscillatory asymptotic expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InputError, NumericError, RangeError

__all__ = [
    "AiryEval",
    "airy_ai",
    "airy_pair",
    "airy_kernel",
    "airy_laplace",
    "laplace_quadrature",
    "erf",
    "erfc",
    "variance_e1",
    "variance_e2",
    "variance_closed_form",
    "variance_quadrature",
    "projection_integral",
    "AIRY_LIMIT",
]

AIRY_LIMIT = 200.0
SERIES_LO, SERIES_HI = -8.0, 2.0
DIAG_DELTA = 1e-4

_AI0 = np.longdouble("0.355028053887817239260063186004183176397979174199")
_AIP0 = np.longdouble("-0.258819403792806798405183560189203963479091138354")
_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class AiryEval:
    x: Union[float, np.ndarray]
    ai: Union[float, np.ndarray]
    ai_prime: Union[float, np.ndarray]


def _series(x: np.ndarray):
    x = x.astype(np.longdouble)
    x3 = x**3
    a = np.ones_like(x)
    f = a.copy()
    q = np.ones_like(x)
    gs = q.copy()
    gp = q.copy()
    r = np.full_like(x, np.longdouble(1) / 6)
    fp = 3 * r
    for k in range(1, 60):
        a = a * x3 / ((3 * k - 1) * (3 * k))
        q = q * x3 / ((3 * k) * (3 * k + 1))
        f += a
        gs += q
        gp += (3 * k + 1) * q
        if k >= 2:
            r = r * x3 / ((3 * k - 1) * (3 * k))
            fp += 3 * k * r
        if k > 8 and np.all(np.abs(a) + np.abs(q) < 1e-22 * (np.abs(f) + np.abs(gs))):
            break
    g = x * gs
    fp = x * x * fp
    ai = _AI0 * f + _AIP0 * g
    aip = _AI0 * fp + _AIP0 * gp
    return ai.astype(float), aip.astype(float)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_PANELS = 16
_edges = np.linspace(0.0, 1.0, _PANELS + 1)
_U = ((_edges[:-1, None] + _edges[1:, None]) / 2 + np.diff(_edges)[:, None] / 2 * _GL_X[None, :]).ravel()
_UW = (np.diff(_edges)[:, None] / 2 * _GL_W[None, :]).ravel()


def _contour(x: np.ndarray):
    sx = np.sqrt(x)
    T = np.sqrt(46.0 / sx)
    s = T[:, None] * _U[None, :]
    w = T[:, None] * _UW[None, :]
    e = np.exp(-sx[:, None] * s * s) * np.cos(s**3 / 3.0)
    I = (w * e).sum(axis=1)
    J = (w * s * s * e).sum(axis=1)
    pre = np.exp(-2.0 / 3.0 * x * sx) / math.pi
    return pre * I, pre * (-sx * I - J / (2.0 * sx))


def _asymptotic_coefficients(K: int = 30):
    u = np.empty(K)
    u[0] = 1.0
    for k in range(1, K):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
    v = -(6 * np.arange(K) + 1) / (6 * np.arange(K) - 1) * u
    v[0] = 1.0
    return u, v


_U_ASY, _V_ASY = _asymptotic_coefficients()


def _oscillatory(x: np.ndarray):
    z = -x
    zeta = 2.0 / 3.0 * z * np.sqrt(z)
    k = np.arange(_U_ASY.size)
    sign = np.where((k // 2) % 2 == 0, 1.0, -1.0)
    pw = sign[None, :] / zeta[:, None] ** k[None, :]
    ue = (pw * _U_ASY)[:, 0::2].sum(axis=1)
    uo = (pw * _U_ASY)[:, 1::2].sum(axis=1)
    ve = (pw * _V_ASY)[:, 0::2].sum(axis=1)
    vo = (pw * _V_ASY)[:, 1::2].sum(axis=1)
    th = zeta - math.pi / 4.0
    c, s = np.cos(th), np.sin(th)
    z4 = z**0.25
    return (c * ue + s * uo) / (_SQRT_PI * z4), z4 / _SQRT_PI * (s * ve - c * vo)


def airy_pair(x, limit: float = AIRY_LIMIT) -> tuple[np.ndarray, np.ndarray]:
    """``(Ai(x), Ai'(x))`` as float arrays of the broadcast shape of ``x``.

    Arguments beyond ``limit`` in absolute value raise :class:`RangeError`.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > limit) or np.any(np.isnan(x)):
        raise RangeError(f"Airy evaluation limited to |x| <= {limit:g}")
    flat = x.ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    mid = (flat >= SERIES_LO) & (flat <= SERIES_HI)
    pos = flat > SERIES_HI
    neg = flat < SERIES_LO
    if mid.any():
        ai[mid], aip[mid] = _series(flat[mid])
    if pos.any():
        with np.errstate(under="ignore"):
            ai[pos], aip[pos] = _contour(flat[pos])
    if neg.any():
        ai[neg], aip[neg] = _oscillatory(flat[neg])
    return ai.reshape(x.shape), aip.reshape(x.shape)


def airy_ai(x) -> AiryEval:
    """Airy function and derivative for ``|x| <= 200``."""
    ai, aip = airy_pair(x)
    if np.ndim(x) == 0:
        return AiryEval(float(x), float(ai), float(aip))
    return AiryEval(np.asarray(x, dtype=float), ai, aip)


def _kernel_from(x, y, ax, px, ay, py):
    d = x - y
    near = np.abs(d) < DIAG_DELTA
    with np.errstate(divide="ignore", invalid="ignore"):
        off = (ax * py - ay * px) / d
    if np.any(near):
        m = 0.5 * (x + y)
        s = 0.5 * d
        am, pm = airy_pair(np.where(near, m, 0.0))
        k0 = pm * pm - m * am * am
        k2 = am * pm / 3.0 + 2.0 / 3.0 * m * pm * pm - 2.0 / 3.0 * m * m * am * am
        off = np.where(near, k0 + s * s * k2, off)
    return off


def airy_kernel(x, y):
    """Airy kernel ``(Ai(x)Ai'(y) - Ai(y)Ai'(x)) / (x - y)``.

    Within ``|x - y| < 1e-4`` a second-order expansion about the midpoint is
    used instead of the difference quotient.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    ax, px = airy_pair(x)
    ay, py = airy_pair(y)
    out = _kernel_from(x, y, ax, px, ay, py)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------


def airy_laplace(t: float, u: float = 0.0, v: float = 0.0) -> float:
    """Closed form of ``int exp(t x) Ai(x + u) Ai(x + v) dx``."""
    if not t > 0:
        raise InputError("airy_laplace needs t > 0")
    return math.exp(t**3 / 12.0 - (u + v) * t / 2.0 - (u - v) ** 2 / (4.0 * t)) / (2.0 * math.sqrt(math.pi * t))


def _erf_series(z: float) -> float:
    # erf z = 2/sqrt(pi) exp(-z^2) sum_n 2^n z^(2n+1) / (2n+1)!!
    term = z
    total = z
    n = 0
    z2 = z * z
    while abs(term) > 1e-17 * abs(total):
        n += 1
        term *= 2.0 * z2 / (2 * n + 1)
        total += term
    return 2.0 / _SQRT_PI * math.exp(-z2) * total


def _erfc_cf(z: float) -> float:
    # erfc z = exp(-z^2)/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))), modified Lentz
    tiny = 1e-300
    f = z
    C = z
    D = 0.0
    for n in range(1, 500):
        a = n / 2.0
        D = z + a * D
        D = 1.0 / (D if D != 0 else tiny)
        C = z + a / (C if C != 0 else tiny)
        delta = C * D
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-z * z) / (_SQRT_PI * f)


def erf(z: float) -> float:
    """Error function, accurate to about 1e-15."""
    z = float(z)
    if z < 0:
        return -erf(-z)
    if z < 2.5:
        return _erf_series(z)
    return 1.0 - _erfc_cf(z)


def erfc(z: float) -> float:
    z = float(z)
    if z < 0:
        return 2.0 - erfc(-z)
    if z < 1.0:  # 1 - erf loses relative accuracy beyond this
        return 1.0 - _erf_series(z)
    return _erfc_cf(z)


def _check_t(t):
    if not t > 0:
        raise InputError("t must be positive")


def variance_e1(t: float) -> float:
    """``int exp(2 t x) K(x, x) dx``."""
    _check_t(t)
    return math.exp(2.0 * t**3 / 3.0) / (4.0 * math.sqrt(2.0 * math.pi) * t**1.5)


def variance_e2(t: float) -> float:
    """``iint exp(t (x + y)) K(x, y)^2 dx dy``."""
    return variance_e1(t) * erfc(t**1.5 / math.sqrt(2.0))


def variance_closed_form(t: float) -> float:
    """Variance of ``sum_k exp(t a_k)`` over the Airy point process."""
    return variance_e1(t) * erf(t**1.5 / math.sqrt(2.0))


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------


def _panel_nodes(a: float, b: float, width: float, order: int):
    n = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, n + 1)
    gx, gw = np.polynomial.legendre.leggauss(order)
    half = np.diff(edges)[:, None] / 2.0
    x = ((edges[:-1, None] + edges[1:, None]) / 2.0 + half * gx[None, :]).ravel()
    w = (half * gw[None, :]).ravel()
    return x, w


def _upper_cut(t: float, shift: float = 0.0, tol: float = 1e-18) -> float:
    # smallest x with exp(2 t x - (4/3) (x + shift)^(3/2)) below tol, past the peak
    x = max(4.0 * t * t - shift, 1.0)
    while 2.0 * t * x - 4.0 / 3.0 * max(x + shift, 0.0) ** 1.5 > math.log(tol):
        x += 0.5
    return x


def laplace_quadrature(t: float, u: float = 0.0, v: float = 0.0, tol: float = 1e-15) -> float:
    """Gauss-Legendre quadrature of ``int exp(t x) Ai(x + u) Ai(x + v) dx``."""
    _check_t(t)
    lo = math.log(tol) / t - 10.0
    lo = max(lo, -AIRY_LIMIT + max(abs(u), abs(v)))
    hi = _upper_cut(t / 2.0, min(u, v))
    x, w = _panel_nodes(lo, hi, 0.5, 24)
    a, _ = airy_pair(x + u)
    b, _ = airy_pair(x + v) if v != u else (a, None)
    return float(np.sum(w * np.exp(t * x) * a * b))


def _lower_cut(t: float, tol: float) -> float:
    # tails below L: diagonal term ~ e^{2tL} sqrt|L| / (2 pi t),
    # off-diagonal leakage ~ e^{tL} |L|^{-5/2} / t
    L = -5.0
    while max(math.exp(2 * t * L) * math.sqrt(-L) / (2 * math.pi * t), math.exp(t * L) * (-L) ** -2.5 / t) > tol:
        L -= 1.0
    return max(L, -AIRY_LIMIT)


def _variance_on(t: float, lo: float, hi: float, width: float, order: int, block: int = 256) -> float:
    x, w = _panel_nodes(lo, hi, width, order)
    a, p = airy_pair(x)
    diag = p * p - x * a * a
    we = w * np.exp(t * x)
    first = float(np.sum(we * we / w * diag))
    second = 0.0
    # K^2 is symmetric: visit the upper block triangle only
    for i in range(0, x.size, block):
        j = slice(i, None)
        n = min(block, x.size - i)
        K = _kernel_from(x[i : i + n, None], x[None, j], a[i : i + n, None], p[i : i + n, None], a[None, j], p[None, j])
        M = K * K
        wi = we[i : i + n]
        second += float(wi @ M[:, :n] @ wi) + 2.0 * float(wi @ M[:, n:] @ we[i + n :])
    return first - second


def variance_quadrature(t: float, rtol: float = 1e-8) -> float:
    """Quadrature of ``1/2 iint (e^{tx} - e^{ty})^2 K(x, y)^2 dx dy``.

    Evaluated in the equivalent form ``int e^{2tx} K(x,x) dx - iint
    e^{t(x+y)} K(x,y)^2 dx dy`` whose integrands decay exponentially.  The
    lower cut comes from the ``e^{tx}`` decay and the upper one from the
    decay of Ai.  A refined evaluation (longer range, finer panels) must agree
    to ``rtol``, otherwise :class:`NumericError` is raised.
    """
    if not 0.1 <= t <= 3.0:
        raise InputError("variance_quadrature supports t in [0.1, 3]")
    scale = variance_e1(t)
    hi = _upper_cut(t)
    lo = _lower_cut(t, 1e-11 * scale)
    coarse = _variance_on(t, lo, hi, 1.0, 16)
    fine = _variance_on(t, _lower_cut(t, 1e-13 * scale), hi + 2.0, 1.0, 24)
    err = abs(fine - coarse)
    if err > rtol * abs(fine):
        raise NumericError(f"Airy variance quadrature did not converge: achieved {err / abs(fine):.2e} relative")
    return fine


def projection_integral(x: float, lower: float = -1000.0, width: float = 0.05) -> float:
    """``int K(x, y)^2 dy``; equals ``K(x, x)`` for a projection kernel.

    The range below ``lower`` is added from the averaged oscillatory
    asymptotics of Ai at large negative argument.
    """
    x = float(x)
    hi = max(x, 0.0) + 20.0
    y, w = _panel_nodes(lower, hi, width, 16)
    ax, px = airy_pair(np.array(x))
    ay, py = airy_pair(y, limit=math.inf)
    K = _kernel_from(np.full_like(y, x), y, ax, px, ay, py)
    body = float(np.sum(w * K * K))
    # tail: mean of Ai(-z)^2 ~ 1/(2 pi sqrt z), Ai'(-z)^2 ~ sqrt(z)/(2 pi)
    L = -lower
    z, wz = _panel_nodes(0.0, 1.0, 0.05, 16)
    # substitute z = L / s^2, s in (0, 1]
    s = z
    zz = L / (s * s)
    jac = 2.0 * L / s**3
    f = (float(ax) ** 2 * np.sqrt(zz) + float(px) ** 2 / np.sqrt(zz)) / (2.0 * math.pi * (x + zz) ** 2)
    tail = float(np.sum(wz * f * jac))
    return body + tail
