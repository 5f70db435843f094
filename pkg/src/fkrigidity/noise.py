"""Stationary Gaussian noise covariances and their semi-inner-products.

A covariance ``gamma`` acts on compactly supported step functions through

    <f, g>_gamma = int int f(x) gamma(x - y) g(y) dx dy.

Every model exposes :meth:`CovarianceModel.lag_weights`, the double integral of
``gamma`` over a pair of width-``h`` cells separated by ``k`` cells.  When a
second antiderivative ``psi`` (``psi'' = gamma``, ``psi`` even, ``psi(0) = 0``)
is known the cell integral is exact:

    w(k) = psi((k + 1) h) - 2 psi(k h) + psi((k - 1) h).

Otherwise the midpoint rule ``h**2 * gamma(k h)`` is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .errors import ConfigurationError, InputError, ModelError, NumericError

__all__ = [
    "StepFunction",
    "CovarianceModel",
    "White",
    "Fractional",
    "LpSingular",
    "Bounded",
    "make_model",
    "model_from_config",
    "inner_product",
    "seminorm_sq",
    "gram_matrix",
    "uniform_gram",
    "psd_factor",
    "sample_cell_noise",
    "sample_uniform_cell_noise",
    "d_exponent",
    "PRESETS",
]

PSD_RTOL = 1e-10


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function on ``[origin + i h, origin + (i+1) h)``.

    ``support`` optionally records the true closed hull of the support when it
    is known more precisely than the bin edges (local-time fields carry the
    path range here).
    """

    origin: float
    bin_width: float
    values: np.ndarray
    support: Optional[tuple[float, float]] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise InputError("step function values must be one-dimensional")
        if not self.bin_width > 0:
            raise InputError(f"bin width must be positive, got {self.bin_width}")
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return self.values.size

    @property
    def edges(self) -> np.ndarray:
        return self.origin + self.bin_width * np.arange(self.n_bins + 1)

    def lq_norm(self, q: float) -> float:
        return float((self.bin_width * np.sum(np.abs(self.values) ** q)) ** (1.0 / q))

    @property
    def l1_norm(self) -> float:
        return float(self.bin_width * np.sum(np.abs(self.values)))

    def hull(self) -> Optional[tuple[float, float]]:
        """Closed interval containing the support, or None for the zero function."""
        if self.support is not None:
            return self.support
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return None
        return (
            self.origin + nz[0] * self.bin_width,
            self.origin + (nz[-1] + 1) * self.bin_width,
        )

    def refine(self, m: int) -> "StepFunction":
        """Split every bin into ``m`` equal bins (densities are unchanged)."""
        if m == 1:
            return self
        return StepFunction(self.origin, self.bin_width / m, np.repeat(self.values, m), self.support)

    @classmethod
    def indicator(cls, a: float, b: float, h: Optional[float] = None) -> "StepFunction":
        """Indicator of ``[a, b)``; one bin unless ``h`` subdivides it."""
        if h is None:
            return cls(a, b - a, np.ones(1))
        n = int(round((b - a) / h))
        if not math.isclose(n * h, b - a, rel_tol=1e-12, abs_tol=1e-14):
            raise InputError("interval length is not a multiple of h")
        return cls(a, h, np.ones(n))


# --------------------------------------------------------------------------
# covariance models
# --------------------------------------------------------------------------


def _second_difference(psi: Callable[[np.ndarray], np.ndarray], k: np.ndarray, h: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return psi((k + 1.0) * h) - 2.0 * psi(k * h) + psi((k - 1.0) * h)


@dataclass(frozen=True)
class CovarianceModel:
    support_radius: Optional[float] = field(default=None, kw_only=True)
    name: str = field(default="", kw_only=True)

    def lag_weights(self, lags, h: float) -> np.ndarray:
        raise NotImplementedError

    def d_exponent(self) -> float:
        raise NotImplementedError

    def lp_bound(self, f: StepFunction, t: float = 1.0) -> float:
        """Right-hand side of the seminorm-to-L^q domination for ``f``."""
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False

    def _mask_support(self, lags: np.ndarray, h: float, w: np.ndarray) -> np.ndarray:
        if self.support_radius is None:
            return w
        far = (np.abs(lags) - 1) * h >= self.support_radius
        return np.where(far, 0.0, w)


@dataclass(frozen=True)
class White(CovarianceModel):
    """gamma = sigma2 * delta_0.  Compactly supported at radius 0 by default."""

    sigma2: float = 1.0
    support_radius: Optional[float] = field(default=0.0, kw_only=True)

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise InputError("sigma2 must be nonnegative")

    def lag_weights(self, lags, h):
        lags = np.asarray(lags)
        return np.where(lags == 0, self.sigma2 * h, 0.0)

    def d_exponent(self):
        return 1.5

    def lp_bound(self, f, t=1.0):
        return self.sigma2 * f.lq_norm(2.0) ** 2

    @property
    def is_zero(self):
        return self.sigma2 == 0


@dataclass(frozen=True)
class Fractional(CovarianceModel):
    """gamma(x) = sigma2 H (2H - 1) |x|^(2H - 2), H in (1/2, 1)."""

    hurst: float = 0.75
    sigma2: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.hurst < 1.0:
            raise InputError(f"Hurst index must lie strictly inside (1/2, 1), got {self.hurst}")
        if not self.sigma2 > 0:
            raise InputError("sigma2 must be positive")

    def psi(self, z):
        return 0.5 * self.sigma2 * np.abs(z) ** (2.0 * self.hurst)

    def lag_weights(self, lags, h):
        lags = np.asarray(lags)
        return self._mask_support(lags, h, _second_difference(self.psi, lags, h))

    def d_exponent(self):
        return 1.0 + self.hurst

    def lp_bound(self, f, t=1.0):
        c = 2.0 * self.hurst * self.sigma2
        return c * t**self.hurst * (f.lq_norm(2.0) ** 2 / math.sqrt(t) + f.l1_norm**2 / t)


@dataclass(frozen=True)
class LpSingular(CovarianceModel):
    """gamma = gamma1 + gamma2 with gamma1 in L^p and gamma2 bounded.

    ``gamma1_psi`` is a second antiderivative of ``gamma1``; ``gamma2`` is
    integrated with the midpoint rule.  ``gamma1_lp`` and ``gamma2_sup`` feed
    the L^q domination bound.
    """

    p: float = 1.0
    gamma1_psi: Callable = None
    gamma2: Optional[Callable] = None
    gamma1_lp: float = math.inf
    gamma2_sup: float = 0.0

    def __post_init__(self):
        if not self.p >= 1:
            raise InputError(f"p must be >= 1, got {self.p}")
        if self.gamma1_psi is None:
            raise InputError("LpSingular needs a second antiderivative for gamma1")

    def lag_weights(self, lags, h):
        lags = np.asarray(lags)
        w = _second_difference(self.gamma1_psi, lags, h)
        if self.gamma2 is not None:
            w = w + h * h * self.gamma2(lags * h)
        if np.any(np.isnan(w)):
            raise NumericError("NaN in singular kernel cell integral")
        return self._mask_support(lags, h, w)

    def d_exponent(self):
        return 2.0 - 1.0 / (2.0 * self.p)

    def lp_bound(self, f, t=1.0):
        q = 1.0 / (1.0 - 1.0 / (2.0 * self.p))
        return self.gamma1_lp * f.lq_norm(q) ** 2 + self.gamma2_sup * f.l1_norm**2


@dataclass(frozen=True)
class Bounded(CovarianceModel):
    """Uniformly bounded covariance function.

    Cell integrals use ``gamma_psi`` when supplied, else the midpoint rule.
    """

    gamma: Callable = None
    gamma_sup: float = 1.0
    gamma_psi: Optional[Callable] = None

    def __post_init__(self):
        if self.gamma is None:
            raise InputError("Bounded model needs gamma")

    def lag_weights(self, lags, h):
        lags = np.asarray(lags)
        if self.gamma_psi is not None:
            w = _second_difference(self.gamma_psi, lags, h)
        else:
            w = h * h * np.asarray(self.gamma(lags * h), dtype=float) * np.ones(lags.shape)
        return self._mask_support(lags, h, w)

    def d_exponent(self):
        return 2.0

    def lp_bound(self, f, t=1.0):
        return self.gamma_sup * f.l1_norm**2

    @property
    def is_zero(self):
        return self.gamma_sup == 0


def d_exponent(model: CovarianceModel) -> float:
    """Small-time decay exponent of sup_x E||L_t||_gamma^2 for the noise class."""
    return model.d_exponent()


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------


def _gauss_psi(length: float, sigma2: float):
    c = math.sqrt(math.pi / 2.0)

    def psi(z):
        u = np.asarray(z, dtype=float) / length
        return sigma2 * length**2 * (u * c * special.erf(u / math.sqrt(2.0)) + np.expm1(-0.5 * u * u))

    return psi


def _triangle_psi(K: float, sigma2: float):
    def psi(z):
        a = np.abs(np.asarray(z, dtype=float))
        inner = a * a / 2.0 - a**3 / (6.0 * K)
        outer = K * K / 3.0 + (K / 2.0) * (a - K)
        return sigma2 * np.where(a <= K, inner, outer)

    return psi


def _power_psi(e: float, sigma2: float):
    c = sigma2 / ((1.0 - e) * (2.0 - e))

    def psi(z):
        return c * np.abs(z) ** (2.0 - e)

    return psi


def _log_psi(e: float, sigma2: float):
    a = e + 1.0
    g = special.gamma(a)
    psi1 = g * (1.0 - 2.0**-a)

    def upper(x):
        return special.gammaincc(a, x) * g

    def psi(z):
        r = np.abs(np.asarray(z, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            s = -np.log(np.clip(r, 1e-300, 1.0))
            inner = r * upper(s) - 2.0**-a * upper(2.0 * s)
        inner = np.where(r == 0, 0.0, inner)
        return sigma2 * np.where(r <= 1.0, inner, psi1 + g * (r - 1.0))

    return psi


def _preset_white(sigma2=1.0, compact=True):
    return White(sigma2=sigma2, support_radius=0.0 if compact else None, name="white")


def _preset_fractional(hurst=0.75, sigma2=1.0):
    return Fractional(hurst=hurst, sigma2=sigma2, name="fractional")


def _preset_lp_power(e=0.5, p=None, sigma2=1.0):
    # |x|^-e = (|x|^-e on |x|<=1) + (bounded tail); the whole kernel has an exact psi
    if not 0 < e < 1:
        raise ConfigurationError("lp_power exponent e must lie in (0, 1)")
    if p is None:
        p = 0.5 * (1.0 + 1.0 / e)
    if not (p >= 1 and p * e < 1):
        raise ConfigurationError(f"lp_power needs 1 <= p < 1/e, got p={p}, e={e}")
    return LpSingular(
        p=p,
        gamma1_psi=_power_psi(e, sigma2),
        gamma1_lp=sigma2 * (2.0 / (1.0 - p * e)) ** (1.0 / p),
        gamma2_sup=sigma2,
        name="lp_power",
    )


def _preset_lp_log(e=1.0, p=2.0, sigma2=1.0):
    if not e > 0:
        raise ConfigurationError("lp_log exponent e must be positive")
    if not p >= 1:
        raise ConfigurationError("lp_log needs p >= 1")
    return LpSingular(
        p=p,
        gamma1_psi=_log_psi(e, sigma2),
        gamma1_lp=sigma2 * (2.0 * special.gamma(p * e + 1.0)) ** (1.0 / p),
        gamma2_sup=0.0,
        support_radius=1.0,
        name="lp_log",
    )


def _preset_bounded_gaussian(sigma2=1.0, length=1.0):
    return Bounded(
        gamma=lambda x: sigma2 * np.exp(-0.5 * (np.asarray(x) / length) ** 2),
        gamma_sup=sigma2,
        gamma_psi=_gauss_psi(length, sigma2),
        name="bounded_gaussian",
    )


def _preset_bounded_const(sigma2=1.0):
    return Bounded(gamma=lambda x: sigma2 + 0.0 * np.asarray(x, dtype=float), gamma_sup=sigma2, name="bounded_const")


def _preset_bounded_triangle(K=1.0, sigma2=1.0):
    if not K > 0:
        raise ConfigurationError("triangle support radius must be positive")
    return Bounded(
        gamma=lambda x: sigma2 * np.clip(1.0 - np.abs(np.asarray(x)) / K, 0.0, None),
        gamma_sup=sigma2,
        gamma_psi=_triangle_psi(K, sigma2),
        support_radius=K,
        name="bounded_triangle",
    )


def _preset_none():
    return Bounded(gamma=lambda x: 0.0 * np.asarray(x, dtype=float), gamma_sup=0.0, support_radius=0.0, name="none")


PRESETS = {
    "white": _preset_white,
    "fractional": _preset_fractional,
    "lp_power": _preset_lp_power,
    "lp_log": _preset_lp_log,
    "bounded_gaussian": _preset_bounded_gaussian,
    "bounded_const": _preset_bounded_const,
    "bounded_triangle": _preset_bounded_triangle,
    "none": _preset_none,
}


def make_model(name: str, **params) -> CovarianceModel:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown noise preset {name!r}; choose from {sorted(PRESETS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for noise preset {name!r}: {exc}") from None
    except InputError as exc:
        raise ConfigurationError(str(exc)) from None


def model_from_config(cfg: dict) -> CovarianceModel:
    """Build a model from ``{"name": ..., **params}``."""
    cfg = dict(cfg)
    name = cfg.pop("name", None)
    if name is None:
        raise ConfigurationError("noise config needs a 'name'")
    return make_model(name, **cfg)


# --------------------------------------------------------------------------
# inner products
# --------------------------------------------------------------------------


def _align(f: StepFunction, g: StepFunction) -> tuple[StepFunction, StepFunction, int]:
    """Refine ``f`` and ``g`` to a common bin width; return the bin offset of g."""
    ratio = f.bin_width / g.bin_width
    frac = Fraction(ratio).limit_denominator(4096)
    if not math.isclose(float(frac), ratio, rel_tol=1e-9):
        raise InputError(f"bin widths {f.bin_width} and {g.bin_width} are not commensurable")
    f = f.refine(frac.numerator)
    g = g.refine(frac.denominator)
    h = f.bin_width
    shift = (g.origin - f.origin) / h
    s = round(shift)
    if abs(shift - s) > 1e-7 * max(1.0, abs(shift)):
        # origins not on a common lattice: try splitting bins further
        sub = Fraction(shift - math.floor(shift)).limit_denominator(4096)
        if sub.denominator > 1 and math.isclose(
            (shift - math.floor(shift)) * sub.denominator, sub.numerator, abs_tol=1e-7
        ):
            return _align(f.refine(sub.denominator), g.refine(sub.denominator))
        raise InputError("step function grids cannot be aligned by exact bin splitting")
    return f, g, int(s)


def _separated(f: StepFunction, g: StepFunction, radius: Optional[float]) -> bool:
    if radius is None:
        return False
    hf, hg = f.hull(), g.hull()
    if hf is None or hg is None:
        return True
    gap = max(hg[0] - hf[1], hf[0] - hg[1])
    return gap > radius


def inner_product(f: StepFunction, g: StepFunction, model: CovarianceModel) -> float:
    """Return <f, g>_gamma for step functions."""
    if _separated(f, g, model.support_radius):
        return 0.0
    f, g, s = _align(f, g)
    nzf = np.flatnonzero(f.values)
    nzg = np.flatnonzero(g.values)
    if nzf.size == 0 or nzg.size == 0:
        return 0.0
    fv = f.values[nzf[0] : nzf[-1] + 1]
    gv = g.values[nzg[0] : nzg[-1] + 1]
    lag0 = s + nzg[0] - nzf[0]
    lags = lag0 + np.arange(gv.size)[None, :] - np.arange(fv.size)[:, None]
    w = model.lag_weights(lags, f.bin_width)
    val = float(fv @ w @ gv)
    if math.isnan(val):
        raise NumericError("NaN in covariance cell integral")
    return val


def seminorm_sq(f: StepFunction, model: CovarianceModel) -> float:
    """||f||_gamma^2, clamped to zero when round-off makes it slightly negative."""
    v = inner_product(f, f, model)
    if -1e-12 < v < 0:
        return 0.0
    return v


def gram_matrix(cells: Sequence[StepFunction], model: CovarianceModel, check: bool = True) -> np.ndarray:
    """Gram matrix M_ij = <cell_i, cell_j>_gamma; validated PSD by default."""
    cells = list(cells)
    if not cells:
        raise InputError("gram_matrix needs at least one cell")
    n = len(cells)
    M = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            M[i, j] = M[j, i] = inner_product(cells[i], cells[j], model)
    if check:
        psd_factor(M)
    return M


def uniform_gram(n: int, h: float, model: CovarianceModel) -> np.ndarray:
    """Gram matrix of ``n`` consecutive cells of width ``h`` (Toeplitz)."""
    lags = np.arange(n)
    col = model.lag_weights(lags, h)
    idx = np.abs(lags[:, None] - lags[None, :])
    return col[idx]


def psd_factor(M: np.ndarray, rtol: float = PSD_RTOL) -> np.ndarray:
    """Return ``L`` (n x r) with ``M ~= L L^T``.

    Tries a plain Cholesky factorization first; on failure falls back to
    diagonally pivoted Cholesky in which pivots below ``rtol * trace`` are
    clamped to zero and more negative ones raise :class:`ModelError`.
    """
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(M).max(initial=0.0))):
        raise ModelError("Gram matrix is not symmetric")
    n = M.shape[0]
    trace = float(np.trace(M))
    tol = rtol * max(trace, 0.0)
    if np.any(np.diag(M) < -tol):
        raise ModelError("negative variance on the grid: gamma is not a covariance")
    if trace <= 0:
        if np.abs(M).max(initial=0.0) > 0:
            raise ModelError("Gram matrix has zero trace but nonzero entries")
        return np.zeros((n, 0))
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pass
    d = np.diag(M).copy()
    cols = []
    L = np.zeros((n, n))
    r = 0
    while r < n:
        p = int(np.argmax(d))
        if d[p] <= tol:
            break
        col = M[:, p] - L[:, :r] @ L[p, :r]
        col /= math.sqrt(d[p])
        L[:, r] = col
        d -= col * col
        d[p] = 0.0
        r += 1
        if d.min() < -tol:
            raise ModelError(f"negative pivot {d.min():.3e} below -{tol:.1e}: gamma is not PSD on this grid")
    L = L[:, :r]
    resid = M - L @ L.T
    if np.abs(resid).max() > max(tol, 1e-12 * trace) * 10:
        raise ModelError("residual Schur complement is indefinite: gamma is not PSD on this grid")
    del cols
    return L


def sample_cell_noise(cells: Sequence[StepFunction], model: CovarianceModel, rng: np.random.Generator, size=None) -> np.ndarray:
    """Centered Gaussian cell averages with covariance <1_i, 1_j>_gamma / (|i| |j|)."""
    cells = list(cells)
    M = gram_matrix(cells, model, check=False)
    widths = np.array([c.l1_norm for c in cells])
    L = psd_factor(M) / widths[:, None]
    return _draw(L, rng, size)


def sample_uniform_cell_noise(n: int, h: float, model: CovarianceModel, rng: np.random.Generator, size=None) -> np.ndarray:
    """Fast path of :func:`sample_cell_noise` for ``n`` consecutive width-``h`` cells."""
    L = psd_factor(uniform_gram(n, h, model)) / h
    return _draw(L, rng, size)


def _draw(L: np.ndarray, rng: np.random.Generator, size):
    n, r = L.shape
    if size is None:
        return L @ rng.standard_normal(r) if r else np.zeros(n)
    z = rng.standard_normal((size, r))
    return z @ L.T if r else np.zeros((size, n))
