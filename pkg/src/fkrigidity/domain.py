"""Domains, boundary parameters, potentials and reflected heat kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, InputError

__all__ = [
    "FULL_LINE",
    "HALF_LINE",
    "INTERVAL",
    "DomainSpec",
    "Growth",
    "PotentialSpec",
    "make_potential",
    "potential_from_config",
    "domain_from_config",
    "gaussian_kernel",
    "transition_kernel",
    "image_points",
    "image_count",
    "kernel_bound_check",
    "KernelBoundReport",
]

FULL_LINE = "full_line"
HALF_LINE = "half_line"
INTERVAL = "interval"
_CASES = (FULL_LINE, HALF_LINE, INTERVAL)

IMAGE_EPS = 1e-15
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DomainSpec:
    """One of the three domain cases.

    ``alpha_bar`` is the boundary parameter at 0 and ``beta_bar`` the one at
    ``b``; ``-inf`` means Dirichlet, a finite value means Robin (0 is Neumann).
    """

    case: str = FULL_LINE
    b: Optional[float] = None
    alpha_bar: Optional[float] = None
    beta_bar: Optional[float] = None

    def __post_init__(self):
        if self.case not in _CASES:
            raise InputError(f"unknown domain case {self.case!r}")
        if self.case == INTERVAL:
            if self.b is None or not (self.b > 0 and math.isfinite(self.b)):
                raise InputError(f"interval length must be positive and finite, got {self.b}")
        for name in ("alpha_bar", "beta_bar"):
            v = getattr(self, name)
            if v is not None and (math.isnan(v) or v == math.inf):
                raise InputError(f"{name} must be finite or -inf")
        if self.case in (HALF_LINE, INTERVAL) and self.alpha_bar is None:
            object.__setattr__(self, "alpha_bar", 0.0)
        if self.case == INTERVAL and self.beta_bar is None:
            object.__setattr__(self, "beta_bar", 0.0)

    @classmethod
    def full_line(cls) -> "DomainSpec":
        return cls(FULL_LINE)

    @classmethod
    def half_line(cls, alpha_bar: float = 0.0) -> "DomainSpec":
        return cls(HALF_LINE, alpha_bar=alpha_bar)

    @classmethod
    def interval(cls, b: float, alpha_bar: float = 0.0, beta_bar: float = 0.0) -> "DomainSpec":
        return cls(INTERVAL, b=b, alpha_bar=alpha_bar, beta_bar=beta_bar)

    @property
    def case_number(self) -> int:
        return _CASES.index(self.case) + 1

    @property
    def bounds(self) -> tuple[float, float]:
        if self.case == FULL_LINE:
            return (-math.inf, math.inf)
        if self.case == HALF_LINE:
            return (0.0, math.inf)
        return (0.0, float(self.b))

    @property
    def boundary_points(self) -> tuple[float, ...]:
        if self.case == FULL_LINE:
            return ()
        if self.case == HALF_LINE:
            return (0.0,)
        return (0.0, float(self.b))

    def boundary_parameter(self, c: float) -> float:
        if c == 0.0 and self.case != FULL_LINE:
            return self.alpha_bar
        if self.case == INTERVAL and c == self.b:
            return self.beta_bar
        raise InputError(f"{c} is not a boundary point of this domain")

    def is_dirichlet(self, c: float) -> bool:
        return self.boundary_parameter(c) == -math.inf

    @property
    def dirichlet_points(self) -> tuple[float, ...]:
        return tuple(c for c in self.boundary_points if self.is_dirichlet(c))

    @property
    def bounded(self) -> bool:
        return self.case == INTERVAL

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        lo, hi = self.bounds
        x = np.asarray(x, dtype=float)
        return (x >= lo - tol) & (x <= hi + tol)

    def check(self, *xs) -> None:
        for x in xs:
            if not np.all(self.contains(x, tol=1e-12)):
                raise InputError(f"point(s) {x} outside the closed domain {self.bounds}")

    def to_dict(self) -> dict:
        d = {"case": self.case}
        if self.b is not None:
            d["b"] = self.b
        for name in ("alpha_bar", "beta_bar"):
            v = getattr(self, name)
            if v is not None:
                d[name] = "dirichlet" if v == -math.inf else v
        return d


def _boundary_value(v):
    if isinstance(v, str):
        if v.lower() in ("dirichlet", "-inf"):
            return -math.inf
        if v.lower() == "neumann":
            return 0.0
        raise ConfigurationError(f"unknown boundary value {v!r}")
    return v if v is None else float(v)


def domain_from_config(cfg: dict) -> DomainSpec:
    """Build a domain from ``{"case": ..., "b": ..., "alpha_bar": ..., "beta_bar": ...}``.

    Boundary values may be numbers or the strings ``"dirichlet"``/``"neumann"``.
    """
    try:
        return DomainSpec(
            cfg.get("case", FULL_LINE),
            b=cfg.get("b"),
            alpha_bar=_boundary_value(cfg.get("alpha_bar")),
            beta_bar=_boundary_value(cfg.get("beta_bar")),
        )
    except InputError as exc:
        raise ConfigurationError(str(exc)) from None


# --------------------------------------------------------------------------
# potentials
# --------------------------------------------------------------------------


class Growth(NamedTuple):
    """Certificate ``V(x) >= |kappa x|**a - nu``."""

    kappa: float
    a: float
    nu: float = 0.0


@dataclass(frozen=True)
class PotentialSpec:
    """Potential ``V`` with a lower bound and an optional growth certificate.

    The lower bound and the certificate are spot-checked on ``n_check`` points
    of ``check_range`` at construction.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    lower_bound: float = 0.0
    growth: Optional[Growth] = None
    name: str = "custom"
    check_range: tuple[float, float] = (-10.0, 10.0)
    n_check: int = 1000
    is_zero: bool = False

    def __post_init__(self):
        if self.growth is not None:
            g = Growth(*self.growth)
            if not (g.kappa > 0 and g.a > 0 and g.nu >= 0):
                raise ConfigurationError("growth certificate needs kappa > 0, a > 0, nu >= 0")
            object.__setattr__(self, "growth", g)
        xs = np.linspace(*self.check_range, self.n_check)
        v = np.asarray(self(xs), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ConfigurationError(f"potential {self.name!r} is not finite on {self.check_range}")
        tol = 1e-12 * np.maximum(1.0, np.abs(v))
        if np.any(v < self.lower_bound - tol):
            raise ConfigurationError(f"potential {self.name!r} drops below its lower bound {self.lower_bound}")
        if self.growth is not None:
            k, a, nu = self.growth
            if np.any(v < np.abs(k * xs) ** a - nu - tol):
                raise ConfigurationError(f"growth certificate {tuple(self.growth)} fails for {self.name!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.eval(x), dtype=float), x.shape)


def _check_range(domain: Optional[DomainSpec]) -> tuple[float, float]:
    if domain is None or domain.case == FULL_LINE:
        return (-10.0, 10.0)
    if domain.case == HALF_LINE:
        return (0.0, 10.0)
    return (0.0, float(domain.b))


def make_potential(name: str, domain: Optional[DomainSpec] = None, **params) -> PotentialSpec:
    """Potential presets ``zero``, ``abs_pow``, ``linear_half`` and ``harmonic``."""
    rng = _check_range(domain)
    if name == "zero":
        _no_params(name, params)
        return PotentialSpec(lambda x: np.zeros_like(x), 0.0, None, "zero", rng, is_zero=True)
    if name == "abs_pow":
        kappa = float(params.pop("kappa", 1.0))
        a = float(params.pop("a", 2.0))
        nu = float(params.pop("nu", 0.0))
        _no_params(name, params)
        return PotentialSpec(lambda x: np.abs(kappa * x) ** a, 0.0, Growth(kappa, a, nu), "abs_pow", rng)
    if name == "linear_half":
        _no_params(name, params)
        if domain is not None and domain.case == FULL_LINE:
            raise ConfigurationError("linear_half is unbounded below on the full line")
        return PotentialSpec(lambda x: 0.5 * x, 0.0, Growth(0.5, 1.0, 0.0), "linear_half", rng)
    if name == "harmonic":
        _no_params(name, params)
        return PotentialSpec(lambda x: x * x, 0.0, Growth(1.0, 2.0, 0.0), "harmonic", rng)
    raise ConfigurationError(f"unknown potential preset {name!r}")


def _no_params(name, params):
    if params:
        raise ConfigurationError(f"unexpected parameters for potential {name!r}: {sorted(params)}")


def potential_from_config(cfg: Optional[dict], domain: Optional[DomainSpec] = None) -> PotentialSpec:
    if cfg is None:
        return make_potential("zero", domain)
    cfg = dict(cfg)
    name = cfg.pop("name", "zero")
    return make_potential(name, domain, **cfg)


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------


def gaussian_kernel(t, x):
    """Heat kernel ``exp(-x^2 / 2t) / sqrt(2 pi t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise InputError("gaussian_kernel needs t > 0")
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x / t) / np.sqrt(2.0 * np.pi * t)
    return out if out.ndim else float(out)


def image_count(t: float, b: float, eps: float = IMAGE_EPS) -> int:
    """Number of image periods kept on each side for an interval of length ``b``."""
    return int(math.ceil(math.sqrt(2.0 * t * math.log(1.0 / eps)) / (2.0 * b))) + 1


def image_points(spec: DomainSpec, t: float, y: float) -> np.ndarray:
    """Images of ``y`` whose Gaussian sum gives the reflecting kernel."""
    if spec.case == FULL_LINE:
        return np.array([float(y)])
    if spec.case == HALF_LINE:
        return np.array([float(y), -float(y)])
    b = float(spec.b)
    k = np.arange(-image_count(t, b), image_count(t, b) + 1)
    return np.concatenate([2 * b * k + y, 2 * b * k - y])


def transition_kernel(spec: DomainSpec, t: float, x, y):
    """Reflecting transition density on the domain, vectorized in ``x`` and ``y``."""
    if not t > 0:
        raise InputError("transition_kernel needs t > 0")
    spec.check(x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.case == FULL_LINE:
        out = gaussian_kernel(t, x - y)
    elif spec.case == HALF_LINE:
        out = gaussian_kernel(t, x - y) + gaussian_kernel(t, x + y)
    else:
        b = float(spec.b)
        n = image_count(t, b)
        k = np.arange(-n, n + 1).reshape((-1,) + (1,) * np.broadcast(x, y).ndim)
        d1 = x - y - 2 * b * k
        d2 = x + y - 2 * b * k
        out = np.sum(np.exp(-0.5 * d1 * d1 / t) + np.exp(-0.5 * d2 * d2 / t), axis=0) / math.sqrt(2 * math.pi * t)
    out = np.asarray(out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KernelBoundReport:
    """Empirical constants of ``c <= sqrt(t) Pi(t;x,x)`` and ``sqrt(t) Pi(t;x,y) <= C``."""

    c: float
    C: float
    c_theory: float
    C_theory: float
    t_list: tuple
    ok: bool


def _upper_constant(spec: DomainSpec) -> float:
    if spec.case == FULL_LINE:
        return _INV_SQRT_2PI
    if spec.case == HALF_LINE:
        return 2.0 * _INV_SQRT_2PI
    # sqrt(t) Pi(t;0,0) is increasing in t, so the worst t in (0,1] is t = 1
    k = np.arange(-50, 51)
    return 2.0 * _INV_SQRT_2PI * float(np.sum(np.exp(-2.0 * (spec.b * k) ** 2)))


def kernel_bound_check(spec: DomainSpec, t_list, n_grid: int = 201) -> KernelBoundReport:
    """Check the small-time two-sided kernel bounds on a dense grid."""
    t_list = tuple(float(t) for t in t_list)
    if not t_list or any(not 0 < t <= 1 for t in t_list):
        raise InputError("kernel_bound_check needs all t in (0, 1]")
    c_emp, C_emp = math.inf, 0.0
    for t in t_list:
        if spec.case == FULL_LINE:
            xs = np.linspace(-5.0, 5.0, n_grid)
        elif spec.case == HALF_LINE:
            xs = np.linspace(0.0, 5.0 * max(1.0, math.sqrt(t)), n_grid)
        else:
            xs = np.linspace(0.0, spec.b, n_grid)
        K = math.sqrt(t) * transition_kernel(spec, t, xs[:, None], xs[None, :])
        c_emp = min(c_emp, float(np.min(np.diag(K))))
        C_emp = max(C_emp, float(np.max(K)))
    c_th, C_th = _INV_SQRT_2PI, _upper_constant(spec)
    ok = c_emp >= c_th * (1 - 1e-12) and C_emp <= C_th * (1 + 1e-12)
    return KernelBoundReport(c_emp, C_emp, c_th, C_th, t_list, ok)
