"""Conditioned Brownian paths on the three domains and their local times.

Reflected bridges are drawn exactly in law by the method of images: an image
``e`` of the endpoint is chosen with probability proportional to ``G_t(x - e)``,
a free bridge ``x -> e`` is sampled, and the path is folded back into the
domain.  The unfolded ("free") path is kept because boundary hits of the
folded path are barrier crossings of the free one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import FULL_LINE, HALF_LINE, INTERVAL, DomainSpec, image_points
from .errors import InputError
from .noise import StepFunction

__all__ = [
    "BridgePath",
    "BridgeBatch",
    "LocalTimeField",
    "default_bin_width",
    "default_n_steps",
    "sample_bridge",
    "sample_bridges",
    "sample_free",
    "fold",
    "occupation_local_time",
    "occupation_batch",
    "boundary_local_time",
    "boundary_local_times",
    "dirichlet_survival_weight",
    "dirichlet_log_weights",
    "time_integral",
]


def default_bin_width(t: float, spec: Optional[DomainSpec] = None) -> float:
    """sqrt(t)/8, shrunk on an interval so that it divides the length exactly."""
    h = math.sqrt(t) / 8.0
    if spec is not None and spec.case == INTERVAL:
        h = spec.b / math.ceil(spec.b / h - 1e-9)
    return h


def default_n_steps(t: float) -> int:
    return max(64, int(math.ceil(256.0 * t)))


@dataclass(frozen=True)
class BridgePath:
    t: float
    n_steps: int
    values: np.ndarray
    case: str
    x: float
    y: float
    endpoint: float
    free_values: np.ndarray

    @property
    def dt(self) -> float:
        return self.t / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t, self.n_steps + 1)


@dataclass(frozen=True)
class BridgeBatch:
    """``m`` paths stored row-wise; indexing returns :class:`BridgePath`."""

    t: float
    case: str
    x: float
    y: float
    values: np.ndarray
    free_values: np.ndarray
    endpoints: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.values.shape[1] - 1

    @property
    def dt(self) -> float:
        return self.t / self.n_steps

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i) -> BridgePath:
        return BridgePath(
            self.t, self.n_steps, self.values[i], self.case, self.x, self.y, float(self.endpoints[i]), self.free_values[i]
        )


def fold(spec: DomainSpec, u: np.ndarray) -> np.ndarray:
    """Map a free path into the domain by reflection at the boundary."""
    if spec.case == FULL_LINE:
        return u
    if spec.case == HALF_LINE:
        return np.abs(u)
    b = float(spec.b)
    r = np.mod(u, 2.0 * b)
    return np.where(r <= b, r, 2.0 * b - r)


def _check_args(t, n_steps):
    if not t > 0:
        raise InputError(f"path horizon must be positive, got {t}")
    if n_steps < 2:
        raise InputError("n_steps must be at least 2")


def _free_bridges(x, e, t, n_steps, rng, size):
    z = rng.standard_normal((size, n_steps)) * math.sqrt(t / n_steps)
    w = np.zeros((size, n_steps + 1))
    np.cumsum(z, axis=1, out=w[:, 1:])
    s = np.arange(n_steps + 1) / n_steps
    e = np.asarray(e, dtype=float).reshape(-1, 1)
    out = x + w - s * w[:, -1:] + s * (e - x)
    out[:, 0] = x
    out[:, -1] = e[:, 0]
    return out


def sample_bridges(spec: DomainSpec, x: float, y: float, t: float, n_steps: int, rng: np.random.Generator, size: int) -> BridgeBatch:
    """Draw ``size`` independent conditioned paths from ``x`` to ``y`` in time ``t``."""
    _check_args(t, n_steps)
    spec.check(x, y)
    x, y = float(x), float(y)
    images = image_points(spec, t, y)
    if images.size == 1:
        ends = np.full(size, images[0])
    else:
        logw = -0.5 * (x - images) ** 2 / t
        p = np.exp(logw - logw.max())
        cdf = np.cumsum(p / p.sum())
        idx = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), images.size - 1)
        ends = images[idx]
    free = _free_bridges(x, ends, t, n_steps, rng, size)
    values = fold(spec, free)
    values[:, 0] = x
    values[:, -1] = y
    return BridgeBatch(t, spec.case, x, y, values, free, ends)


def sample_bridge(spec: DomainSpec, x: float, y: float, t: float, n_steps: int, rng: np.random.Generator) -> BridgePath:
    """Single conditioned path; see :func:`sample_bridges`."""
    return sample_bridges(spec, x, y, t, n_steps, rng, 1)[0]


def sample_free(spec: DomainSpec, x: float, t: float, n_steps: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Unconditioned reflected Brownian paths started at ``x`` (rows)."""
    _check_args(t, n_steps)
    spec.check(x)
    z = rng.standard_normal((size, n_steps)) * math.sqrt(t / n_steps)
    w = np.full((size, n_steps + 1), float(x))
    w[:, 1:] += np.cumsum(z, axis=1)
    return fold(spec, w)


# --------------------------------------------------------------------------
# local times
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalTimeField:
    field: StepFunction
    boundary_local_times: dict = field(default_factory=dict)

    @property
    def mass(self) -> float:
        return self.field.l1_norm


def occupation_batch(values: np.ndarray, t: float, h: float) -> tuple[int, np.ndarray]:
    """Binned occupation densities for many paths on the lattice ``h Z``.

    Each time step deposits ``t/n`` into the bin holding the midpoint of the
    step.  Returns ``(k0, dens)`` where row ``i`` of ``dens`` is the density
    on bins ``[(k0 + j) h, (k0 + j + 1) h)``.
    """
    if not h > 0:
        raise InputError("bin width must be positive")
    values = np.atleast_2d(values)
    m, n1 = values.shape
    n = n1 - 1
    mid = 0.5 * (values[:, :-1] + values[:, 1:])
    idx = np.floor(mid / h).astype(np.int64)
    k0 = int(idx.min())
    nb = int(idx.max()) - k0 + 1
    flat = (idx - k0) + nb * np.arange(m)[:, None]
    counts = np.bincount(flat.ravel(), minlength=m * nb).reshape(m, nb)
    return k0, counts * (t / n / h)


def occupation_local_time(path: BridgePath, h: float) -> LocalTimeField:
    """Occupation density of one path with midpoint binning."""
    k0, dens = occupation_batch(path.values, path.t, h)
    support = (float(path.values.min()), float(path.values.max()))
    return LocalTimeField(StepFunction(k0 * h, h, dens[0], support))


def _trapezoid_weights(n_steps: int, t: float) -> np.ndarray:
    w = np.full(n_steps + 1, t / n_steps)
    w[0] = w[-1] = 0.5 * t / n_steps
    return w


def boundary_local_times(values: np.ndarray, t: float, c: float, eps: Optional[float] = None) -> np.ndarray:
    """``(1/2 eps) * time spent within eps of c`` for each path (rows)."""
    values = np.atleast_2d(values)
    n = values.shape[1] - 1
    if eps is None:
        eps = math.sqrt(t / n)
    if not eps > 0:
        raise InputError("epsilon must be positive")
    near = np.abs(values - c) < eps
    return near @ _trapezoid_weights(n, t) / (2.0 * eps)


def boundary_local_time(path: BridgePath, c: float, epsilon: Optional[float] = None) -> float:
    return float(boundary_local_times(path.values, path.t, c, epsilon)[0])


def _barrier_lattice(spec: DomainSpec):
    """Crossing set for the free path: ``(offset, period)``; period None = single point."""
    d0 = spec.case != FULL_LINE and spec.is_dirichlet(0.0)
    if spec.case == HALF_LINE:
        return (0.0, None) if d0 else None
    if spec.case == INTERVAL:
        b = float(spec.b)
        db = spec.is_dirichlet(b)
        if d0 and db:
            return (0.0, b)
        if d0:
            return (0.0, 2.0 * b)
        if db:
            return (b, 2.0 * b)
    return None


def _log_no_cross(a0, a1, dt):
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-2.0 * a0 * a1 / dt))


def dirichlet_log_weights(free_values: np.ndarray, t: float, spec: DomainSpec) -> np.ndarray:
    """Log of the continuous-time survival weight of each path (rows).

    The free path is tested against the barrier lattice whose crossings are
    exactly the Dirichlet boundary hits of the folded path.  Per step the
    Brownian-bridge no-crossing probability ``1 - exp(-2 d d' / dt)`` is used
    for the nearest barrier on each side; a step that changes cell gives -inf.
    """
    free_values = np.atleast_2d(free_values)
    lattice = _barrier_lattice(spec)
    if lattice is None:
        return np.zeros(free_values.shape[0])
    dt = t / (free_values.shape[1] - 1)
    off, period = lattice
    u = free_values - off
    if period is None:
        cell = u > 0
        d = np.abs(u)
        out = np.sum(_log_no_cross(d[:, :-1], d[:, 1:], dt), axis=1)
    else:
        cell = np.floor(u / period)
        dl = u - period * cell
        dr = period - dl
        out = np.sum(_log_no_cross(dl[:, :-1], dl[:, 1:], dt) + _log_no_cross(dr[:, :-1], dr[:, 1:], dt), axis=1)
    crossed = np.any(cell[:, 1:] != cell[:, :-1], axis=1)
    return np.where(crossed, -np.inf, out)


def dirichlet_survival_weight(path: BridgePath, spec: DomainSpec) -> float:
    """Probability that the continuous path avoids the Dirichlet boundary."""
    return float(np.exp(dirichlet_log_weights(path.free_values, path.t, spec)[0]))


def time_integral(values: np.ndarray, t: float, func) -> np.ndarray:
    """Trapezoid approximation of ``int_0^t func(Z(s)) ds`` for each row."""
    values = np.atleast_2d(values)
    return func(values) @ _trapezoid_weights(values.shape[1] - 1, t)
