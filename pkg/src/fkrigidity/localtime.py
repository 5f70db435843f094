"""L^q norms and covariance-weighted norms of Brownian local times."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .domain import FULL_LINE, HALF_LINE, INTERVAL, DomainSpec
from .errors import InputError, StatisticsError
from .noise import CovarianceModel, StepFunction, uniform_gram
from .paths import LocalTimeField, default_bin_width, default_n_steps, fold, occupation_batch, sample_free
from .rigidity import ScanResult

__all__ = [
    "ScalingSample",
    "lq_norm_sq",
    "lq_norms_sq",
    "gamma_norms_sq",
    "rq_prefactor",
    "rq_sample",
    "rq_samples",
    "rq_constant",
    "domination_check",
    "DominationReport",
    "two_sample_pvalue",
    "scaling_study",
    "gamma_lt_scaling",
    "start_grid",
]

MIN_SAMPLES = 2


@dataclass(frozen=True)
class ScalingSample:
    q: float
    t: float
    value: float

    @property
    def normalized(self) -> float:
        return self.value / self.t ** (1.0 + 1.0 / self.q)


def _check_q(q, lo_open=False):
    if not (1.0 <= q <= 2.0) or (lo_open and q == 1.0):
        raise InputError(f"q must lie in {'(1, 2]' if lo_open else '[1, 2]'}, got {q}")


def lq_norm_sq(field: Union[LocalTimeField, StepFunction], q: float) -> float:
    """``(h * sum dens^q)^(2/q)``."""
    _check_q(q)
    f = field.field if isinstance(field, LocalTimeField) else field
    return float(lq_norms_sq(f.values[None, :], f.bin_width, q)[0])


def lq_norms_sq(dens: np.ndarray, h: float, q: float) -> np.ndarray:
    """Row-wise squared L^q norms of binned densities."""
    _check_q(q)
    if q == 1.0:
        s = h * np.sum(np.abs(dens), axis=1)
        return s * s
    if q == 2.0:
        return h * np.sum(dens * dens, axis=1)
    return (h * np.sum(np.abs(dens) ** q, axis=1)) ** (2.0 / q)


def gamma_norms_sq(dens: np.ndarray, h: float, model: CovarianceModel) -> np.ndarray:
    """Row-wise ``||L||_gamma^2`` for densities on consecutive width-``h`` bins."""
    W = uniform_gram(dens.shape[1], h, model)
    return np.einsum("ij,ij->i", dens @ W, dens)


# --------------------------------------------------------------------------
# dominating variables
# --------------------------------------------------------------------------


def rq_prefactor(q: float) -> float:
    return 2.0 ** (2.0 * (q - 1.0) / q)


def rq_constant(q: float, b: float) -> float:
    """Pinned interval constant ``4 * max(1, b^(q-1))^(2/q)``."""
    return 4.0 * max(1.0, b ** (q - 1.0)) ** (2.0 / q)


def _unit_paths(rng, size, n_steps):
    return sample_free(DomainSpec.full_line(), 0.0, 1.0, n_steps, rng, size)


def _interval_parts(values, h, q):
    _, dens = occupation_batch(values, 1.0, h)
    lsup = dens.max(axis=1)
    rng_ = values.max(axis=1) - values.min(axis=1)
    e = 2.0 * (1.0 - 1.0 / q)
    return lsup**e + (2.0 * lsup**2 + 2.0 * rng_**2) ** e


def rq_samples(
    case: str,
    q: float,
    rng: np.random.Generator,
    size: int,
    b: float = 1.0,
    n_steps: Optional[int] = None,
    bin_width: Optional[float] = None,
) -> np.ndarray:
    """Draws of the dominating variable ``R_q`` from unit-time paths of B^0."""
    _check_q(q, lo_open=True)
    n_steps = n_steps or default_n_steps(1.0)
    h = bin_width or default_bin_width(1.0)
    values = _unit_paths(rng, size, n_steps)
    if case in (FULL_LINE, HALF_LINE):
        _, dens = occupation_batch(values, 1.0, h)
        return rq_prefactor(q) * lq_norms_sq(dens, h, q)
    if case == INTERVAL:
        return rq_constant(q, b) * _interval_parts(values, h, q)
    raise InputError(f"unknown domain case {case!r}")


def rq_sample(case: str, q: float, rng: np.random.Generator, b: float = 1.0, **kw) -> float:
    return float(rq_samples(case, q, rng, 1, b, **kw)[0])


def start_grid(spec: DomainSpec, n: int = 9) -> np.ndarray:
    """Start points used to approximate a supremum over the domain."""
    if spec.case == FULL_LINE:
        return np.linspace(-1.0, 1.0, n)
    if spec.case == HALF_LINE:
        return np.linspace(0.0, 2.0, n)
    return np.linspace(0.0, spec.b, n)


def _lt_values(spec, x, t, n_paths, rng, n_steps, h, q=None, model=None):
    vals = sample_free(spec, x, t, n_steps, rng, n_paths)
    _, dens = occupation_batch(vals, t, h)
    if model is not None:
        return gamma_norms_sq(dens, h, model)
    return lq_norms_sq(dens, h, q)


@dataclass(frozen=True)
class DominationReport:
    q: float
    t: float
    case: str
    ratio: float
    c_min: float
    c_used: float
    dominated: bool


def domination_check(
    spec: DomainSpec,
    q: float,
    t: float,
    n_paths: int,
    rng: np.random.Generator,
    quantiles: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99),
) -> DominationReport:
    """Compare quantiles of ``sup_x ||L_t(Z^x)||_q^2 / t^(1+1/q)`` with those of ``R_q``.

    ``ratio`` is the largest quantile ratio against ``R_q`` as used (domination
    holds empirically when it is at most 1).  In the interval case ``c_min`` is
    the smallest constant that would make the quantile comparison pass.
    """
    n_steps, h = default_n_steps(t), default_bin_width(t, spec)
    xs = start_grid(spec)
    # couple the start points through one free path: Z^x = fold(x + B^0)
    base = sample_free(DomainSpec.full_line(), 0.0, t, n_steps, rng, n_paths)
    norms = []
    for x in xs:
        _, dens = occupation_batch(fold(spec, x + base), t, h)
        norms.append(lq_norms_sq(dens, h, q))
    lhs = np.max(np.stack(norms), axis=0) / t ** (1.0 + 1.0 / q)
    qs = np.asarray(quantiles)
    b = spec.b if spec.case == INTERVAL else 1.0
    r = rq_samples(spec.case, q, rng, n_paths, b=b)
    ratio = float(np.max(np.quantile(lhs, qs) / np.quantile(r, qs)))
    c_used = rq_constant(q, b) if spec.case == INTERVAL else rq_prefactor(q)
    c_min = ratio * c_used
    return DominationReport(q, t, spec.case, ratio, c_min, c_used, ratio <= 1.0)


# --------------------------------------------------------------------------
# scaling studies
# --------------------------------------------------------------------------


def _check_tlist(t_list, n_paths, upper=1.0):
    t_list = np.asarray(t_list, dtype=float)
    if t_list.size < 4:
        raise InputError("scaling studies need at least 4 t values")
    if np.any(t_list <= 0) or np.any(t_list >= upper):
        raise InputError(f"t values must lie in (0, {upper})")
    if n_paths < MIN_SAMPLES:
        raise StatisticsError(f"need at least {MIN_SAMPLES} paths per t, got {n_paths}")
    return t_list


def scaling_study(
    q: float,
    t_list: Sequence[float],
    n_paths: int,
    rng: np.random.Generator,
    keep_samples: bool = False,
) -> ScanResult:
    """Estimate ``E ||L_t(B^0)||_q^2`` per t and fit its log-log slope.

    With the default discretization (``h = sqrt(t)/8``, 64 steps for t <= 1/4)
    the estimator is exactly self-similar, so the normalized samples share one
    law across t.  ``meta["normalized"]`` holds them when ``keep_samples``.
    """
    _check_q(q)
    t_list = _check_tlist(t_list, n_paths)
    spec = DomainSpec.full_line()
    est, se, norm = [], [], []
    for t in t_list:
        v = _lt_values(spec, 0.0, t, n_paths, rng, default_n_steps(t), default_bin_width(t), q=q)
        est.append(v.mean())
        se.append(v.std(ddof=1) / math.sqrt(n_paths))
        if keep_samples:
            norm.append(v / t ** (1.0 + 1.0 / q))
    meta = {"q": q, "expected_slope": 1.0 + 1.0 / q}
    if keep_samples:
        meta["normalized"] = norm
    scan = ScanResult(t_list, est, se, np.full(t_list.size, n_paths), f"lq_scaling_q{q:g}", meta=meta)
    return scan.with_fit()


def two_sample_pvalue(a: np.ndarray, b: np.ndarray) -> float:
    """Kolmogorov-Smirnov two-sample p-value."""
    return float(stats.ks_2samp(a, b).pvalue)


def gamma_lt_scaling(
    model: CovarianceModel,
    spec: DomainSpec,
    t_list: Sequence[float],
    n_paths: int,
    rng: np.random.Generator,
    n_start: int = 9,
) -> ScanResult:
    """Estimate ``sup_x E ||L_t(Z^x)||_gamma^2`` on a start grid and fit its slope."""
    t_list = _check_tlist(t_list, n_paths)
    xs = start_grid(spec, n_start)
    est, se = [], []
    for t in t_list:
        n_steps, h = default_n_steps(t), default_bin_width(t, spec)
        best = None
        for x in xs:
            v = _lt_values(spec, x, t, n_paths, rng, n_steps, h, model=model)
            m = v.mean()
            if best is None or m > best[0]:
                best = (m, v.std(ddof=1) / math.sqrt(n_paths))
        est.append(best[0])
        se.append(best[1])
    meta = {"noise": model.name, "expected_slope": model.d_exponent(), "case": spec.case}
    scan = ScanResult(t_list, est, se, np.full(t_list.size, n_paths), f"gamma_lt_{model.name}", meta=meta)
    return scan.with_fit()
