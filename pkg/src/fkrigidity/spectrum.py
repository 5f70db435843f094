"""Finite-difference spectral oracle for ``-1/2 d^2/dx^2 + V + xi``.

The grid is cell centered, ``x_i = lo + (i + 1/2) h``, so the noise enters
as exact cell averages of the field over ``[lo + i h, lo + (i + 1) h)``.
Boundary conditions are imposed through a ghost node half a cell outside the
domain: Dirichlet sets the ghost to ``-f_0``, Robin ``f'(0) + alpha f(0) = 0``
sets it to ``r f_0`` with ``r = (1 + alpha h/2) / (1 - alpha h/2)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import HALF_LINE, INTERVAL, DomainSpec, PotentialSpec
from .errors import ConfigurationError, InputError
from .moments import TraceMoments, moments_from_samples
from .noise import CovarianceModel, psd_factor, uniform_gram

__all__ = [
    "DiscreteOperator",
    "spectral_radius",
    "discretize",
    "sturm_count",
    "eigenvalues",
    "eigenvalues_batch",
    "direct_trace",
    "direct_variance",
    "truncation_check",
]

MIN_NODES = 16
TRACE_CUTOFF_DECADES = 37.0


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric tridiagonal matrix with its grid."""

    lo: float
    hi: float
    h: float
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    left: str
    right: str

    @property
    def n(self) -> int:
        return self.diagonal.size

    @property
    def nodes(self) -> np.ndarray:
        return self.lo + (np.arange(self.n) + 0.5) * self.h

    def dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)

    def with_diagonal(self, diagonal) -> "DiscreteOperator":
        return DiscreteOperator(self.lo, self.hi, self.h, np.asarray(diagonal, float), self.off_diagonal, self.left, self.right)


def spectral_radius(potential: PotentialSpec, level: float = 400.0) -> float:
    """Radius where the certified lower bound of V reaches ``level``."""
    if potential.growth is None:
        raise ConfigurationError("an unbounded domain needs a growth certificate for V")
    k, a, nu = potential.growth
    return (level + nu) ** (1.0 / a) / k


def _end_correction(param: Optional[float], h: float) -> float:
    """Diagonal term contributed by the ghost node at one end."""
    if param is None or param == -math.inf:
        return 1.0 / (2.0 * h * h)
    denom = 1.0 - 0.5 * param * h
    if denom <= 0:
        raise InputError(f"grid too coarse for Robin parameter {param}: need h < {2.0 / param:.3g}")
    r = (1.0 + 0.5 * param * h) / denom
    return -r / (2.0 * h * h)


def _grid(spec: DomainSpec, potential: PotentialSpec, R: Optional[float]):
    if spec.case == INTERVAL:
        return 0.0, float(spec.b), spec.alpha_bar, spec.beta_bar
    if R is None:
        R = spectral_radius(potential)
    if not R > 0:
        raise InputError("truncation radius must be positive")
    if spec.case == HALF_LINE:
        return 0.0, float(R), spec.alpha_bar, None
    return -float(R), float(R), None, None


def _tag(param):
    if param is None:
        return "dirichlet (truncation)"
    if param == -math.inf:
        return "dirichlet"
    return f"robin({param:g})"


def discretize(
    spec: DomainSpec,
    potential: PotentialSpec,
    model: Optional[CovarianceModel] = None,
    n: int = 512,
    R: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
) -> DiscreteOperator:
    """Tridiagonal finite-difference operator, optionally with one noise draw.

    ``noise`` (cell averages) takes precedence over drawing from ``model``
    with ``rng``; with neither the operator is deterministic.
    """
    if n < MIN_NODES:
        raise InputError(f"need at least {MIN_NODES} grid nodes")
    lo, hi, left, right = _grid(spec, potential, R)
    h = (hi - lo) / n
    x = lo + (np.arange(n) + 0.5) * h
    diag = np.full(n, 1.0 / (h * h)) + potential(x)
    diag[0] += _end_correction(left, h)
    diag[-1] += _end_correction(right, h)
    if noise is None and model is not None and rng is not None and not model.is_zero:
        L = psd_factor(uniform_gram(n, h, model)) / h
        noise = L @ rng.standard_normal(L.shape[1])
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != (n,):
            raise InputError("noise vector does not match the grid")
        diag = diag + noise
    off = np.full(n - 1, -0.5 / (h * h))
    return DiscreteOperator(lo, hi, h, diag, off, _tag(left), _tag(right))


# --------------------------------------------------------------------------
# Sturm sequence bisection
# --------------------------------------------------------------------------


def _pivmin(e2: np.ndarray) -> float:
    return np.finfo(float).tiny * max(1.0, float(e2.max(initial=0.0)))


def _counts(d: np.ndarray, e2: np.ndarray, sigma: np.ndarray, pivmin: float) -> np.ndarray:
    """Number of eigenvalues below ``sigma`` for each row of ``d`` (shape (B, n)).

    ``sigma`` has shape (B, S); the LDL^T pivots of ``T - sigma`` are scanned
    and tiny pivots are replaced by ``-pivmin``.
    """
    q = d[:, :1] - sigma
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    cnt = (q < 0).astype(np.int64)
    for i in range(1, d.shape[1]):
        q = (d[:, i : i + 1] - sigma) - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        cnt += q < 0
    return cnt


def sturm_count(op: DiscreteOperator, sigma) -> np.ndarray:
    """Number of eigenvalues of ``op`` strictly below each shift."""
    e2 = op.off_diagonal**2
    s = np.atleast_1d(np.asarray(sigma, dtype=float))[None, :]
    return _counts(op.diagonal[None, :], e2, s, _pivmin(e2))[0]


def _gershgorin(d: np.ndarray, e: np.ndarray):
    r = np.zeros(d.shape)
    r[:, :-1] += np.abs(e)
    r[:, 1:] += np.abs(e)
    lo = (d - r).min(axis=1)
    hi = (d + r).max(axis=1)
    pad = 2.0 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi)) + 1e-300
    return lo - pad, hi + pad


def eigenvalues_batch(diagonals: np.ndarray, off_diagonal: np.ndarray, k: int, abs_tol: float = 1e-13) -> np.ndarray:
    """``k`` smallest eigenvalues of many tridiagonals sharing one off-diagonal.

    Bisection on all (matrix, index) pairs at once; each bracket is shrunk
    until its width is below ``abs_tol + 4 eps |lambda|``.
    """
    d = np.atleast_2d(np.asarray(diagonals, dtype=float))
    B, n = d.shape
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, {n}]")
    e = np.asarray(off_diagonal, dtype=float)
    if e.shape != (n - 1,):
        raise InputError("off-diagonal length must be n - 1")
    e2 = e * e
    piv = _pivmin(e2)
    glo, ghi = _gershgorin(d, np.broadcast_to(e, (B, n - 1)))
    lo = np.repeat(glo[:, None], k, axis=1)
    hi = np.repeat(ghi[:, None], k, axis=1)
    target = np.arange(k)[None, :]
    scale = np.maximum(np.abs(glo), np.abs(ghi))[:, None]
    width0 = float((hi - lo).max())
    tol = abs_tol + 4.0 * np.finfo(float).eps * float(scale.max())
    n_iter = max(1, int(math.ceil(math.log2(max(width0 / tol, 2.0)))) + 2)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        above = _counts(d, e2, mid, piv) > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if float((hi - lo).max()) <= tol:
            break
    return np.sort(0.5 * (lo + hi), axis=1)


def eigenvalues(op: DiscreteOperator, k: Optional[int] = None) -> np.ndarray:
    """The ``k`` smallest eigenvalues (all when ``k`` is None), ascending."""
    k = op.n if k is None else int(k)
    return eigenvalues_batch(op.diagonal[None, :], op.off_diagonal, k)[0]


def _traces(diagonals: np.ndarray, off: np.ndarray, t: float, full: bool) -> np.ndarray:
    d = np.atleast_2d(diagonals)
    n = d.shape[1]
    if full:
        lam = eigenvalues_batch(d, off, n)
        return np.exp(-t * lam).sum(axis=1)
    lam1 = eigenvalues_batch(d, off, 1)[:, 0]
    # remaining terms are below exp(-t lam1) * exp(-37) in total
    cut = lam1 + (math.log(n) + TRACE_CUTOFF_DECADES) / t
    e2 = off * off
    m = _counts(d, e2, cut[:, None], _pivmin(e2))[:, 0]
    k = int(max(1, m.max()))
    lam = eigenvalues_batch(d, off, k)
    keep = np.arange(k)[None, :] < m[:, None]
    keep[:, 0] = True
    return np.where(keep, np.exp(-t * lam), 0.0).sum(axis=1)


def direct_trace(op: DiscreteOperator, t: float, full: bool = False) -> float:
    """``sum_k exp(-t lambda_k)``.

    Eigenvalues above ``lambda_1 + (log n + 37)/t`` are skipped unless
    ``full``; their total contribution is below ``1e-16`` relative.
    """
    if not t > 0:
        raise InputError("direct_trace needs t > 0")
    return float(_traces(op.diagonal, op.off_diagonal, t, full)[0])


def direct_variance(
    t: float,
    spec: DomainSpec,
    potential: PotentialSpec,
    model: CovarianceModel,
    n_realizations: int,
    rng: np.random.Generator,
    n: int = 256,
    R: Optional[float] = None,
    threads: int = 1,
    chunk: int = 100,
) -> TraceMoments:
    """Mean and variance of the FD trace over independent noise draws.

    All noise is drawn up front from ``rng``; the eigenvalue work is split
    into fixed chunks so the result does not depend on ``threads``.
    """
    if n_realizations < 100:
        raise InputError("direct_variance needs at least 100 realizations")
    base = discretize(spec, potential, None, n, R)
    if model.is_zero:
        tr = direct_trace(base, t)
        return TraceMoments(tr, 0.0, 0.0, 0.0, n_realizations, t)
    L = psd_factor(uniform_gram(n, base.h, model)) / base.h
    xi = rng.standard_normal((n_realizations, L.shape[1])) @ L.T
    diags = base.diagonal[None, :] + xi
    parts = [diags[i : i + chunk] for i in range(0, n_realizations, chunk)]

    def work(block):
        return _traces(block, base.off_diagonal, t, False)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(work, parts))
    else:
        out = [work(p) for p in parts]
    return moments_from_samples(np.concatenate(out), t)


def truncation_check(
    t: float, spec: DomainSpec, potential: PotentialSpec, n: int = 1024, R: Optional[float] = None, factor: float = 1.5
) -> tuple[float, float]:
    """Noiseless traces at radius ``R`` and ``factor * R`` (same spacing)."""
    if spec.case == INTERVAL:
        raise InputError("truncation check applies to unbounded domains only")
    R = spectral_radius(potential) if R is None else R
    a = direct_trace(discretize(spec, potential, None, n, R), t)
    b = direct_trace(discretize(spec, potential, None, int(round(n * factor)), factor * R), t)
    return a, b
