"""Monte Carlo estimates of the trace mean and variance of the random semigroup.

The noise average is done in closed form: for a centered Gaussian field
``E exp(-xi(f)) = exp(||f||_gamma^2 / 2)``.  With ``Z``, ``Zbar`` independent
conditioned loops at ``x`` and ``y``,

    E Tr  = int Pi(t;x,x) E[exp(A + B + C)] dx,
    Var Tr = iint Pi(t;x,x) Pi(t;y,y) E[exp(A + B + C) (exp(D) - 1)] dx dy,

where ``A`` is minus the potential integral, ``B`` the boundary terms, ``C``
half the summed squared noise seminorms of the local times and ``D`` their
noise inner product (the one-path version of ``C`` is used for the mean).

Both integrals use the midpoint rule.  Two independent path sets ``S`` and
``Sbar`` are drawn with one seeded stream per (set, node); the k-th paths of
all nodes form one sample of the whole double sum, so the per-k totals are
i.i.d. and give honest standard errors.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import FULL_LINE, HALF_LINE, INTERVAL, DomainSpec, PotentialSpec, transition_kernel
from .errors import ConfigurationError, InputError, NumericError
from .localtime import gamma_norms_sq
from .moments import TraceMoments, moments_from_samples
from .noise import CovarianceModel, StepFunction, inner_product, seminorm_sq, uniform_gram
from .paths import (
    boundary_local_times,
    default_bin_width,
    default_n_steps,
    dirichlet_log_weights,
    occupation_batch,
    sample_bridges,
    time_integral,
)
from .rigidity import ScanResult

__all__ = [
    "SimParams",
    "FunctionalSample",
    "QuadratureGrid",
    "truncation_radius",
    "quadrature_grid",
    "abcd_sample",
    "abcd_batch",
    "trace_mean",
    "trace_variance",
    "trace_moments",
    "variance_scan",
    "bc_moment_check",
    "d_bound_scan",
    "MAX_RADIUS",
]

MAX_RADIUS = 1e4
TRUNCATION_EPS = 1e-10


@dataclass(frozen=True)
class SimParams:
    """Discretization and sampling controls; ``None`` selects the defaults."""

    n_paths: int = 2000
    n_steps: Optional[int] = None
    bin_width: Optional[float] = None
    dx: Optional[float] = None
    R: Optional[float] = None
    threads: int = 1
    symmetric: bool = False
    chunk: int = 500

    def __post_init__(self):
        if self.n_paths < 2:
            raise InputError("n_paths must be at least 2")
        if self.threads < 1:
            raise InputError("threads must be at least 1")


@dataclass(frozen=True)
class FunctionalSample:
    A: float
    B: float
    C: float
    D: float


# --------------------------------------------------------------------------
# spatial quadrature
# --------------------------------------------------------------------------


def truncation_radius(t: float, potential: PotentialSpec, eps: float = TRUNCATION_EPS) -> float:
    """Radius beyond which ``exp(-t (|kappa x|^a - nu) / 2)`` drops below ``eps``."""
    if potential.growth is None:
        raise ConfigurationError("unbounded domains need a growth certificate for V")
    k, a, nu = potential.growth
    R = (2.0 * math.log(1.0 / eps) / t + nu) ** (1.0 / a) / k
    if not R <= MAX_RADIUS:
        raise ConfigurationError(f"growth too weak: truncation radius {R:.3g} exceeds {MAX_RADIUS:g}")
    return R


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    dx: float
    weights: np.ndarray


def quadrature_grid(t: float, spec: DomainSpec, potential: PotentialSpec, params: SimParams) -> QuadratureGrid:
    """Midpoint nodes with weights ``dx * Pi(t; x, x)``."""
    if spec.case == INTERVAL:
        lo, hi = 0.0, float(spec.b)
        dx = params.dx or min(math.sqrt(t) / 2.0, spec.b / 64.0)
    else:
        R = params.R or truncation_radius(t, potential)
        lo, hi = (-R, R) if spec.case == FULL_LINE else (0.0, R)
        dx = params.dx or min(math.sqrt(t) / 2.0, 0.1)
    n = max(1, int(math.ceil((hi - lo) / dx - 1e-9)))
    dx = (hi - lo) / n
    nodes = lo + (np.arange(n) + 0.5) * dx
    return QuadratureGrid(nodes, dx, dx * transition_kernel(spec, t, nodes, nodes))


# --------------------------------------------------------------------------
# per-node path functionals
# --------------------------------------------------------------------------


def _check_model_inputs(spec: DomainSpec, potential: PotentialSpec):
    if spec.case != INTERVAL and potential.growth is None:
        raise ConfigurationError("unbounded domains need a growth certificate for V")


def _boundary_terms(spec: DomainSpec, batch) -> np.ndarray:
    B = np.zeros(len(batch))
    if spec.case == FULL_LINE:
        return B
    for c in spec.boundary_points:
        p = spec.boundary_parameter(c)
        if p != -math.inf and p != 0.0:
            B += p * boundary_local_times(batch.values, batch.t, c)
    if spec.dirichlet_points:
        B += dirichlet_log_weights(batch.free_values, batch.t, spec)
    return B


@dataclass
class _NodePaths:
    k0: int
    dens: np.ndarray
    A: np.ndarray
    B: np.ndarray
    norm2: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def _node_paths(spec, potential, model, t, x, n, n_steps, h, rng) -> _NodePaths:
    batch = sample_bridges(spec, x, x, t, n_steps, rng, n)
    k0, dens = occupation_batch(batch.values, t, h)
    A = np.zeros(n) if potential.is_zero else -time_integral(batch.values, t, potential)
    B = _boundary_terms(spec, batch)
    norm2 = np.zeros(n) if model.is_zero else gamma_norms_sq(dens, h, model)
    return _NodePaths(k0, dens, A, B, norm2, batch.values.min(axis=1), batch.values.max(axis=1))


def _streams(seed: int, s: int, n_nodes: int):
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(s, i))) for i in range(n_nodes)]


def _resolve(t, spec, params):
    n_steps = params.n_steps or default_n_steps(t)
    h = params.bin_width or default_bin_width(t, spec)
    return n_steps, h


def _place(nodes: Sequence[_NodePaths], sl: slice, k0: int, nb: int) -> np.ndarray:
    """Stack node densities (paths ``sl``) on a common lattice: shape (nodes, paths, bins)."""
    m = len(range(*sl.indices(nodes[0].dens.shape[0])))
    out = np.zeros((len(nodes), m, nb))
    for i, nd in enumerate(nodes):
        off = nd.k0 - k0
        out[i, :, off : off + nd.dens.shape[1]] = nd.dens[sl]
    return out


def _separated(a: _NodePaths, b: _NodePaths, sl, K) -> np.ndarray:
    gap = np.maximum(b.lo[sl] - a.hi[sl], a.lo[sl] - b.hi[sl])
    return gap > K


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


def trace_moments(
    t: float,
    spec: DomainSpec,
    potential: PotentialSpec,
    model: CovarianceModel,
    params: SimParams,
    rng: np.random.Generator,
    variance: bool = True,
) -> tuple[TraceMoments, TraceMoments]:
    """Mean and variance of ``Tr exp(-tH)`` from one pair of path sets.

    Returns ``(mean_moments, variance_moments)``; the first summarizes the
    2n i.i.d. totals ``sum_i w_i exp(E_i)``, the second the n i.i.d. double
    sums whose mean estimates the variance (its ``variance`` field is that
    estimate).  With ``variance=False`` the second is None.
    """
    if not t > 0:
        raise InputError("t must be positive")
    _check_model_inputs(spec, potential)
    grid = quadrature_grid(t, spec, potential, params)
    n_steps, h = _resolve(t, spec, params)
    n = params.n_paths
    seed = int(rng.integers(0, 2**63 - 1))
    N = grid.nodes.size

    def run_set(s):
        streams = _streams(seed, s, N)

        def one(i):
            return _node_paths(spec, potential, model, t, grid.nodes[i], n, n_steps, h, streams[i])

        if params.threads > 1:
            with ThreadPoolExecutor(params.threads) as ex:
                return list(ex.map(one, range(N)))
        return [one(i) for i in range(N)]

    S = run_set(0)
    Sb = run_set(1)

    def log_u(nodes):
        E = np.stack([nd.A + nd.B + 0.5 * nd.norm2 for nd in nodes])  # (N, n)
        return E + np.log(grid.weights)[:, None]

    lu, lub = log_u(S), log_u(Sb)
    with np.errstate(over="ignore"):
        u, ub = np.exp(lu), np.exp(lub)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ub))):
        raise NumericError("path weights overflow: exp(A + B + C) is not finite")
    totals = np.concatenate([u.sum(axis=0), ub.sum(axis=0)])
    mean_m = moments_from_samples(totals, t)
    if not variance:
        return mean_m, None
    G = _double_sums(S, Sb, u, ub, model, h, params)
    var_m = moments_from_samples(G, t)
    var_m = TraceMoments(var_m.mean, var_m.mean, var_m.stderr_mean, var_m.stderr_mean, n, t)
    return mean_m, var_m


def _double_sums(S, Sb, u, ub, model, h, params) -> np.ndarray:
    """Per-k samples ``sum_ij u_i ub_j expm1(D_ij)``."""
    N, n = u.shape
    if model.is_zero:
        return np.zeros(n)
    k0 = min(nd.k0 for nd in S + Sb)
    k1 = max(nd.k0 + nd.dens.shape[1] for nd in S + Sb)
    nb = k1 - k0
    W = uniform_gram(nb, h, model)
    K = model.support_radius
    out = np.empty(n)
    iu, ju = np.triu_indices(N)
    for start in range(0, n, params.chunk):
        sl = slice(start, min(n, start + params.chunk))
        L = _place(S, sl, k0, nb)
        Lb = _place(Sb, sl, k0, nb)
        M = Lb @ W  # (N, m, nb)
        if params.symmetric:
            D = np.einsum("pkb,pkb->kp", L[iu], M[ju])  # (m, pairs)
            if K is not None:
                for p, (i, j) in enumerate(zip(iu, ju)):
                    D[:, p] = np.where(_separated(S[i], Sb[j], sl, K), 0.0, D[:, p])
            wgt = np.where(iu == ju, 1.0, 2.0)
            out[sl] = np.einsum("kp,kp->k", np.expm1(D) * wgt, u[iu, sl].T * ub[ju, sl].T)
        else:
            D = np.einsum("ikb,jkb->kij", L, M)  # (m, N, N)
            if K is not None:
                for i in range(N):
                    for j in range(N):
                        sep = _separated(S[i], Sb[j], sl, K)
                        if sep.any():
                            D[sep, i, j] = 0.0
            out[sl] = np.einsum("ki,kij,kj->k", u[:, sl].T, np.expm1(D), ub[:, sl].T)
    if not np.all(np.isfinite(out)):
        raise NumericError("variance integrand is not finite")
    return out


def trace_mean(t, spec, potential, model, params: SimParams, rng) -> TraceMoments:
    """Monte Carlo estimate of ``E Tr exp(-tH)`` (``mean`` and ``stderr_mean``).

    ``variance`` is the sample variance of the per-sample totals, not the
    variance of the trace.
    """
    return trace_moments(t, spec, potential, model, params, rng, variance=False)[0]


def trace_variance(t, spec, potential, model, params: SimParams, rng) -> TraceMoments:
    """Monte Carlo estimate of ``Var Tr exp(-tH)``.

    ``mean``/``variance`` both hold the variance estimate and
    ``stderr_mean``/``stderr_variance`` its Monte Carlo standard error.
    """
    return trace_moments(t, spec, potential, model, params, rng, variance=True)[1]


def variance_scan(
    t_list: Sequence[float],
    spec: DomainSpec,
    potential: PotentialSpec,
    model: CovarianceModel,
    params: SimParams,
    rng: np.random.Generator,
) -> ScanResult:
    """``trace_variance`` over ``t_list`` with a fitted log-log slope."""
    t_list = np.asarray(t_list, dtype=float)
    if t_list.size < 4 or np.any(t_list <= 0) or np.any(t_list > 1):
        raise InputError("variance_scan needs at least 4 t values in (0, 1]")
    est, se = [], []
    for t in t_list:
        m = trace_variance(float(t), spec, potential, model, params, rng)
        est.append(m.variance)
        se.append(m.stderr_variance)
    scan = ScanResult(t_list, est, se, np.full(t_list.size, params.n_paths), f"variance_{model.name}", meta={"case": spec.case})
    return scan.with_fit()


# --------------------------------------------------------------------------
# single samples and desk checks
# --------------------------------------------------------------------------


def _single_field(batch, i, h) -> StepFunction:
    k0, dens = occupation_batch(batch.values[i], batch.t, h)
    v = batch.values[i]
    return StepFunction(k0 * h, h, dens[0], (float(v.min()), float(v.max())))


def abcd_sample(x, y, t, spec, potential, model, params: SimParams, rng) -> FunctionalSample:
    """One joint draw of ``(A, B, C, D)`` for independent loops at ``x`` and ``y``."""
    _check_model_inputs(spec, potential)
    n_steps, h = _resolve(t, spec, params)
    zx = sample_bridges(spec, x, x, t, n_steps, rng, 1)
    zy = sample_bridges(spec, y, y, t, n_steps, rng, 1)
    A = 0.0
    if not potential.is_zero:
        A = -float(time_integral(zx.values, t, potential)[0] + time_integral(zy.values, t, potential)[0])
    B = float(_boundary_terms(spec, zx)[0] + _boundary_terms(spec, zy)[0])
    f, g = _single_field(zx, 0, h), _single_field(zy, 0, h)
    C = 0.5 * (seminorm_sq(f, model) + seminorm_sq(g, model))
    D = inner_product(f, g, model)
    return FunctionalSample(A, B, C, D)


def abcd_batch(x, y, t, spec, potential, model, params: SimParams, rng) -> dict:
    """Vectorized ``(A, B, C, D)`` draws plus the two path ranges.

    Returns a dict of arrays ``A, B, C, D, gap`` where ``gap`` is the distance
    between the ranges of the two paths (negative when they overlap).
    """
    _check_model_inputs(spec, potential)
    n_steps, h = _resolve(t, spec, params)
    n = params.n_paths
    a = _node_paths(spec, potential, model, t, x, n, n_steps, h, rng)
    b = _node_paths(spec, potential, model, t, y, n, n_steps, h, rng)
    k0 = min(a.k0, b.k0)
    nb = max(a.k0 + a.dens.shape[1], b.k0 + b.dens.shape[1]) - k0
    La = _place([a], slice(None), k0, nb)[0]
    Lb = _place([b], slice(None), k0, nb)[0]
    D = np.einsum("kb,kb->k", La, Lb @ uniform_gram(nb, h, model))
    gap = np.maximum(b.lo - a.hi, a.lo - b.hi)
    if model.support_radius is not None:
        D = np.where(gap > model.support_radius, 0.0, D)
    return {"A": a.A + b.A, "B": a.B + b.B, "C": 0.5 * (a.norm2 + b.norm2), "D": D, "gap": gap}


def bc_moment_check(
    t_list: Sequence[float],
    spec: DomainSpec,
    potential: PotentialSpec,
    model: CovarianceModel,
    params: SimParams,
    rng: np.random.Generator,
    n_points: int = 5,
) -> dict:
    """Sup over a start grid of ``E exp(4C)`` and ``E exp(4B)`` per t."""
    out = {"t": [], "exp4C": [], "exp4C_se": [], "exp4B": [], "exp4B_se": []}
    if spec.case == INTERVAL:
        xs = np.linspace(0.0, spec.b, n_points)
    elif spec.case == HALF_LINE:
        xs = np.linspace(0.0, 1.0, n_points)
    else:
        xs = np.linspace(-1.0, 1.0, n_points)
    for t in t_list:
        best_c, best_b = (-np.inf, 0.0), (-np.inf, 0.0)
        for x in xs:
            r = abcd_batch(x, x, t, spec, potential, model, params, rng)
            ec, eb = np.exp(4 * r["C"]), np.exp(4 * r["B"])
            mc = (ec.mean(), ec.std(ddof=1) / math.sqrt(ec.size))
            mb = (eb.mean(), eb.std(ddof=1) / math.sqrt(eb.size))
            best_c = max(best_c, mc)
            best_b = max(best_b, mb)
        out["t"].append(float(t))
        out["exp4C"].append(float(best_c[0]))
        out["exp4C_se"].append(float(best_c[1]))
        out["exp4B"].append(float(best_b[0]))
        out["exp4B_se"].append(float(best_b[1]))
    return out


def d_bound_scan(
    t_list: Sequence[float],
    spec: DomainSpec,
    potential: PotentialSpec,
    model: CovarianceModel,
    params: SimParams,
    rng: np.random.Generator,
    n_points: int = 5,
) -> ScanResult:
    """Sup over an (x, y) grid of ``E |exp(D) - 1|`` per t, with fitted slope."""
    if spec.case == INTERVAL:
        xs = np.linspace(0.0, spec.b, n_points)
    elif spec.case == HALF_LINE:
        xs = np.linspace(0.0, 1.0, n_points)
    else:
        xs = np.linspace(-1.0, 1.0, n_points)
    est, se = [], []
    for t in t_list:
        best = (-np.inf, 0.0)
        for x in xs:
            for y in xs:
                if y < x:
                    continue
                r = abcd_batch(x, y, t, spec, potential, model, params, rng)
                v = np.abs(np.expm1(r["D"]))
                best = max(best, (v.mean(), v.std(ddof=1) / math.sqrt(v.size)))
        est.append(best[0])
        se.append(best[1])
    scan = ScanResult(t_list, est, se, np.full(len(est), params.n_paths), f"d_bound_{model.name}")
    return scan.with_fit()
