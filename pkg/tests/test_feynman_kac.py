import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fkrigidity.domain import DomainSpec, make_potential
from fkrigidity.errors import ConfigurationError, InputError
from fkrigidity.feynman_kac import (
    SimParams,
    abcd_batch,
    abcd_sample,
    bc_moment_check,
    d_bound_scan,
    quadrature_grid,
    trace_mean,
    trace_moments,
    trace_variance,
    truncation_radius,
    variance_scan,
)
from fkrigidity.noise import make_model

DIR = DomainSpec.interval(1.0, -math.inf, -math.inf)
NEU = DomainSpec.interval(1.0)
ZERO = make_potential("zero", DIR)
NONE = make_model("none")
FAST = SimParams(n_paths=400)


def dirichlet_trace(t):
    return sum(math.exp(-t * math.pi**2 * k * k / 2) for k in range(1, 80))


def test_zero_potential_gives_zero_a(rng):
    s = abcd_sample(0.3, 0.6, 0.2, DIR, ZERO, make_model("white"), FAST, rng)
    assert s.A == 0.0 and s.C >= 0


def test_constant_covariance_functionals(rng):
    t = 0.3
    s = abcd_sample(0.2, 0.7, t, NEU, ZERO, make_model("bounded_const"), FAST, rng)
    assert s.C == pytest.approx(t * t, rel=1e-12) and s.D == pytest.approx(t * t, rel=1e-12)
    r = abcd_batch(0.2, 0.7, t, NEU, ZERO, make_model("bounded_const"), SimParams(n_paths=50), rng)
    np.testing.assert_allclose(r["D"], t * t, rtol=1e-12)
    np.testing.assert_allclose(r["C"], t * t, rtol=1e-12)


def test_harmonic_potential_term_negative(rng):
    s = abcd_sample(0.5, -0.5, 0.2, DomainSpec.full_line(), make_potential("harmonic"), NONE, FAST, rng)
    assert s.A < 0 and s.D == 0.0


def test_robin_boundary_term(rng):
    spec = DomainSpec.interval(1.0, 2.0, 0.0)
    r = abcd_batch(0.0, 0.0, 0.2, spec, make_potential("zero", spec), NONE, SimParams(n_paths=200), rng)
    assert np.all(r["B"] >= 0) and r["B"].mean() > 0


@given(st.integers(0, 2**31), st.sampled_from(["white", "fractional", "bounded_gaussian", "lp_power", "bounded_triangle"]), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_d_bounded_by_2c(seed, name, x, y):
    rng = np.random.default_rng(seed)
    r = abcd_batch(x, y, 0.2, NEU, ZERO, make_model(name), SimParams(n_paths=20), rng)
    assert np.all(r["C"] >= 0)
    assert np.all(np.abs(r["D"]) <= 2 * r["C"] + 1e-12)
    s = abcd_sample(x, y, 0.2, NEU, ZERO, make_model(name), FAST, rng)
    assert abs(s.D) <= 2 * s.C + 1e-12


def test_separated_paths_have_zero_d(rng):
    spec = DomainSpec.full_line()
    model = make_model("bounded_triangle", K=0.2)
    r = abcd_batch(-1.0, 1.0, 0.05, spec, make_potential("harmonic"), model, SimParams(n_paths=2000), rng)
    sep = r["gap"] > 0.2
    assert sep.sum() > 1000
    assert np.all(r["D"][sep] == 0.0)


def test_missing_growth_rejected(rng):
    with pytest.raises(ConfigurationError):
        trace_mean(0.5, DomainSpec.full_line(), make_potential("zero"), NONE, FAST, rng)
    with pytest.raises(ConfigurationError):
        abcd_sample(0, 0, 0.5, DomainSpec.half_line(), make_potential("zero", DomainSpec.half_line()), NONE, FAST, rng)


def test_truncation_radius():
    assert truncation_radius(0.5, make_potential("harmonic")) == pytest.approx(math.sqrt(4 * math.log(1e10)))
    with pytest.raises(ConfigurationError):
        truncation_radius(0.01, make_potential("abs_pow", kappa=1e-4, a=1.0))


def test_quadrature_grid_weights():
    g = quadrature_grid(0.5, DIR, ZERO, SimParams())
    assert g.nodes.size == 64 and g.dx == pytest.approx(1 / 64)
    assert np.all(g.weights > 0)


def test_dirichlet_trace_without_noise(rng):
    t = 0.5
    m = trace_mean(t, DIR, ZERO, NONE, SimParams(n_paths=1500), rng)
    assert m.mean > 0
    assert abs(m.mean - dirichlet_trace(t)) < 3 * m.stderr_mean + 1e-4


def test_harmonic_trace_without_noise(rng):
    t = 0.5
    m = trace_mean(t, DomainSpec.full_line(), make_potential("harmonic"), NONE, SimParams(n_paths=300), rng)
    exact = math.exp(-t / math.sqrt(2)) / (1 - math.exp(-t * math.sqrt(2)))
    assert abs(m.mean - exact) < 3 * m.stderr_mean + 1e-3


def test_zero_noise_variance_is_zero(rng):
    v = trace_variance(0.3, DIR, ZERO, NONE, FAST, rng)
    assert v.variance == 0.0
    scan = variance_scan([0.1, 0.2, 0.3, 0.4], DIR, ZERO, NONE, SimParams(n_paths=50), rng)
    assert np.all(scan.estimate == 0) and scan.fit.degenerate


def test_rank_one_variance(rng):
    t = 0.5
    m, v = trace_moments(t, DIR, ZERO, make_model("bounded_const"), SimParams(n_paths=2000), rng)
    pred = (math.exp(t * t) - 1) * m.mean**2
    se = math.hypot(v.stderr_variance, 2 * (math.exp(t * t) - 1) * m.mean * m.stderr_mean)
    assert abs(v.variance - pred) < 3 * se


def test_symmetric_and_full_evaluations_agree():
    model = make_model("bounded_gaussian")
    a = trace_variance(0.3, DIR, ZERO, model, SimParams(n_paths=1000), np.random.default_rng(1))
    b = trace_variance(0.3, DIR, ZERO, model, SimParams(n_paths=1000, symmetric=True), np.random.default_rng(2))
    assert abs(a.variance - b.variance) < 3 * math.hypot(a.stderr_variance, b.stderr_variance)


def test_deterministic_and_thread_invariant():
    model = make_model("white")
    runs = [
        trace_moments(0.2, NEU, ZERO, model, SimParams(n_paths=100, threads=th), np.random.default_rng(9))
        for th in (1, 1, 3)
    ]
    assert runs[0] == runs[1] == runs[2]


def test_stderr_scaling():
    model = make_model("white")
    se = [trace_variance(0.2, NEU, ZERO, model, SimParams(n_paths=n), np.random.default_rng(n)).stderr_variance for n in (200, 1800)]
    assert 2.0 < se[0] / se[1] < 4.5


def test_quadrature_refinement(rng):
    a = trace_mean(0.3, DIR, ZERO, NONE, SimParams(n_paths=800), rng)
    b = trace_mean(0.3, DIR, ZERO, NONE, SimParams(n_paths=800, dx=1 / 128), rng)
    assert abs(a.mean - b.mean) < 3 * math.hypot(a.stderr_mean, b.stderr_mean)


def test_variance_scan_input_checks(rng):
    with pytest.raises(InputError):
        variance_scan([0.1, 0.2, 0.3], DIR, ZERO, NONE, FAST, rng)
    with pytest.raises(InputError):
        SimParams(n_paths=1)


def test_desk_checks(rng):
    model = make_model("white")
    bc = bc_moment_check([0.05, 0.1], NEU, ZERO, model, SimParams(n_paths=200), rng, n_points=3)
    assert all(np.isfinite(bc["exp4C"])) and all(v >= 1 for v in bc["exp4B"])
    scan = d_bound_scan([0.05, 0.1, 0.2, 0.4], NEU, ZERO, model, SimParams(n_paths=200), rng, n_points=3)
    assert np.all(np.isfinite(scan.estimate)) and scan.fit.slope > 0
