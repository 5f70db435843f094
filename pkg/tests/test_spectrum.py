import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import eigvalsh_tridiagonal

from fkrigidity.domain import DomainSpec, make_potential
from fkrigidity.errors import ConfigurationError, InputError
from fkrigidity.noise import make_model
from fkrigidity.spectrum import (
    DiscreteOperator,
    direct_trace,
    direct_variance,
    discretize,
    eigenvalues,
    eigenvalues_batch,
    sturm_count,
    truncation_check,
)

DIR = DomainSpec.interval(1.0, -math.inf, -math.inf)
ZERO = make_potential("zero", DIR)


def op_from(d, e):
    d = np.asarray(d, float)
    return DiscreteOperator(0.0, 1.0, 1.0, d, np.asarray(e, float), "x", "x")


def test_diagonal_matrix():
    lam = eigenvalues(op_from([3.0, -1.0, 2.0], [0.0, 0.0]))
    np.testing.assert_allclose(lam, [-1.0, 2.0, 3.0], atol=1e-12)


def test_two_by_two():
    lam = eigenvalues(op_from([1.5, 1.5], [-0.7]))
    np.testing.assert_allclose(lam, [0.8, 2.2], atol=1e-12)


def test_dirichlet_laplacian():
    lam = eigenvalues(discretize(DIR, ZERO, n=2048), 5)
    exact = math.pi**2 * np.arange(1, 6) ** 2 / 2
    np.testing.assert_allclose(lam, exact, rtol=1e-3)
    assert lam[0] == pytest.approx(4.9348, rel=1e-3)


def test_harmonic_oscillator():
    op = discretize(DomainSpec.full_line(), make_potential("harmonic"), n=4000, R=10.0)
    np.testing.assert_allclose(eigenvalues(op, 3), [0.70711, 2.12132, 3.53553], rtol=1e-3)


def test_neumann_ground_state_zero():
    neu = DomainSpec.interval(1.0)
    lam = eigenvalues(discretize(neu, make_potential("zero", neu), n=512), 2)
    assert abs(lam[0]) < 1e-10
    assert lam[1] == pytest.approx(math.pi**2 / 2, rel=1e-4)


def test_agrees_with_lapack(rng):
    d, e = rng.normal(size=200), rng.normal(size=199)
    np.testing.assert_allclose(eigenvalues(op_from(d, e)), eigvalsh_tridiagonal(d, e), atol=1e-10)


def test_direct_trace_values():
    assert direct_trace(op_from(np.zeros(5), np.zeros(4)), 1.0) == pytest.approx(5.0)
    op = discretize(DIR, ZERO, n=2048)
    exact = sum(math.exp(-0.5 * math.pi**2 * k * k / 2) for k in range(1, 60))
    assert direct_trace(op, 0.5) == pytest.approx(exact, rel=1e-6)
    lam1 = eigenvalues(op, 1)[0]
    assert direct_trace(op, 50.0) == pytest.approx(math.exp(-50 * lam1), rel=1e-10)


def test_full_and_cut_traces_agree():
    op = discretize(DIR, ZERO, n=256)
    assert direct_trace(op, 0.05) == pytest.approx(direct_trace(op, 0.05, full=True), rel=1e-14)


def test_constant_noise_shifts_spectrum(rng):
    base = discretize(DIR, ZERO, n=128)
    noisy = discretize(DIR, ZERO, make_model("bounded_const"), n=128, rng=rng)
    shift = noisy.diagonal - base.diagonal
    assert np.ptp(shift) < 1e-10
    np.testing.assert_allclose(eigenvalues(noisy, 10), eigenvalues(base, 10) + shift[0], atol=1e-10)


def test_zero_noise_variance():
    m = direct_variance(0.5, DIR, ZERO, make_model("none"), 100, np.random.default_rng(0))
    assert m.variance == 0.0


def test_rank_one_lognormal(rng):
    t = 0.5
    m = direct_variance(t, DIR, ZERO, make_model("bounded_const"), 2000, rng, n=128)
    tr0 = direct_trace(discretize(DIR, ZERO, n=128), t)
    var = tr0**2 * math.exp(t * t) * (math.exp(t * t) - 1)
    assert abs(m.variance - var) < 3 * m.stderr_variance
    assert abs(m.mean - tr0 * math.exp(t * t / 2)) < 3 * m.stderr_mean


def test_direct_variance_thread_invariant():
    a = direct_variance(0.5, DIR, ZERO, make_model("white"), 200, np.random.default_rng(4), n=64, threads=1)
    b = direct_variance(0.5, DIR, ZERO, make_model("white"), 200, np.random.default_rng(4), n=64, threads=3)
    assert a == b


def test_errors():
    with pytest.raises(InputError):
        discretize(DIR, ZERO, n=8)
    with pytest.raises(ConfigurationError):
        discretize(DomainSpec.full_line(), make_potential("zero"), n=64)
    with pytest.raises(InputError):
        direct_variance(0.5, DIR, ZERO, make_model("white"), 50, np.random.default_rng(0))
    with pytest.raises(InputError):
        discretize(DomainSpec.interval(1.0, 100.0, 0.0), ZERO, n=16)


def test_truncation_stable():
    a, b = truncation_check(0.5, DomainSpec.full_line(), make_potential("harmonic"), n=1024, R=8.0)
    assert abs(a - b) / b < 1e-6


def test_grid_refinement_second_order():
    harm = make_potential("harmonic")
    lam = [eigenvalues(discretize(DomainSpec.full_line(), harm, n=n, R=8.0), 3) for n in (400, 800, 1600)]
    d1 = np.abs(lam[0] - lam[1])
    d2 = np.abs(lam[1] - lam[2])
    assert np.all(d2 < d1 / 3)


@given(st.integers(0, 2**31))
def test_monotone_under_diagonal_bumps(seed):
    rng = np.random.default_rng(seed)
    d, e = rng.normal(size=40), rng.normal(size=39)
    bump = np.abs(rng.normal(size=40))
    a, b = eigenvalues(op_from(d, e)), eigenvalues(op_from(d + bump, e))
    assert np.all(b >= a - 1e-10)


@given(st.integers(0, 2**31))
def test_rayleigh_bound(seed):
    rng = np.random.default_rng(seed)
    op = op_from(rng.normal(size=30), rng.normal(size=29))
    v = rng.normal(size=30)
    assert eigenvalues(op, 1)[0] <= v @ op.dense() @ v / (v @ v) + 1e-10


@given(st.integers(0, 2**31), st.floats(-5, 5))
def test_sturm_count_consistent(seed, sigma):
    rng = np.random.default_rng(seed)
    op = op_from(rng.normal(size=25), rng.normal(size=24))
    lam = eigvalsh_tridiagonal(op.diagonal, op.off_diagonal)
    if np.min(np.abs(lam - sigma)) > 1e-9:
        assert sturm_count(op, sigma)[0] == np.sum(lam < sigma)


def test_batch_matches_single(rng):
    d = rng.normal(size=(4, 30))
    e = rng.normal(size=29)
    batch = eigenvalues_batch(d, e, 5)
    for row, lam in zip(d, batch):
        np.testing.assert_allclose(lam, eigenvalues(op_from(row, e), 5), atol=1e-12)
