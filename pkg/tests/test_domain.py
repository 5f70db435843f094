import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from fkrigidity.domain import (
    DomainSpec,
    Growth,
    PotentialSpec,
    domain_from_config,
    gaussian_kernel,
    image_count,
    kernel_bound_check,
    make_potential,
    potential_from_config,
    transition_kernel,
)
from fkrigidity.errors import ConfigurationError, InputError

INV_SQRT_2PI = 1 / math.sqrt(2 * math.pi)


def test_gaussian_kernel_values():
    assert gaussian_kernel(1.0, 0.0) == pytest.approx(0.3989423, abs=1e-7)
    assert gaussian_kernel(4.0, 0.0) == pytest.approx(0.1994711, abs=1e-7)
    assert gaussian_kernel(0.3, 0.7) == gaussian_kernel(0.3, -0.7)


def test_gaussian_kernel_rejects_bad_time():
    with pytest.raises(InputError):
        gaussian_kernel(0.0, 1.0)


def test_transition_kernel_cases():
    assert transition_kernel(DomainSpec.full_line(), 1, 0, 0) == pytest.approx(0.3989423, abs=1e-7)
    assert transition_kernel(DomainSpec.half_line(), 1, 0, 0) == pytest.approx(0.7978846, abs=1e-7)


def test_out_of_domain_point_raises():
    with pytest.raises(InputError):
        transition_kernel(DomainSpec.interval(1.0), 0.5, 1.5, 0.2)
    with pytest.raises(InputError):
        transition_kernel(DomainSpec.half_line(), 0.5, -0.1, 0.2)


@given(st.floats(0.01, 3.0), st.floats(0, 1), st.floats(0, 1))
def test_interval_kernel_symmetric(t, x, y):
    spec = DomainSpec.interval(1.0)
    assert transition_kernel(spec, t, x, y) == pytest.approx(transition_kernel(spec, t, y, x), rel=1e-13)
    assert transition_kernel(spec, t, x, y) > 0


@pytest.mark.parametrize("t", [0.01, 0.3, 2.0])
def test_interval_mass_conserved(t):
    spec = DomainSpec.interval(1.0)
    for x in (0.0, 0.3, 1.0):
        m, _ = integrate.quad(lambda y: transition_kernel(spec, t, x, y), 0, 1, epsabs=1e-13, limit=200)
        assert m == pytest.approx(1.0, abs=1e-10)


def test_chapman_kolmogorov_interval():
    spec = DomainSpec.interval(1.0)
    s, t, x, y = 0.07, 0.2, 0.15, 0.8
    v, _ = integrate.quad(lambda z: transition_kernel(spec, s, x, z) * transition_kernel(spec, t - s, z, y), 0, 1, epsabs=1e-13, limit=200)
    assert v == pytest.approx(transition_kernel(spec, t, x, y), abs=1e-8)


def test_image_count_rule():
    assert image_count(1.0, 1.0) == math.ceil(math.sqrt(2 * math.log(1e15)) / 2) + 1


@pytest.mark.parametrize("spec", [DomainSpec.full_line(), DomainSpec.half_line(), DomainSpec.interval(1.0)])
def test_kernel_bounds(spec):
    rep = kernel_bound_check(spec, [0.01, 0.1, 0.5, 1.0])
    assert rep.ok
    assert rep.c >= INV_SQRT_2PI * (1 - 1e-12)


def test_kernel_bound_constants():
    full = kernel_bound_check(DomainSpec.full_line(), [0.1, 1.0])
    assert full.c == pytest.approx(INV_SQRT_2PI) and full.C == pytest.approx(INV_SQRT_2PI)
    half = kernel_bound_check(DomainSpec.half_line(), [0.1, 1.0])
    assert half.C == pytest.approx(2 * INV_SQRT_2PI, rel=1e-12)


def test_kernel_bound_check_rejects_large_t():
    with pytest.raises(InputError):
        kernel_bound_check(DomainSpec.full_line(), [2.0])


def test_domain_encoding():
    d = DomainSpec.interval(2.0, -math.inf, 0.5)
    assert d.is_dirichlet(0.0) and not d.is_dirichlet(2.0)
    assert d.boundary_points == (0.0, 2.0)
    cfg = domain_from_config({"case": "interval", "b": 2.0, "alpha_bar": "dirichlet", "beta_bar": 0.5})
    assert cfg == d
    with pytest.raises(ConfigurationError):
        domain_from_config({"case": "interval", "b": -1.0})


def test_potential_presets():
    h = make_potential("harmonic")
    assert h(np.array([2.0]))[0] == 4.0 and h.growth == Growth(1.0, 2.0, 0.0)
    a = make_potential("abs_pow", kappa=2.0, a=1.5)
    assert a(np.array([1.0]))[0] == pytest.approx(2.0**1.5)
    z = make_potential("zero")
    assert z.is_zero
    lin = make_potential("linear_half", DomainSpec.half_line())
    assert lin(np.array([3.0]))[0] == 1.5
    with pytest.raises(ConfigurationError):
        make_potential("linear_half", DomainSpec.full_line())


def test_bad_growth_certificate_rejected():
    with pytest.raises(ConfigurationError):
        PotentialSpec(lambda x: np.abs(x), growth=Growth(1.0, 2.0, 0.0), name="weak")


def test_potential_config():
    p = potential_from_config({"name": "abs_pow", "kappa": 1.0, "a": 2.0, "nu": 0.0})
    assert p.growth.a == 2.0
