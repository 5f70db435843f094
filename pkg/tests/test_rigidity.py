import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fkrigidity.domain import DomainSpec, Growth
from fkrigidity.errors import ConfigurationError, StatisticsError
from fkrigidity.noise import make_model
from fkrigidity.rigidity import (
    ScanResult,
    fit_exponent,
    growth_threshold,
    growth_verdict,
    predicted_exponent,
    rigidity_report,
)

T = np.array([0.05, 0.1, 0.2, 0.3, 0.4])
FULL, UNIT = DomainSpec.full_line(), DomainSpec.interval(1.0)


def scan(y, se=None):
    se = np.full_like(T, 0.0) if se is None else se
    return ScanResult(T, y, se, np.full(T.size, 100))


def test_exact_power():
    f = fit_exponent(scan(T**2))
    assert f.slope == pytest.approx(2.0, abs=1e-12) and f.r_squared == pytest.approx(1.0)


def test_noisy_power():
    rng = np.random.default_rng(1)
    y = 3 * T**1.5 * (1 + 0.01 * rng.normal(size=T.size))
    f = fit_exponent(scan(y, 0.01 * y))
    assert abs(f.slope - 1.5) < 0.05
    assert f.slope_ci_95[0] <= f.slope <= f.slope_ci_95[1]


def test_constant_series():
    assert fit_exponent(scan(np.full(T.size, 2.0))).slope == pytest.approx(0.0, abs=1e-12)


def test_degenerate_and_errors():
    assert fit_exponent(scan(np.zeros(T.size))).degenerate
    with pytest.raises(StatisticsError):
        fit_exponent(scan(np.array([1.0, -1.0, -2.0, 1.0, 2.0])))
    with pytest.raises(StatisticsError):
        fit_exponent(ScanResult(T[:3], T[:3], T[:3] * 0, [1, 1, 1]))
    f = fit_exponent(scan(np.array([-1.0, 1.0, 2.0, 3.0, 4.0])))
    assert f.dropped == 1


@given(st.floats(1e-3, 1e3))
def test_affine_equivariance(c):
    y = T**1.3 * np.array([1.0, 1.02, 0.97, 1.01, 0.99])
    a, b = fit_exponent(scan(y)), fit_exponent(scan(c * y))
    assert b.slope == pytest.approx(a.slope, abs=1e-9)
    assert b.intercept == pytest.approx(a.intercept + math.log(c), abs=1e-9)


def test_predicted_examples():
    assert predicted_exponent(UNIT, make_model("white")) == 0.5
    assert predicted_exponent(FULL, make_model("white", compact=False), Growth(1, 4)) == pytest.approx(0.0)
    tri = make_model("bounded_triangle", K=1.0)
    assert predicted_exponent(FULL, tri, Growth(1, 2 / 3)) == pytest.approx(0.0)
    with pytest.raises(ConfigurationError):
        predicted_exponent(FULL, make_model("white"), None)


@given(st.floats(0.2, 10), st.floats(0.2, 10), st.sampled_from(["white", "fractional", "bounded_gaussian", "bounded_triangle", "lp_power"]))
def test_predicted_monotone_in_growth(a1, a2, name):
    m = make_model(name)
    lo, hi = sorted([a1, a2])
    assert predicted_exponent(FULL, m, Growth(1, lo)) <= predicted_exponent(FULL, m, Growth(1, hi)) + 1e-12


@pytest.mark.parametrize("name", ["white", "fractional", "bounded_gaussian", "bounded_const", "bounded_triangle", "lp_power", "lp_log"])
def test_threshold_solves_zero_exponent(name):
    m = make_model(name)
    thr = growth_threshold(m)
    assert predicted_exponent(FULL, m, Growth(1, thr)) == pytest.approx(0.0, abs=1e-12)


def test_verdict_table():
    assert not growth_verdict(FULL, make_model("white"), Growth(1, 1)).condition_holds
    assert "not a non-rigidity proof" in growth_verdict(FULL, make_model("white"), Growth(1, 1)).reason
    assert growth_verdict(FULL, make_model("fractional", hurst=0.75), Growth(1, 3)).condition_holds
    assert growth_threshold(make_model("fractional", hurst=0.75)) == pytest.approx(2 / 0.75)
    assert growth_verdict(UNIT, make_model("white")).condition_holds
    assert growth_threshold(make_model("bounded_gaussian")) == 2.0
    assert growth_threshold(make_model("bounded_triangle")) == pytest.approx(2 / 3)


def test_report_cases():
    s = scan(0.3 * T**0.6, 0.01 * T).with_fit()
    doc, text = rigidity_report(UNIT, make_model("white"), None, [s])
    assert doc["verdict"]["condition_holds"] and doc["scans"][0]["status"] == "pass"
    assert "slope" in text
    zero = scan(np.zeros(T.size)).with_fit()
    doc, _ = rigidity_report(UNIT, make_model("none"), None, [zero])
    assert doc["scans"][0]["status"] == "degenerate"
    doc, text = rigidity_report(FULL, make_model("white"), Growth(1, 1), [s])
    assert "sufficient condition not met" in text and "not a non-rigidity proof" in text
    with pytest.raises(StatisticsError):
        rigidity_report(UNIT, make_model("white"), None, [])
