import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpde.fractional import SampledFunction
from fracpde.green import (
    GreenAccuracyError,
    GreenDomainError,
    GreenQuadrature,
    PhysicalParams,
    Z_SERIES,
    analytic_solution,
    green_eval,
    green_mass,
    green_scaled,
    green_tail_series,
    green_tilde,
    stability_bound,
    tail_mass_estimate,
)


def heat(x, t, a):
    return np.exp(-(x**2) / (4 * a * t)) / np.sqrt(4 * math.pi * a * t)


def test_params_validation():
    with pytest.raises(ValueError):
        PhysicalParams(k0=0.0)
    p = PhysicalParams(k0=2.0, k_of_t=lambda t: 1.0)
    assert not p.constant_k
    with pytest.raises(ValueError):
        p.k(0.0)
    assert PhysicalParams(k0=3.0, C=2.0, mu=0.5).diffusivity() == pytest.approx(3.0)


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_heat_kernel_reduction(t):
    p = PhysicalParams(k0=2.0)
    x = np.linspace(-1.0, 1.0, 21)
    got = green_eval(x, t, 1.0, p)
    exact = heat(x, t, 2.0)
    big = exact > 1e-8 * exact.max()
    assert np.max(np.abs(got[big] / exact[big] - 1)) < 1e-7


def test_scalar_in_scalar_out(params):
    assert isinstance(green_eval(0.1, 0.5, 0.5, params), float)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_mass_is_one(alpha, params):
    t = 0.1
    h = (params.diffusivity() * t) ** (1 / (alpha + 1))
    z = 20.0
    while tail_mass_estimate(z, alpha) > 1e-6:
        z *= 2
    m = green_mass(t, alpha, params, -Z_SERIES * h, z * h)
    assert abs(m - 1) < 1e-4


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_kernel_is_nonnegative_and_real(alpha):
    z = np.linspace(-15, 40, 1101)
    g, imag = green_scaled(z, alpha, full_output=True)
    assert np.min(g) > -1e-10
    assert imag < 1e-10


@pytest.mark.parametrize("alpha", [0.4, 0.7])
def test_tail_series_joins_fourier_branch(alpha):
    left = green_scaled(np.array([Z_SERIES - 1e-9]), alpha)[0]
    right = green_tail_series(np.array([Z_SERIES + 1e-9]), alpha)[0]
    assert right == pytest.approx(left, rel=1e-6)


def test_explicit_rules_agree(params):
    x = np.array([-0.2, 0.0, 0.3])
    ga = green_eval(x, 0.2, 0.5, params)
    gt = green_eval(x, 0.2, 0.5, params, quad=GreenQuadrature(60.0, 2**15, "trapezoid"))
    gg = green_eval(x, 0.2, 0.5, params, quad=GreenQuadrature(60.0, 4096, "gauss"))
    assert np.allclose(ga, gt, atol=1e-8)
    assert np.allclose(ga, gg, atol=1e-8)


def test_short_window_is_rejected(params):
    with pytest.raises(GreenAccuracyError):
        green_eval(0.0, 0.01, 0.5, params, quad=GreenQuadrature(5.0, 256))


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_nonpositive_time(t, params):
    with pytest.raises(GreenDomainError):
        green_eval(0.0, t, 0.5, params)


@settings(max_examples=200)
@given(st.floats(-50, 50), st.floats(0.0, 5.0), st.floats(0.05, 1.0))
def test_transform_is_contraction(s, t, alpha):
    val = green_tilde(np.array([s]), t, alpha, PhysicalParams(k0=1.0))[0]
    assert abs(val) <= 1.0 + 1e-15


def test_transform_at_zero_frequency(params):
    assert green_tilde(np.array([0.0]), 1.0, 0.5, params)[0] == 1.0


def test_quadrature_validation():
    with pytest.raises(ValueError):
        GreenQuadrature(10.0, 16)
    with pytest.raises(ValueError):
        GreenQuadrature(10.0, 128, "simpson")


def test_constant_data_is_steady(params):
    x = np.linspace(0.1, 0.9, 5)
    got = analytic_solution(None, lambda y: 2.0 + 0 * y, 2.0, x, 0.3, 0.5, params)
    assert np.allclose(got, 2.0, atol=1e-10)


def test_gaussian_spreads_like_heat_equation():
    p = PhysicalParams(k0=1.0)
    w, t = 0.05, 0.01
    x = np.linspace(0.3, 0.7, 9)
    got = analytic_solution(None, lambda y: np.exp(-((y - 0.5) ** 2) / (2 * w * w)), 0.0, x, t, 1.0, p)
    s2 = w * w + 2 * t
    exact = np.sqrt(w * w / s2) * np.exp(-((x - 0.5) ** 2) / (2 * s2))
    assert np.max(np.abs(got - exact)) < 1e-6


def test_analytic_solution_needs_constant_k():
    p = PhysicalParams(k0=1.0, k_of_t=lambda t: 2.0)
    with pytest.raises(ValueError):
        analytic_solution(None, np.sin, 0.0, 0.5, 0.1, 0.5, p)


def test_stability_bound_closed_form():
    alpha, r = 0.5, 2.0
    p = PhysicalParams(k0=3.0)
    q = SampledFunction(np.ones(2001), 1 / 2000)
    j1 = 1 / ((alpha + 2) * math.gamma(alpha + 2))
    expected = r / (2 * math.pi) / (3.0 * math.sin(math.pi * alpha / 2)) * (2 * j1 + 1) + 0.25
    assert stability_bound(q, r, 0.25, alpha, p) == pytest.approx(expected, rel=1e-6)


def test_stability_bound_trivial_cases():
    p = PhysicalParams(k0=1.0)
    q0 = SampledFunction(np.zeros(11), 0.1)
    assert stability_bound(q0, 1.0, 0.0, 0.5, p) == 0.0
    q1 = SampledFunction(np.ones(11), 0.1)
    assert stability_bound(q1, 0.0, -0.3, 0.5, p) == 0.3
