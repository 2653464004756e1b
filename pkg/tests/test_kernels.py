import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpde import kernels

py = kernels.backend_module("python")
needs_compiled = pytest.mark.skipif(not kernels.COMPILED_AVAILABLE, reason="extension not built")


def both():
    return py, kernels.backend_module("cython")


sizes = st.integers(2, 300)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(sizes, st.integers(0, 2**32 - 1))
def test_l1_caputo_agrees(n, seed):
    rng = np.random.default_rng(seed)
    f, b = rng.standard_normal(n), rng.random(n)
    a, c = both()
    assert np.allclose(a.l1_caputo(f, b, 1.7), c.l1_caputo(f, b, 1.7), rtol=1e-12, atol=1e-12)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(sizes, st.integers(0, 2**32 - 1))
def test_product_convolution_agrees(n, seed):
    rng = np.random.default_rng(seed)
    f, c0, c1 = rng.standard_normal(n), rng.random(n + 1), rng.random(n + 1)
    a, c = both()
    assert np.allclose(a.product_convolution(f, c0, c1), c.product_convolution(f, c0, c1), rtol=1e-12, atol=1e-12)


@needs_compiled
@settings(max_examples=20, deadline=None)
@given(st.integers(2, 120), st.integers(0, 2**32 - 1))
def test_flux_matrix_agrees(n, seed):
    w = np.random.default_rng(seed).random(n)
    a, c = both()
    assert np.array_equal(a.flux_matrix(w, n), c.flux_matrix(w, n))


@needs_compiled
@pytest.mark.parametrize("power", [1, 3, 7])
def test_volterra_poly_agrees(power):
    p = np.cos(np.linspace(0, 4, 257))
    a, c = both()
    assert np.allclose(a.volterra_poly(p, 1 / 256, power), c.volterra_poly(p, 1 / 256, power), rtol=1e-12, atol=1e-14)


@needs_compiled
def test_green_sum_agrees():
    rng = np.random.default_rng(5)
    z, s = rng.uniform(-5, 5, 37), np.linspace(-10, 10, 501)
    w, gr, gi = rng.random(501), rng.standard_normal(501), rng.standard_normal(501)
    a, c = both()
    ra, ia = a.green_sum(z, s, w, gr, gi)
    rc, ic = c.green_sum(z, s, w, gr, gi)
    assert np.allclose(ra, rc, atol=1e-11) and np.allclose(ia, ic, atol=1e-11)


def test_volterra_poly_reference():
    x = np.linspace(0, 1, 101)
    got = py.volterra_poly(np.ones(101), 0.01, 1)
    assert np.allclose(got, x**2 / 2, atol=1e-12)


def test_flux_matrix_structure():
    F = py.flux_matrix(np.array([1.0, 0.5, 0.25]), 3)
    assert F.shape == (2, 3)
    assert np.allclose(F, [[-1.0, 1.0, 0.0], [-0.5, -0.5, 1.0]])


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.backend_module("fortran")


def test_environment_forces_pure_python():
    env = dict(os.environ, FRACPDE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import fracpde; print(fracpde.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
