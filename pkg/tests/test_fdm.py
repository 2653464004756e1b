import math

import numpy as np
import pytest

from fracpde.fdm import (
    Grid,
    ImplicitStepper,
    PdeSpec,
    SimulationError,
    assemble_frac_operator,
    boundary_slope,
    flux_operator,
    neumann_row,
    read_field_csv,
    simulate,
    upwind_operator,
    write_field_csv,
)
from fracpde.green import PhysicalParams


def test_grid_properties():
    g = Grid(nx=11, nt=5, T=2.0, L=0.5)
    assert g.dx == pytest.approx(0.05)
    assert g.dt == pytest.approx(0.5)
    assert g.x[-1] == 0.5 and g.t[-1] == 2.0
    assert g.cfl(1.0, 1.0) == pytest.approx(0.5 / 0.05**2)
    with pytest.raises(ValueError):
        Grid(nx=4)
    with pytest.raises(ValueError):
        Grid(T=0.0)


def test_operator_at_alpha_one_is_laplacian():
    g = Grid(nx=21)
    A = assemble_frac_operator(1.0, g)
    dx2 = g.dx**2
    for i in range(1, g.nx - 1):
        row = np.zeros(g.nx)
        row[i - 1 : i + 2] = np.array([1.0, -2.0, 1.0]) / dx2
        assert np.allclose(A[i], row, rtol=1e-12, atol=1e-9)
    assert not A[0].any() and not A[-1].any()


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_operator_on_cube(alpha):
    g = Grid(nx=201)
    x = g.x
    got = assemble_frac_operator(alpha, g) @ x**3
    exact = math.gamma(4) / math.gamma(3 - alpha) * x ** (2 - alpha)
    assert np.max(np.abs(got[1:-1] - exact[1:-1])) < 2e-3


def test_fluxes_of_linear_function():
    # the Caputo derivative of x is x^(1-alpha)/Gamma(2-alpha); fluxes sit at the midpoints
    alpha, n = 0.4, 51
    dx = 1 / (n - 1)
    F = flux_operator(alpha, n, dx) @ np.linspace(0, 1, n)
    mid = (np.arange(n - 1) + 0.5) * dx
    assert np.allclose(F, mid ** (1 - alpha) / math.gamma(2 - alpha), rtol=1e-12)


def test_boundary_rows():
    dx = 0.1
    x = np.linspace(0, 1, 11)
    assert neumann_row(11, dx) @ (x**2 + 3 * x) == pytest.approx(3.0)
    assert boundary_slope(x**2, dx) == pytest.approx(2.0)
    assert boundary_slope(x**2 + x, dx, side="left") == pytest.approx(1.0)


def test_upwind_exact_for_linear():
    x = np.linspace(0, 1, 11)
    H = np.where(x < 0.5, 1.0, -2.0)
    D = upwind_operator(H, x[1] - x[0])
    assert np.allclose((D @ (4 * x))[1:-1], 4 * H[1:-1])


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0])
def test_discrete_operator_is_stable(alpha):
    g = Grid(nx=81)
    st = ImplicitStepper(PdeSpec(PhysicalParams(k0=1.0), alpha), g)
    M = st.system_matrix(1.0, 0.0)  # identity interior, boundary rows
    A = assemble_frac_operator(alpha, g)[1:-1, 1:-1]
    assert np.max(np.linalg.eigvals(A).real) < 0
    assert np.linalg.matrix_rank(M) == g.nx


def test_constant_state_is_preserved():
    g = Grid(nx=41, nt=51, T=0.5)
    f = simulate(PdeSpec(PhysicalParams(k0=1.0), 0.6), g, lambda x: 1.5 + 0 * x,
                 neumann=lambda t: 0.0, dirichlet=lambda t: 1.5)
    assert np.allclose(f.data, 1.5, atol=1e-12)


def test_heat_mode_decay_converges():
    a = 1.0
    exact = lambda x, t: np.cos(math.pi * x / 2) * math.exp(-a * math.pi**2 * t / 4)
    errs = []
    for nt in (51, 101, 201):
        g = Grid(nx=101, nt=nt, T=0.5)
        f = simulate(PdeSpec(PhysicalParams(k0=a), 1.0), g, lambda x: np.cos(math.pi * x / 2))
        errs.append(np.max(np.abs(f.data[-1] - exact(g.x, 0.5))))
    assert errs[-1] < 2e-3
    assert errs[0] / errs[1] > 1.7 and errs[1] / errs[2] > 1.6


def test_neumann_condition_is_imposed():
    g = Grid(nx=41, nt=21, T=0.2)
    f = simulate(PdeSpec(PhysicalParams(k0=1.0), 0.5), g, np.zeros(g.nx), neumann=lambda t: 2.0 * t)
    for j in range(1, g.nt):
        assert neumann_row(g.nx, g.dx) @ f.data[j] == pytest.approx(2.0 * g.t[j], abs=1e-10)
        assert f.data[j, -1] == 0.0


def test_zero_feedback_enters_first_column():
    g = Grid(nx=11)
    J = np.linspace(0, 1, 11)
    base = ImplicitStepper(PdeSpec(PhysicalParams(k0=2.0), 0.5), g).system_matrix(2.0, 0.1)
    fb = ImplicitStepper(PdeSpec(PhysicalParams(k0=2.0), 0.5, zero_feedback=J), g).system_matrix(2.0, 0.1)
    diff = fb - base
    assert np.allclose(diff[1:-1, 0], 0.2 * J[1:-1])
    assert not diff[1:-1, 1:].any()


def test_forcing_and_injections():
    g = Grid(nx=21, nt=11, T=0.1)
    prof = np.ones(g.nx)
    s1 = PdeSpec(PhysicalParams(k0=1.0), 0.5, forcing=lambda x, t: 0 * x + t)
    s2 = PdeSpec(PhysicalParams(k0=1.0), 0.5, injections=[(prof, lambda t: t)])
    f1 = simulate(s1, g, np.zeros(g.nx))
    f2 = simulate(s2, g, np.zeros(g.nx))
    assert np.array_equal(f1.data, f2.data)
    assert f1.data[-1, 10] > 0


def test_non_finite_state_raises():
    g = Grid(nx=11, nt=3)
    st = ImplicitStepper(PdeSpec(PhysicalParams(k0=1.0), 0.5), g)
    with pytest.raises(SimulationError):
        st.step(np.zeros(11), g.dt, 0.0, float("nan"))


def test_field_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    x, t = np.linspace(0, 1, 7), np.linspace(0, 1, 4)
    data = rng.standard_normal((4, 7)) * 1e3
    path = tmp_path / "f.csv"
    write_field_csv(path, x, t, data)
    x2, t2, d2 = read_field_csv(path)
    assert np.array_equal(x, x2) and np.array_equal(t, t2) and np.array_equal(data, d2)
