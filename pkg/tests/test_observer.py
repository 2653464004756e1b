import logging

import numpy as np
import pytest

from fracpde.control import PolyKernel, VolterraTransform, trace_profile
from fracpde.fdm import Grid, ImplicitStepper, PdeSpec, neumann_row
from fracpde.green import PhysicalParams
from fracpde.observer import AdaptiveObserver, _spd_guard, adaptive_rhs, adaptive_update, compute_gains
from fracpde.scenario import Scenario, default_config, run_scenario

PARAMS = PhysicalParams(k0=5.0, rho=1.0726)


def test_gains_reproduce_trace_profiles():
    g = Grid(nx=201)
    k = PolyKernel(1)
    gains = compute_gains(k, 0.5, g)
    vt = VolterraTransform(k, g.nx)
    assert np.max(np.abs(vt.forward(gains.H1) - trace_profile(k, 0.5, g.x))) < 1e-8
    assert np.max(np.abs(vt.forward(gains.H2) + g.x**3)) < 1e-8


def test_zero_regressor_freezes_estimate():
    R = np.array([[2.0, 0.3], [0.3, 1.0]])
    th, Rn = adaptive_update(np.array([0.4, -1.0]), R, np.zeros(2), 5.0, 0.1)
    assert np.array_equal(th, [0.4, -1.0])
    assert np.allclose(Rn, R * np.exp(0.1), rtol=1e-6)


def test_zero_innovation_contracts_along_regressor():
    lam = np.array([1.0, 2.0])
    dth, dR = adaptive_rhs(np.zeros(2), np.eye(2), lam, 0.0)
    assert not dth.any()
    _, Rn = adaptive_update(np.zeros(2), np.eye(2), lam, 0.0, 0.5)
    u = lam / np.linalg.norm(lam)
    perp = np.array([-u[1], u[0]])
    assert u @ Rn @ u < perp @ Rn @ perp


def test_update_keeps_gain_positive_definite():
    rng = np.random.default_rng(1)
    th, R = np.zeros(2), np.eye(2)
    for _ in range(500):
        th, R = adaptive_update(th, R, rng.standard_normal(2) * 10, rng.standard_normal(), 0.05)
        assert np.allclose(R, R.T)
        assert np.min(np.linalg.eigvalsh(R)) > 0


def test_spd_guard_floors_eigenvalues(caplog):
    with caplog.at_level(logging.WARNING):
        R = _spd_guard(np.array([[1.0, 0.0], [0.0, -1e-3]]))
    assert np.min(np.linalg.eigvalsh(R)) > 0
    assert "positive definiteness" in caplog.text


def test_perfect_start_stays_on_plant():
    g = Grid(nx=101, nt=101, T=0.1)
    f = np.zeros(g.nx)
    P0 = np.sin(np.pi * g.x)
    obs = AdaptiveObserver(PARAMS, 0.5, g, f, P_hat0=P0)
    plant = ImplicitStepper(PdeSpec(PARAMS, 0.5), g)
    P = P0.copy()
    for t in g.t[1:]:
        P = plant.step(P, t, 0.0, 0.0)
        st = obs.step(t, P[0], 0.0, 0.0)
    assert np.max(np.abs(st.P_hat - P)) < 1e-10
    assert np.max(np.abs(st.theta_hat)) < 1e-14


@pytest.mark.parametrize("mode", ["decoupled", "advection"])
def test_auxiliary_states(mode):
    g = Grid(nx=101, nt=301, T=3.0)
    obs = AdaptiveObserver(PARAMS, 0.5, g, np.zeros(g.nx), lambda_mode=mode)
    running = []
    for t in g.t[1:]:
        st = obs.step(t, 0.0, 0.0, 0.0)
        assert not st.Lambda[0].any()
        assert neumann_row(g.nx, g.dx) @ st.Lambda[1] == pytest.approx(1.0, abs=1e-9)
        running.append(np.max(np.abs(st.Lambda)))
    running = np.maximum.accumulate(running)
    assert running[-1] == pytest.approx(running[len(running) // 2], rel=1e-3)


def test_unknown_lambda_mode():
    with pytest.raises(ValueError):
        AdaptiveObserver(PARAMS, 0.5, Grid(nx=21), np.zeros(21), lambda_mode="ghost")


def _observe(law_sign=-1.0, **changes):
    cfg = default_config().replace(nx=101, nt=601, **changes)
    sc = Scenario.from_config(cfg)
    import fracpde.scenario as scen

    orig = scen.AdaptiveObserver

    class Signed(orig):
        def __init__(self, *a, **k):
            super().__init__(*a, law_sign=law_sign, **k)

    scen.AdaptiveObserver = Signed
    try:
        return run_scenario(sc, "observe")
    finally:
        scen.AdaptiveObserver = orig


def test_observer_converges_on_coarse_grid():
    m = _observe().metrics
    assert m["ptilde_ratio"] < 0.05
    assert m["theta_log_slope"] < 0
    assert m["lyapunov_fraction"] >= 0.99


def test_reversed_law_sign_does_not_converge():
    """theta_hat' = +R Lambda P_tilde / (1 + |Lambda|^2) drives the estimate away."""
    m = _observe(law_sign=+1.0).metrics
    assert m["theta_log_slope"] > 0


def test_persistent_disturbance_keeps_lyapunov_inequality():
    m = _observe(n=2, S=[0.0, 0.0, 0.0, -0.5], V0=[1.0, 0.5], a=[1.0, 0.0], b=[0.0, 1.0],
                 c=[1.0, 0.0], q=[0.0, 0.0], controller="none", sigma=0.01, seed=4).metrics
    assert m["lyapunov_fraction"] >= 0.99
    assert m["ptilde_ratio"] < 0.05
