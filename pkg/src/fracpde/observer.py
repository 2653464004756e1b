"""Adaptive observer for the state and the two disturbances.

Observer (P_tilde = P_hat - P, theta = (d1, d2)):

    P_hat_t = a d/dx C D^alpha P_hat + f theta_hat_1/(C rho) + Lambda(x) theta_hat'
              - a H1(x) (P_hat(0) - z_m) - a H2(x) (C D^alpha P_hat(0) - y_m),
    P_hat_x(0) = theta_hat_2,   P_hat(1) = u.

The gains are H1 = V^-1{kappa}, with kappa(x) = Gamma(N+1)/Gamma(N+1-alpha) x^(N-alpha),
and H2 = -V^-1{x^N}, where V is the Volterra transform with kernel (x - y)^N.
The auxiliary states Lambda = (lambda1, lambda2) absorb the effect of the
disturbances on the error, so that w = P_tilde - Lambda theta_tilde obeys the same
injected equation with homogeneous boundary data. In the default "decoupled" mode

    lambda_t = a d/dx C D^alpha lambda - a H1 lambda(0) - a H2 C D^alpha lambda(0) + source,

with source f/(C rho) for lambda1 and 0 for lambda2; lambda1_x(0) = 0, lambda2_x(0) = 1,
lambda(1) = 0. The "advection" mode replaces the injection terms by the transport
term -H1(x) lambda_x.

Estimates follow a least-squares law with forgetting factor one,

    theta_hat' = -R Lambda(0) P_tilde(0) / (1 + |Lambda(0)|^2),
    R' = R - R Lambda(0) Lambda(0)^T R / (1 + |Lambda(0)|^2),

integrated by RK4 with Lambda(0) and P_tilde(0) held over the step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .control import PolyKernel, VolterraTransform, trace_profile
from .fdm import Grid, ImplicitStepper, PdeSpec
from .fractional import _alpha
from .green import PhysicalParams

__all__ = [
    "ObserverGains",
    "ObserverState",
    "compute_gains",
    "adaptive_rhs",
    "adaptive_update",
    "AdaptiveObserver",
]

log = logging.getLogger(__name__)


@dataclass
class ObserverGains:
    H1: np.ndarray
    H2: np.ndarray


@dataclass
class ObserverState:
    P_hat: np.ndarray
    theta_hat: np.ndarray
    R_mat: np.ndarray
    Lambda: np.ndarray  # shape (2, nx)
    Lambda_prev: Optional[np.ndarray] = None
    theta_rate: np.ndarray = field(default_factory=lambda: np.zeros(2))
    innovation: float = 0.0  # P_hat(0) - z_m at the current time level


def compute_gains(kernel: PolyKernel, alpha, grid: Grid) -> ObserverGains:
    """Injection gains from the inverse Volterra transform of the two trace profiles."""
    x = grid.x
    vt = VolterraTransform(kernel, grid.nx, grid.L)
    H1 = vt.inverse(trace_profile(kernel, alpha, x))
    H2 = -vt.inverse(kernel.coeff * x**kernel.power)
    return ObserverGains(H1=H1, H2=H2)


def adaptive_rhs(theta, R, lam0, err0, sign: float = -1.0):
    """Right-hand sides of the estimate and gain equations."""
    lam0 = np.asarray(lam0, dtype=np.float64)
    den = 1.0 + float(lam0 @ lam0)
    Rl = R @ lam0
    return sign * Rl * err0 / den, R - np.outer(Rl, Rl) / den


def _spd_guard(R: np.ndarray) -> np.ndarray:
    R = 0.5 * (R + R.T)
    w, V = np.linalg.eigh(R)
    floor = 1e-12 * max(float(np.trace(R)), 1e-300)
    if np.min(w) < floor:
        log.warning("gain matrix lost positive definiteness (min eigenvalue %.3e); flooring", np.min(w))
        w = np.maximum(w, floor)
        R = (V * w) @ V.T
    return R


def adaptive_update(theta, R, lam0, err0, dt: float, sign: float = -1.0):
    """One RK4 step of the estimate and gain equations with frozen regressor and innovation."""
    theta = np.asarray(theta, dtype=np.float64)
    k1 = adaptive_rhs(theta, R, lam0, err0, sign)
    k2 = adaptive_rhs(theta + 0.5 * dt * k1[0], R + 0.5 * dt * k1[1], lam0, err0, sign)
    k3 = adaptive_rhs(theta + 0.5 * dt * k2[0], R + 0.5 * dt * k2[1], lam0, err0, sign)
    k4 = adaptive_rhs(theta + dt * k3[0], R + dt * k3[1], lam0, err0, sign)
    theta_new = theta + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    R_new = R + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return theta_new, _spd_guard(R_new)


class AdaptiveObserver:
    """Owns the observer state and advances it one time step at a time."""

    def __init__(self, params: PhysicalParams, alpha, grid: Grid, f: np.ndarray,
                 kernel: PolyKernel = PolyKernel(1), lambda_mode: str = "decoupled",
                 P_hat0=None, theta0=None, R0=None, law_sign: float = -1.0):
        if lambda_mode not in ("decoupled", "advection"):
            raise ValueError(f"unknown lambda mode {lambda_mode!r}")
        self.params = params
        self.alpha = _alpha(alpha)
        self.grid = grid
        self.f = np.asarray(f, dtype=np.float64)
        self.kernel = kernel
        self.lambda_mode = lambda_mode
        self.law_sign = float(law_sign)
        self.gains = compute_gains(kernel, self.alpha, grid)
        nx = grid.nx
        cr = params.C * params.rho
        # the Caputo derivative at x = 0 vanishes for the discrete operator, so the H2
        # injection only carries the measured y_m; it is kept as an explicit source
        self.obs_stepper = ImplicitStepper(PdeSpec(params, self.alpha, zero_feedback=self.gains.H1), grid)
        if lambda_mode == "decoupled":
            lam_spec = PdeSpec(params, self.alpha, zero_feedback=self.gains.H1)
        else:
            lam_spec = PdeSpec(params, self.alpha, advection_gain=self.gains.H1)
        self.lam_stepper = ImplicitStepper(lam_spec, grid)
        self._lam1_src = self.f / cr
        P_hat = np.zeros(nx) if P_hat0 is None else np.asarray(P_hat0, dtype=np.float64) * np.ones(nx)
        theta = np.zeros(2) if theta0 is None else np.asarray(theta0, dtype=np.float64)
        R = np.eye(2) if R0 is None else np.asarray(R0, dtype=np.float64)
        # Lambda(0) = 0 at the start, so no initial innovation is needed
        self.state = ObserverState(P_hat=P_hat.copy(), theta_hat=theta.copy(), R_mat=R.copy(),
                                   Lambda=np.zeros((2, nx)))

    @property
    def lambda0(self) -> np.ndarray:
        return self.state.Lambda[:, 0].copy()

    def theta_rate(self) -> np.ndarray:
        """theta_hat' from the adaptive law at the current time level."""
        st = self.state
        return adaptive_rhs(st.theta_hat, st.R_mat, st.Lambda[:, 0], st.innovation, self.law_sign)[0]

    def step(self, t_next: float, z_m: float, y_m: float, u: float, dt: Optional[float] = None) -> ObserverState:
        """Advance the observer to ``t_next`` given the new measurements and boundary input."""
        dt = self.grid.dt if dt is None else dt
        st = self.state
        a_d = self.params.diffusivity(t_next)
        cr = self.params.C * self.params.rho
        rate = self.theta_rate()
        extra = (
            self.f * st.theta_hat[0] / cr
            + st.Lambda.T @ rate
            + a_d * self.gains.H1 * z_m
            + a_d * self.gains.H2 * y_m
        )
        P_hat = self.obs_stepper.step(st.P_hat, t_next, st.theta_hat[1], u, dt=dt, extra=extra)
        lam_prev = st.Lambda.copy()
        lam1 = self.lam_stepper.step(lam_prev[0], t_next, 0.0, 0.0, dt=dt, extra=self._lam1_src)
        lam2 = self.lam_stepper.step(lam_prev[1], t_next, 1.0, 0.0, dt=dt)
        Lam = np.vstack([lam1, lam2])
        innovation = float(P_hat[0] - z_m)
        theta, R = adaptive_update(st.theta_hat, st.R_mat, Lam[:, 0], innovation, dt, self.law_sign)
        self.state = ObserverState(P_hat=P_hat, theta_hat=theta, R_mat=R, Lambda=Lam,
                                   Lambda_prev=lam_prev, theta_rate=rate, innovation=innovation)
        return self.state

    def lyapunov(self, theta_true) -> float:
        """V1 = theta_tilde^T R^-1 theta_tilde."""
        tt = self.state.theta_hat - np.asarray(theta_true, dtype=np.float64)
        return float(tt @ np.linalg.solve(self.state.R_mat, tt))

    def w0(self, P0_ref: float, theta_true) -> float:
        """w(0, t) = P_hat(0) - P0_ref - Lambda(0) theta_tilde.

        Pass the true P(0, t) for the state error or the measurement z_m for the
        innovation seen by the adaptive law; they coincide without noise.
        """
        st = self.state
        tt = st.theta_hat - np.asarray(theta_true, dtype=np.float64)
        return float(st.P_hat[0] - P0_ref - st.Lambda[:, 0] @ tt)
