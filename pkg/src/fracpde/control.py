"""Backstepping tracking controllers.

Plant (after discretization in space):

    P_t = a d/dx C D^alpha P + f(x) d1(t)/(C rho),  P_x(0) = d2(t),  P(1) = u(t),  y = P_x(1),

with d1 = a.V, d2 = b.V, reference y_d = c.V and V' = S V.

Both controllers share the regulator map Pi (nx x n_V) solving

    Pi S = a A Pi + f a^T/(C rho),   Pi_x(0) = b^T,   Pi_x(1) = c^T,

so that P = Pi V is an exact discrete trajectory whose output equals y_d. The curve
M = V{Pi} (forward Volterra transform with kernel K(x, y) = (x - y)^(2m+1)) gives

    Volterra controller:     u = int_0^1 K(1, y) P_hat(y) dy + m^T V,   m^T = M(1),
    convolution controller:  u = int_0^t P_hat(1, tau) l(t - tau) dtau + m^T V,
                             m^T = Pi(1) S (S + gamma I)^-1 for l(s) = gamma e^(-gamma s).

Pi is solved mode by mode in the eigenbasis of S, so each solve is one dense
(nx x nx) linear system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .exosystem import Exosystem
from .fdm import Field, Grid, PdeSpec, assemble_frac_operator, neumann_row, simulate
from .fractional import _alpha, _alphas, gamma_fn, gamma_signed
from .green import PhysicalParams

__all__ = [
    "PolyKernel",
    "TransportKernel",
    "MCurve",
    "VolterraTransform",
    "kernel_residuals",
    "volterra_forward",
    "volterra_inverse",
    "trace_profile",
    "solve_regulator",
    "solve_M",
    "control_volterra",
    "control_convolution",
    "tracking_error_target",
]


@dataclass(frozen=True)
class PolyKernel:
    """K(x, y) = coeff (x - y)^(2m+1) on 0 <= y <= x <= 1."""

    m: int = 1
    coeff: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ValueError("m must be a non-negative integer")

    @property
    def power(self) -> int:
        return 2 * self.m + 1

    @staticmethod
    def _check(x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if np.any(y > x + 1e-15):
            raise ValueError("the kernel lives on y <= x")
        return x, y

    def __call__(self, x, y):
        x, y = self._check(x, y)
        return self.coeff * (x - y) ** self.power

    def frac_derivs(self, x, y, alpha):
        """(d/dx yD^alpha_x K, D^alpha_{y,x} d/dy K) from two independent closed forms.

        The first differentiates the power rule in x; the second integrates
        (eta - y)^(-alpha) against d^2/deta^2 K(x, eta) with a Beta function.
        """
        a = _alphas(alpha)
        x, y = self._check(x, y)
        N = self.power
        r = x - y
        left_c = gamma_fn(N + 1.0) / gamma_signed(N + 1.0 - a) * (N - a)
        right_c = N * (N - 1.0) * gamma_fn(N - 1.0) / gamma_signed(N - a) if N >= 2 else 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            pw = np.where(r > 0, r, 0.0) ** (N - 1.0 - a)
        if N == 1:
            # K is linear in y: its second derivative vanishes, the left form is a pure power
            right = np.zeros_like(pw)
            left = left_c * pw
        else:
            left = left_c * pw
            right = right_c * pw
        return self.coeff * left, self.coeff * right

    def trace(self, x, alpha):
        """Boundary profile Gamma(N+1)/Gamma(N+1-alpha) x^(N-alpha) picked up at y = 0."""
        a = _alphas(alpha)
        N = self.power
        x = np.asarray(x, dtype=np.float64)
        return self.coeff * gamma_fn(N + 1.0) / gamma_signed(N + 1.0 - a) * x ** (N - a)


def kernel_residuals(kernel: PolyKernel, x, y, alpha) -> dict:
    """Residuals of the kernel equation and its boundary conditions at the given points.

    ``alpha`` is a scalar or an array matching ``x`` and ``y``.

    pde:          d/dx yD^alpha_x K - D^alpha_{y,x} d/dy K
    rl_trace:     fractional integral of order 1 - alpha of K in x from y, at x = y
    caputo_trace: right Caputo derivative of K in y, at y = x
    diagonal:     K(x, x)
    base:         K(x, 0) - coeff x^(2m+1)  (the kernel must not vanish on y = 0)
    """
    a = _alphas(alpha)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    N = kernel.power
    left, right = kernel.frac_derivs(x, y, a)
    # J^(1-alpha) (x - y)^N = Gamma(N+1)/Gamma(N+2-alpha) (x - y)^(N+1-alpha), taken at x = y
    rl_trace = kernel.coeff * gamma_fn(N + 1.0) / gamma_fn(N + 2.0 - a) * np.zeros_like(x) ** (N + 1.0 - a)
    # unsigned right Caputo of K(x, .) at y: -N Gamma(N)/Gamma(N+1-alpha) (x - y)^(N - alpha), at y = x
    caputo_trace = -kernel.coeff * N * gamma_fn(float(N)) / gamma_fn(N + 1.0 - a) * np.zeros_like(x) ** (N - a)
    diagonal = kernel(x, x)
    base = kernel(x, np.zeros_like(x)) - kernel.coeff * x**N
    return {
        "pde": np.abs(left - right),
        "rl_trace": np.abs(rl_trace),
        "caputo_trace": np.abs(caputo_trace),
        "diagonal": np.abs(diagonal),
        "base": np.abs(base),
        "base_nonzero": bool(np.all(kernel(x[x > 0], np.zeros_like(x[x > 0])) != 0)),
    }


class VolterraTransform:
    """w = P - int_0^x K(x, y) P(y) dy on a uniform grid (trapezoid rule)."""

    def __init__(self, kernel: PolyKernel, nx: int, L: float = 1.0):
        self.kernel = kernel
        self.nx = nx
        self.dx = L / (nx - 1)
        x = np.linspace(0.0, L, nx)
        diff = x[:, None] - x[None, :]
        Kq = np.where(diff >= 0, kernel.coeff * np.abs(diff) ** kernel.power, 0.0) * self.dx
        Kq[:, 0] *= 0.5
        Kq[np.arange(nx), np.arange(nx)] *= 0.5
        Kq[0] = 0.0
        self.Kq = Kq
        self.matrix = np.eye(nx) - Kq

    def forward(self, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=np.float64)
        if P.ndim == 1:
            return P - self.kernel.coeff * kernels.volterra_poly(np.ascontiguousarray(P), self.dx, self.kernel.power)
        return self.matrix @ P

    def inverse(self, w: np.ndarray, method: str = "linear", tol: float = 1e-12, max_iter: int = 500) -> np.ndarray:
        """Solve the lower-triangular system, or sum the resolvent (Neumann) series."""
        w = np.asarray(w, dtype=np.float64)
        if method == "linear":
            from scipy.linalg import solve_triangular

            return solve_triangular(self.matrix, w, lower=True)
        if method == "resolvent":
            total = w.copy()
            term = w.copy()
            for _ in range(max_iter):
                term = self.Kq @ term
                total = total + term
                if np.max(np.abs(term)) < tol:
                    return total
            raise RuntimeError(f"resolvent series did not converge in {max_iter} terms")
        raise ValueError(f"unknown method {method!r}")


def volterra_forward(P, kernel: PolyKernel, L: float = 1.0) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    return VolterraTransform(kernel, P.shape[0], L).forward(P)


def volterra_inverse(w, kernel: PolyKernel, L: float = 1.0, method: str = "linear") -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    return VolterraTransform(kernel, w.shape[0], L).inverse(w, method=method)


def trace_profile(kernel: PolyKernel, alpha, x) -> np.ndarray:
    """kappa(x): the term a kappa(x) P(0, t) that the Volterra transform adds to the target system."""
    return kernel.trace(x, alpha)


@dataclass
class TransportKernel:
    """Time kernel l(tau, t) = l_hat(t - tau); the default is gamma exp(-gamma s)."""

    gamma: float = 5.0
    l_hat: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.l_hat is None:
            if not self.gamma > 0:
                raise ValueError("gamma must be positive")
            g = float(self.gamma)
            self.l_hat = lambda s: g * np.exp(-g * np.asarray(s, dtype=np.float64))

    @property
    def exponential(self) -> bool:
        return True

    def __call__(self, tau, t):
        return self.l_hat(np.asarray(t) - np.asarray(tau))


@dataclass
class MCurve:
    """Regulator data: Pi and M = V{Pi} sampled on the grid (n_V rows), plus m and n rows."""

    Pi: np.ndarray
    M: np.ndarray
    m: np.ndarray
    n: np.ndarray
    variant: str
    x: np.ndarray


def solve_regulator(exo: Exosystem, alpha, params: PhysicalParams, f: np.ndarray, grid: Grid,
                    A: Optional[np.ndarray] = None) -> np.ndarray:
    """Pi (nx x n_V) with Pi S = a A Pi + f a^T/(C rho), Pi_x(0) = b^T, Pi_x(1) = c^T."""
    if not params.constant_k:
        raise ValueError("the regulator needs constant permeability")
    a_d = params.diffusivity()
    nx, dx = grid.nx, grid.dx
    A = assemble_frac_operator(alpha, grid) if A is None else A
    lam, W, Winv = exo.modal()
    aW, bW, cW = exo.a @ W, exo.b @ W, exo.c @ W
    f = np.asarray(f, dtype=np.float64)
    left = neumann_row(nx, dx)
    right = np.zeros(nx)
    right[-3:] = np.array([1.0, -4.0, 3.0]) / (2.0 * dx)
    modes = np.zeros((nx, exo.n), dtype=complex)
    for i, li in enumerate(lam):
        mat = li * np.eye(nx) - a_d * A
        rhs = f * aW[i] / (params.C * params.rho)
        mat[0] = left
        rhs[0] = bW[i]
        mat[-1] = right
        rhs[-1] = cW[i]
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > 1e14:
            raise ValueError(
                f"regulator system is singular for exosystem eigenvalue {li}: it coincides with a mode of the plant"
            )
        modes[:, i] = np.linalg.solve(mat, rhs)
    return (modes @ Winv).real


def solve_M(exo: Exosystem, kernel: PolyKernel, alpha, params: PhysicalParams, f: np.ndarray,
            grid: Grid, variant: str = "volterra", transport: Optional[TransportKernel] = None) -> MCurve:
    """Regulator curves for the chosen controller variant."""
    Pi = solve_regulator(exo, alpha, params, f, grid)
    x = grid.x
    if variant == "volterra":
        M = VolterraTransform(kernel, grid.nx, grid.L).forward(Pi)
        m = M[-1].copy()
        n = M[0].copy()
    elif variant == "convolution":
        tk = transport or TransportKernel()
        shifted = exo.S + tk.gamma * np.eye(exo.n)
        if np.linalg.cond(shifted) > 1e12:
            raise ValueError(f"-gamma = {-tk.gamma} is an eigenvalue of S; pick another gamma")
        M = Pi.copy()
        m = Pi[-1] @ exo.S @ np.linalg.inv(shifted)
        n = M[0].copy()
    else:
        raise ValueError(f"unknown controller variant {variant!r}")
    return MCurve(Pi=Pi.T.copy(), M=M.T.copy(), m=m, n=n, variant=variant, x=x)


def _trapezoid(values: np.ndarray, dx: float) -> float:
    if values.size < 2:
        return 0.0
    return float(dx * (np.sum(values) - 0.5 * (values[0] + values[-1])))


def control_volterra(P_hat: np.ndarray, kernel: PolyKernel, M: MCurve, exo: Exosystem, t: float) -> float:
    """u = int_0^1 K(1, y) P_hat(y) dy + m^T V(t)."""
    x = M.x
    dx = x[1] - x[0]
    K1 = kernel(np.full_like(x, x[-1]), x)
    return _trapezoid(K1 * np.asarray(P_hat, dtype=np.float64), dx) + float(M.m @ exo.evolve(t))


def control_convolution(history: np.ndarray, times: np.ndarray, tk: TransportKernel, M: MCurve,
                        exo: Exosystem, t: float) -> float:
    """u = sum_j P_hat(1, tau_j) l_hat(t - tau_j) (trapezoid weights) + m^T V(t)."""
    history = np.asarray(history, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    conv = 0.0
    if history.size >= 2:
        vals = history * tk.l_hat(t - times)
        w = np.diff(times)
        conv = float(np.sum(0.5 * w * (vals[1:] + vals[:-1])))
    return conv + float(M.m @ exo.evolve(t))


def tracking_error_target(e0, alpha, params: PhysicalParams, grid: Grid,
                          kernel: Optional[PolyKernel] = None) -> Field:
    """Simulate e_t = a d/dx C D^alpha e with e_x(0) = 0, e(1) = 0.

    With ``kernel`` the trace term a kappa(x) e(0, t) produced by the Volterra
    transform is included.
    """
    J = None
    if kernel is not None:
        J = -trace_profile(kernel, alpha, grid.x)
    spec = PdeSpec(params, alpha, zero_feedback=J)
    return simulate(spec, grid, e0)
