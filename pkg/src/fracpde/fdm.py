"""Implicit finite-difference solver for the fractional diffusion equation on [0, L].

    P_t = a(t) d/dx (C D^alpha_x P) - H(x) P_x - a(t) J(x) P(0, t) + forcing + sum_i b_i(x) s_i(t)
    P_x(0, t) = g(t),  P(L, t) = u(t),   a(t) = k(t)/(C mu).

The spatial operator is built from fluxes: the Caputo derivative of the piecewise
linear interpolant is evaluated exactly at the cell midpoints x_{i+1/2}, and the outer
derivative is the centred difference of neighbouring fluxes. At alpha = 1 this is the
standard three-point Laplacian. Time stepping is implicit Euler; the dense system is
LU-factorized once per distinct (a, dt) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from . import kernels
from .fractional import _alpha, gamma_fn
from .green import PhysicalParams

__all__ = [
    "Grid",
    "Field",
    "PdeSpec",
    "SimulationError",
    "flux_weights",
    "flux_operator",
    "assemble_frac_operator",
    "upwind_operator",
    "neumann_row",
    "ImplicitStepper",
    "step_implicit",
    "simulate",
    "boundary_slope",
]


class SimulationError(RuntimeError):
    """A linear solve failed or the state stopped being finite."""


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid on [0, L] x [0, T]."""

    nx: int = 201
    nt: int = 2001
    T: float = 3.0
    L: float = 1.0

    def __post_init__(self):
        if self.nx < 8:
            raise ValueError("nx must be at least 8")
        if self.nt < 2:
            raise ValueError("nt must be at least 2")
        if not (self.T > 0 and self.L > 0):
            raise ValueError("T and L must be positive")

    @property
    def dx(self) -> float:
        return self.L / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.nt - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt)

    def cfl(self, alpha, a_max: float) -> float:
        """dt a_max / dx^(alpha+1), reported as a diagnostic only (the scheme is implicit)."""
        return self.dt * a_max / self.dx ** (_alpha(alpha) + 1.0)


@dataclass
class Field:
    """Solution samples, one row per time level (shape nt x nx)."""

    x: np.ndarray
    t: np.ndarray
    data: np.ndarray
    sup_norm: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.sup_norm is None:
            self.sup_norm = np.max(np.abs(self.data), axis=1)

    def at(self, j: int) -> np.ndarray:
        return self.data[j]

    def to_csv(self, path) -> None:
        write_field_csv(path, self.x, self.t, self.data)


def write_field_csv(path, x, t, data) -> None:
    """Header ``x`` + grid, then one tab-separated row ``t, P(x_0), ...`` per time level."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("x\t" + "\t".join(format(v, ".17g") for v in x) + "\n")
        for tj, row in zip(t, data):
            fh.write(format(tj, ".17g") + "\t" + "\t".join(format(v, ".17g") for v in row) + "\n")


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`; returns (x, t, data)."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        x = np.array([float(v) for v in header[1:]])
        rows = np.loadtxt(fh, delimiter="\t", ndmin=2)
    return x, rows[:, 0], rows[:, 1:]


def flux_weights(alpha, n: int, dx: float) -> np.ndarray:
    """Weights w_j with F_{i+1/2} = sum_{k<=i} w_{i-k} (P_{k+1} - P_k).

    w_j = ((j + 1/2)^(1-alpha) - (j - 1/2)_+^(1-alpha)) dx^(1-alpha) / (Gamma(2-alpha) dx).
    """
    a = _alpha(alpha)
    j = np.arange(n, dtype=np.float64)
    e = 1.0 - a
    upper = (j + 0.5) ** e
    lower = np.where(j > 0, np.maximum(j - 0.5, 0.0) ** e, 0.0)
    if a == 1.0:
        upper = np.where(j == 0, 1.0, 0.0)
        lower = np.zeros(n)
    return (upper - lower) * dx**e / (gamma_fn(2.0 - a) * dx)


def flux_operator(alpha, n: int, dx: float) -> np.ndarray:
    """(n-1) x n matrix of midpoint Caputo fluxes F_{i+1/2}, i = 0..n-2."""
    return kernels.flux_matrix(flux_weights(alpha, n, dx), n)


def assemble_frac_operator(alpha, grid: Grid) -> np.ndarray:
    """Discrete d/dx C D^alpha_x on the grid. Boundary rows are zero; the stepper fills them."""
    n, dx = grid.nx, grid.dx
    F = flux_operator(alpha, n, dx)
    A = np.zeros((n, n))
    A[1:-1] = (F[1:] - F[:-1]) / dx
    return A


def upwind_operator(H: np.ndarray, dx: float) -> np.ndarray:
    """First-order upwind matrix for H(x) d/dx (interior rows only)."""
    n = H.size
    D = np.zeros((n, n))
    for i in range(1, n - 1):
        if H[i] >= 0:
            D[i, i] = H[i] / dx
            D[i, i - 1] = -H[i] / dx
        else:
            D[i, i + 1] = H[i] / dx
            D[i, i] = -H[i] / dx
    return D


def neumann_row(n: int, dx: float) -> np.ndarray:
    """Second-order one-sided approximation of P_x(0)."""
    row = np.zeros(n)
    row[:3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * dx)
    return row


def boundary_slope(P: np.ndarray, dx: float, side: str = "right") -> float:
    """Second-order one-sided derivative at the left or right end."""
    if side == "right":
        return (3.0 * P[-1] - 4.0 * P[-2] + P[-3]) / (2.0 * dx)
    return (-3.0 * P[0] + 4.0 * P[1] - P[2]) / (2.0 * dx)


@dataclass
class PdeSpec:
    """Everything on the right-hand side except the boundary data."""

    params: PhysicalParams
    alpha: float
    forcing: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    advection_gain: Optional[np.ndarray] = None
    injections: Sequence[Tuple[np.ndarray, Callable[[float], float]]] = ()
    zero_feedback: Optional[np.ndarray] = None  # J(x): adds -a(t) J(x) P(0, t)

    def __post_init__(self):
        self.alpha = _alpha(self.alpha)


class ImplicitStepper:
    """Implicit Euler steps for a fixed ``PdeSpec`` and grid, with cached factorizations."""

    def __init__(self, spec: PdeSpec, grid: Grid):
        self.spec = spec
        self.grid = grid
        self.x = grid.x
        self.A = assemble_frac_operator(spec.alpha, grid)
        n = grid.nx
        self.D = (
            upwind_operator(np.asarray(spec.advection_gain, dtype=np.float64), grid.dx)
            if spec.advection_gain is not None
            else None
        )
        self.J = None if spec.zero_feedback is None else np.asarray(spec.zero_feedback, dtype=np.float64).copy()
        self._nrow = neumann_row(n, grid.dx)
        self._cache: dict = {}

    def system_matrix(self, a: float, dt: float) -> np.ndarray:
        n = self.grid.nx
        M = np.eye(n) - dt * a * self.A
        if self.D is not None:
            M += dt * self.D
        if self.J is not None:
            M[:, 0] += dt * a * self.J
        M[0] = self._nrow
        M[-1] = 0.0
        M[-1, -1] = 1.0
        return M

    def factor(self, a: float, dt: float):
        key = (a, dt)
        lu = self._cache.get(key)
        if lu is None:
            if len(self._cache) > 8:
                self._cache.clear()
            M = self.system_matrix(a, dt)
            lu = sla.lu_factor(M, check_finite=True)
            if np.min(np.abs(np.diag(lu[0]))) < 1e-300:
                raise SimulationError("singular implicit system")
            self._cache[key] = lu
        return lu

    def rhs(self, P: np.ndarray, t_next: float, dt: float, extra=None) -> np.ndarray:
        r = P.astype(np.float64, copy=True)
        src = np.zeros_like(r)
        if self.spec.forcing is not None:
            src += np.asarray(self.spec.forcing(self.x, t_next), dtype=np.float64)
        for profile, signal in self.spec.injections:
            src += np.asarray(profile, dtype=np.float64) * float(signal(t_next))
        if extra is not None:
            src += extra
        return r + dt * src

    def step(self, P: np.ndarray, t_next: float, neumann: float, dirichlet: float,
             dt: Optional[float] = None, extra=None) -> np.ndarray:
        """Advance P to ``t_next``. ``extra`` is an additional source sampled on the grid."""
        dt = self.grid.dt if dt is None else dt
        a = self.spec.params.diffusivity(t_next)
        r = self.rhs(P, t_next, dt, extra)
        r[0] = neumann
        r[-1] = dirichlet
        out = sla.lu_solve(self.factor(a, dt), r, check_finite=False)
        if not np.all(np.isfinite(out)):
            raise SimulationError(f"non-finite state at t={t_next:g}")
        return out


def step_implicit(P: np.ndarray, spec: PdeSpec, grid: Grid, t_next: float,
                  neumann: float, dirichlet: float) -> np.ndarray:
    """One implicit Euler step (builds a fresh stepper; use ImplicitStepper in loops)."""
    return ImplicitStepper(spec, grid).step(P, t_next, neumann, dirichlet)


def simulate(spec: PdeSpec, grid: Grid, initial, neumann: Callable[[float], float] = None,
             dirichlet: Callable[[float], float] = None) -> Field:
    """Run the solver over the whole grid. ``initial`` is an array or a callable of x."""
    x, ts = grid.x, grid.t
    P = np.asarray(initial(x) if callable(initial) else initial, dtype=np.float64) * np.ones(grid.nx)
    neumann = neumann or (lambda t: 0.0)
    dirichlet = dirichlet or (lambda t: 0.0)
    stepper = ImplicitStepper(spec, grid)
    data = np.empty((grid.nt, grid.nx))
    data[0] = P
    for j in range(1, grid.nt):
        try:
            P = stepper.step(P, ts[j], neumann(ts[j]), dirichlet(ts[j]))
        except SimulationError as exc:
            raise SimulationError(f"step {j}: {exc}") from exc
        data[j] = P
    return Field(x, ts, data)
