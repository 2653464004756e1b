"""Green function of the fractional diffusion operator and the whole-line solution formula.

With a = k/(C mu) and beta = alpha + 1 the Green function is

    G(x, t) = (1/2pi) int exp(-i s x) exp(a phi(s) t) ds,   phi(s) = (-i s)^beta.

For constant k it is self-similar: G(x, t) = g(x/h)/h with h = (a t)^(1/beta), where g
is the kernel at a t = 1. The scaled kernel is evaluated by composite Gauss-Legendre
quadrature of the Fourier integral for moderate |z|, by its large-z asymptotic
series on the heavy right tail (alpha < 1), and is set to zero far on the left where
it decays faster than a Gaussian. An explicit ``GreenQuadrature`` bypasses the
scaling and integrates the unscaled Fourier integral directly, which is how the
two-rule cross-check is done.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import kernels
from .fractional import FractionalOrder, SampledFunction, _alpha, gamma_signed, phi_symbol, rl_integral

__all__ = [
    "PhysicalParams",
    "GreenQuadrature",
    "GreenDomainError",
    "GreenAccuracyError",
    "green_tilde",
    "green_eval",
    "green_scaled",
    "green_tail_series",
    "tail_mass_estimate",
    "green_mass",
    "analytic_solution",
    "stability_bound",
]

TRUNCATION = 1e-12
Z_SERIES = 15.0  # right of this the asymptotic series is used (alpha < 1)
Z_LEFT = 15.0  # left of -Z_LEFT the kernel is below 1e-24 and is set to 0
_GL16 = np.polynomial.legendre.leggauss(16)
_GL8 = np.polynomial.legendre.leggauss(8)
DEFAULT_MAX_NODES = 2_000_000


class GreenDomainError(ValueError):
    """Raised for arguments outside the domain of the Green function (t <= 0)."""


class GreenAccuracyError(RuntimeError):
    """Raised when the requested accuracy needs more quadrature nodes than allowed."""


@dataclass
class PhysicalParams:
    """Material constants. ``k_of_t`` defaults to the constant permeability ``k0``."""

    k0: float
    mu: float = 1.0
    C: float = 1.0
    rho: float = 1.0
    L: float = 1.0
    k_of_t: Optional[Callable[[float], float]] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("k0", "mu", "C", "rho", "L"):
            v = float(getattr(self, name))
            if not v > 0 or not math.isfinite(v):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
            setattr(self, name, v)

    @property
    def constant_k(self) -> bool:
        return self.k_of_t is None

    def k(self, t: float) -> float:
        if self.k_of_t is None:
            return self.k0
        v = float(self.k_of_t(t))
        if v < self.k0 * (1 - 1e-12):
            raise ValueError(f"k({t}) = {v} is below the lower bound k0 = {self.k0}")
        return v

    def diffusivity(self, t: float = 0.0) -> float:
        """a(t) = k(t)/(C mu)."""
        return self.k(t) / (self.C * self.mu)


@dataclass(frozen=True)
class GreenQuadrature:
    """Explicit rule for the unscaled Fourier integral on [-s_max, s_max]."""

    s_max: float
    n_nodes: int
    rule: str = "gauss"

    def __post_init__(self):
        if not self.s_max > 0:
            raise ValueError("s_max must be positive")
        if self.n_nodes < 64:
            raise ValueError("use at least 64 quadrature nodes")
        if self.rule not in ("gauss", "trapezoid"):
            raise ValueError(f"unknown rule {self.rule!r}")

    def nodes(self):
        if self.rule == "trapezoid":
            s = np.linspace(-self.s_max, self.s_max, self.n_nodes)
            w = np.full(s.size, s[1] - s[0])
            w[0] = w[-1] = 0.5 * (s[1] - s[0])
            return s, w
        per = 16
        npan = max(1, self.n_nodes // per)
        # an even panel count keeps s = 0 on a panel edge, where the symbol has its cusp
        npan += npan % 2
        edges = np.linspace(-self.s_max, self.s_max, npan + 1)
        return _panel_nodes(edges, _GL16)


def _panel_nodes(edges, rule):
    xg, wg = rule
    a = edges[:-1, None]
    b = edges[1:, None]
    s = ((b - a) * (xg + 1.0) / 2.0 + a).ravel()
    w = ((b - a) * wg / 2.0 * np.ones_like(a)).ravel()
    return s, w


def green_tilde(s, t: float, alpha, params: PhysicalParams):
    """Fourier transform exp(a(t) phi(s) t) of the Green function."""
    if t < 0:
        raise GreenDomainError("green_tilde needs t >= 0")
    return np.exp(params.diffusivity(t) * phi_symbol(s, alpha) * t)


def _scaled_smax(a: float) -> float:
    """Radius where exp(-sin(pi a/2) s^beta) drops below the truncation target."""
    beta = a + 1.0
    return (math.log(1.0 / TRUNCATION) / math.sin(math.pi * a / 2.0)) ** (1.0 / beta)


@lru_cache(maxsize=64)
def _scaled_nodes(a: float, zmax: float, max_nodes: int):
    smax = _scaled_smax(a)
    npan = max(16, int(math.ceil(smax * max(zmax, 1.0) / 3.0)))
    edges = np.linspace(0.0, smax, npan + 1)
    # geometric grading towards s = 0, where |s|^beta is not smooth
    h = edges[1]
    graded = h * 0.15 ** np.arange(13, -1, -1)
    edges = np.concatenate([[0.0], graded, edges[2:]])
    s, w = _panel_nodes(edges, _GL16)
    if 2 * s.size > max_nodes:
        raise GreenAccuracyError(
            f"alpha={a}: {2 * s.size} Fourier nodes needed, budget is {max_nodes}"
        )
    sym = np.exp(phi_symbol(s, a))
    symn = np.exp(phi_symbol(-s, a))
    s_full = np.concatenate([-s[::-1], s])
    w_full = np.concatenate([w[::-1], w])
    g_full = np.concatenate([symn[::-1], sym])
    return (
        np.ascontiguousarray(s_full),
        np.ascontiguousarray(w_full / (2.0 * math.pi)),
        np.ascontiguousarray(g_full.real),
        np.ascontiguousarray(g_full.imag),
    )


def green_tail_series(z, alpha, nterms: int = 12):
    """Large-z expansion sum_n z^(-1-n beta) / (n! Gamma(-n beta)) of the scaled kernel."""
    a = _alpha(alpha)
    beta = a + 1.0
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros_like(z)
    for n in range(1, nterms + 1):
        gm = gamma_signed(-n * beta)
        if math.isinf(gm):
            continue
        out = out + z ** (-1.0 - n * beta) / (math.factorial(n) * gm)
    return out


def tail_mass_estimate(z: float, alpha) -> float:
    """Leading-order mass of the scaled kernel to the right of z (z large)."""
    a = _alpha(alpha)
    beta = a + 1.0
    gm = gamma_signed(-beta)
    if math.isinf(gm):
        return 0.0
    return abs(z ** (-beta) / (beta * gm))


def green_scaled(z, alpha, full_output: bool = False, max_nodes: int = DEFAULT_MAX_NODES):
    """Scaled kernel g(z) = G(z, t) at a t = 1.

    With ``full_output`` also returns the largest imaginary residual of the
    Fourier quadrature, a check that the computed kernel is real.
    """
    a = _alpha(alpha)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    out = np.zeros_like(z)
    imag = 0.0
    series = (z > Z_SERIES) & (a < 1.0)
    if np.any(series):
        out[series] = green_tail_series(z[series], a)
    fourier = (z >= -Z_LEFT) & (z <= Z_SERIES)
    if np.any(fourier):
        zf = z[fourier]
        absz = np.abs(zf)
        res = np.empty(zf.size)
        lo = 0.0
        for hi in (1.0, 2.0, 4.0, 8.0, Z_SERIES):
            sel = (absz >= lo) & (absz <= hi) if lo == 0.0 else (absz > lo) & (absz <= hi)
            if np.any(sel):
                s, w, gr, gi = _scaled_nodes(a, hi, max_nodes)
                re, im = kernels.green_sum(np.ascontiguousarray(zf[sel]), s, w, gr, gi)
                res[sel] = re
                imag = max(imag, float(np.max(np.abs(im))))
            lo = hi
        out[fourier] = res
    if full_output:
        return out, imag
    return out


def _check_t(t):
    if not t > 0:
        raise GreenDomainError(f"the Green function needs t > 0, got {t!r}")


def green_eval(x, t: float, alpha, params: PhysicalParams, quad: Optional[GreenQuadrature] = None,
               full_output: bool = False, max_nodes: int = DEFAULT_MAX_NODES):
    """G_alpha(x, t). Scalars give a float, arrays an array.

    Without ``quad`` the scaled evaluator is used. With ``quad`` the Fourier integral
    is done directly with that rule; its truncation must satisfy the 1e-12 target.
    With ``full_output`` a second value is returned: the largest |imaginary part|
    of the quadrature, which should be at round-off level.
    """
    _check_t(t)
    a = _alpha(alpha)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    ad = params.diffusivity(t)
    if quad is None:
        h = (ad * t) ** (1.0 / (a + 1.0))
        val, imag = green_scaled(x / h, a, full_output=True, max_nodes=max_nodes)
        val = val / h
        imag = imag / h
    else:
        tail = math.exp(params.k0 / (params.C * params.mu) * phi_symbol(quad.s_max, a).real * t)
        if tail > TRUNCATION:
            raise GreenAccuracyError(
                f"s_max={quad.s_max} leaves a truncated tail of {tail:.2e} > {TRUNCATION:g}"
            )
        if quad.n_nodes > max_nodes:
            raise GreenAccuracyError(f"{quad.n_nodes} nodes exceed the budget {max_nodes}")
        s, w = quad.nodes()
        gt = green_tilde(s, t, a, params)
        val, im = kernels.green_sum(
            np.ascontiguousarray(x), np.ascontiguousarray(s), np.ascontiguousarray(w / (2 * math.pi)),
            np.ascontiguousarray(gt.real), np.ascontiguousarray(gt.imag),
        )
        imag = float(np.max(np.abs(im)))
    if scalar:
        val = float(val[0])
    return (val, imag) if full_output else val


def green_mass(t: float, alpha, params: PhysicalParams, x_lo: float, x_hi: float,
               panels_per_unit: int = 4) -> float:
    """Integral of G(., t) over [x_lo, x_hi] by composite Gauss-Legendre in the scaled variable.

    Panels have width 1/panels_per_unit in z up to |z| = 15 and grow geometrically
    beyond, where the kernel is a smooth power tail.
    """
    _check_t(t)
    a = _alpha(alpha)
    h = (params.diffusivity(t) * t) ** (1.0 / (a + 1.0))
    zl, zr = x_lo / h, x_hi / h
    core = np.linspace(-Z_LEFT, Z_SERIES, int((Z_LEFT + Z_SERIES) * panels_per_unit) + 1)
    right = [Z_SERIES]
    while right[-1] < zr:
        right.append(right[-1] * 1.1)
    edges = np.unique(np.clip(np.concatenate([core, right, [zl, zr]]), zl, zr))
    z, w = _panel_nodes(edges, _GL16)
    return float(np.sum(w * green_scaled(z, a)))


# ---------------------------------------------------------------------------
# whole-line solution formula


class _ScaledIntegrator:
    """Integral of g(z) F(x - h z) over the z-range that maps y = x - h z into [0, L].

    Panel edges are a fixed lattice (uniform for |z| <= 15, geometric beyond),
    so the kernel values on panels that are not cut by y = 0 or y = L are shared by
    all x; cut panels get fresh nodes.
    """

    def __init__(self, a: float, h: float, L: float, resolution: float):
        self.a, self.h, self.L = a, h, L
        dz = min(0.5, resolution / h)
        core = np.arange(-Z_LEFT, Z_SERIES + 0.5 * dz, dz)
        core[-1] = Z_SERIES
        tail = [Z_SERIES]
        zmax = L / h
        cap = max(resolution / h, dz)
        while tail[-1] < zmax:
            tail.append(tail[-1] + min(cap, max(dz, 0.25 * tail[-1])))
        self.edges = np.unique(np.concatenate([core, tail]))
        self.z, self.w = _panel_nodes(self.edges, _GL16)
        self.g = _scaled_cache(a, dz, self.edges)

    def integrate(self, x: np.ndarray, func) -> np.ndarray:
        h, L, edges = self.h, self.L, self.edges
        out = np.empty(x.size)
        npan = edges.size - 1
        zg = self.z.reshape(npan, -1)
        wg = self.w.reshape(npan, -1)
        gg = self.g.reshape(npan, -1)
        for i, xi in enumerate(x):
            lo, hi = max((xi - L) / h, edges[0]), min(xi / h, edges[-1])
            if hi <= lo:
                out[i] = 0.0
                continue
            # panels fully inside [lo, hi] reuse the shared kernel values
            first = int(np.searchsorted(edges, lo, side="left"))
            last = int(np.searchsorted(edges, hi, side="right")) - 1
            acc = 0.0
            if last > first:
                z = zg[first:last].ravel()
                acc = float(np.sum(wg[first:last].ravel() * gg[first:last].ravel() * func(xi - h * z)))
                cuts = [(lo, edges[first]), (edges[last], hi)]
            else:
                cuts = [(lo, hi)]
            for c0, c1 in cuts:
                if c1 - c0 <= 1e-15 * max(1.0, abs(c1)):
                    continue
                zc, wc = _panel_nodes(np.array([c0, c1]), _GL16)
                acc += float(np.sum(wc * green_scaled(zc, self.a) * func(xi - h * zc)))
            out[i] = acc
        return out


_SCALED_STORE: dict = {}


def _scaled_cache(a: float, dz: float, edges: np.ndarray) -> np.ndarray:
    key = (a, dz, edges.tobytes())
    if key not in _SCALED_STORE:
        z, _ = _panel_nodes(edges, _GL16)
        if len(_SCALED_STORE) > 32:
            _SCALED_STORE.clear()
        _SCALED_STORE[key] = green_scaled(z, a)
    return _SCALED_STORE[key]


def _indicator(func, L):
    def wrapped(y):
        y = np.asarray(y, dtype=np.float64)
        v = np.asarray(func(y), dtype=np.float64) * np.ones_like(y)
        return np.where((y >= 0.0) & (y <= L), v, 0.0)

    return wrapped


def analytic_solution(Q, g0, u, x, t: float, alpha, params: PhysicalParams, du=None,
                      resolution: Optional[float] = None, rtol: float = 1e-6,
                      max_panels: int = 512):
    """Whole-line solution P(x, t) built from the Green function.

    P = u(t) + int_0^t int_0^L G(x-y, t-tau) Qbar(y, tau) dy dtau + int_0^L G(x-y, t) gbar0(y) dy,
    with gbar0 = g0 - u(0) and Qbar = Q/(C rho) - u'. ``Q(y, tau)`` and ``g0(y)`` are
    vectorized callables (``Q`` may be None for no source); ``u`` is a callable and
    ``du`` its derivative (numerical differentiation if omitted). Data are extended
    by zero outside [0, L]. Requires constant permeability.

    The time integral uses sigma = (t - tau)^(1/(alpha+1)), which makes the Green
    scale h proportional to sigma, and composite Gauss-Legendre panels doubled until
    two successive results agree within ``rtol``.
    """
    if not params.constant_k:
        raise ValueError("the solution formula needs constant permeability; use the finite-difference solver")
    _check_t(t)
    a = _alpha(alpha)
    beta = a + 1.0
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    L = params.L
    res = L / 64.0 if resolution is None else float(resolution)
    ad = params.diffusivity()
    time_term = Q is not None or callable(u)
    if not callable(u):
        u = (lambda c: (lambda tt: c))(float(u))
    if du is None:
        def du(tt, _u=u):
            e = 1e-6 * max(1.0, abs(tt))
            return (_u(tt + e) - _u(tt - e)) / (2 * e)
    u0 = float(u(0.0))

    def gbar(y):
        return np.asarray(g0(y), dtype=np.float64) - u0

    h_t = (ad * t) ** (1.0 / beta)
    total = float(u(t)) + _ScaledIntegrator(a, h_t, L, res).integrate(x, _indicator(gbar, L))

    if time_term:
        cQ = 1.0 / (params.C * params.rho)

        def layer(tau):
            def qbar(y):
                base = cQ * np.asarray(Q(y, tau), dtype=np.float64) if Q is not None else 0.0
                return base - float(du(tau)) + np.zeros_like(y)

            h = (ad * (t - tau)) ** (1.0 / beta)
            return _ScaledIntegrator(a, h, L, res).integrate(x, _indicator(qbar, L))

        smax = t ** (1.0 / beta)
        cache: dict = {}

        def panel_sum(npan):
            edges = np.linspace(0.0, smax, npan + 1)
            sg, wg = _panel_nodes(edges, _GL8)
            acc = np.zeros(x.size)
            for sig, wt in zip(sg, wg):
                key = round(float(sig), 15)
                if key not in cache:
                    cache[key] = layer(t - sig**beta)
                acc += wt * beta * sig ** (beta - 1.0) * cache[key]
            return acc

        npan = 2
        prev = panel_sum(npan)
        while True:
            npan *= 2
            cur = panel_sum(npan)
            if np.max(np.abs(cur - prev)) <= rtol * max(1.0, float(np.max(np.abs(cur)))):
                break
            if npan >= max_panels:
                raise GreenAccuracyError(f"time integral did not settle within {max_panels} panels")
            prev = cur
        total = total + cur

    return float(total[0]) if scalar else total


def stability_bound(q: SampledFunction, r: float, u_max: float, alpha, params: PhysicalParams) -> float:
    """Long-time sup-norm bound for a separable source T(t) q(x) with |T| <= r.

    (|r|/2pi) (C mu / (k0 sin(pi alpha/2))) (2 ||J^(alpha+1) q||_1 + ||q||_1) + |u_max|,
    with the L1 norms taken by the trapezoid rule over the samples of q.
    Returns +inf (with a warning) when sin(pi alpha/2) underflows.
    """
    a = _alpha(alpha)
    qn = float(np.trapezoid(np.abs(q.values), dx=q.dx))
    jq = rl_integral(q, a + 1.0)
    jn = float(np.trapezoid(np.abs(jq.values), dx=q.dx))
    core = 2.0 * jn + qn
    if r == 0 or core == 0.0:
        return abs(float(u_max))
    sn = math.sin(math.pi * a / 2.0)
    if sn < 1e-12:
        warnings.warn("the stability bound diverges as alpha -> 0", RuntimeWarning, stacklevel=2)
        return math.inf
    return abs(r) / (2.0 * math.pi) * (params.C * params.mu / (params.k0 * sn)) * core + abs(float(u_max))
