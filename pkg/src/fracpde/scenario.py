"""Scenario configuration, closed-loop orchestration, metrics and run outputs.

A scenario is described by an INI file with sections [params], [grid], [exosystem],
[controller], [observer] and [noise]. ``ScenarioConfig`` holds the parsed values as
plain numbers and strings, so parse -> serialize -> parse is the identity.

Space profiles (initial data, source shape) use a small grammar:

    zero | const C | sine A n | cosine A n | gauss A c w

meaning 0, C, A sin(n pi x / L), A cos(n pi x / L) and A exp(-(x - c)^2 / (2 w^2)).
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__, kernels
from .control import MCurve, PolyKernel, TransportKernel, control_convolution, control_volterra, solve_M
from .exosystem import Exosystem
from .fdm import Grid, ImplicitStepper, PdeSpec, boundary_slope, write_field_csv
from .fractional import SampledFunction, caputo_left
from .green import PhysicalParams
from .observer import AdaptiveObserver

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "Scenario",
    "RunReport",
    "parse_profile",
    "load_config",
    "parse_config_text",
    "default_config",
    "run_scenario",
    "run_closed_loop",
    "write_outputs",
    "PLOT_SCRIPT",
]

MODES = ("open-loop", "track", "observe", "closed-loop")
LYAPUNOV_TOL = 1e-6


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


def parse_profile(text: str, L: float = 1.0):
    """Callable x -> values for a profile string (see module docstring)."""
    parts = text.split()
    if not parts:
        raise ConfigError("empty profile")
    kind, args = parts[0].lower(), parts[1:]
    try:
        vals = [float(v) for v in args]
    except ValueError as exc:
        raise ConfigError(f"bad numbers in profile {text!r}") from exc
    need = {"zero": 0, "const": 1, "sine": 2, "cosine": 2, "gauss": 3}
    if kind not in need:
        raise ConfigError(f"unknown profile kind {kind!r}")
    if len(vals) != need[kind]:
        raise ConfigError(f"profile {kind!r} takes {need[kind]} numbers, got {len(vals)}")
    if kind == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=np.float64))
    if kind == "const":
        c = vals[0]
        return lambda x: np.full_like(np.asarray(x, dtype=np.float64), c)
    if kind == "sine":
        A, n = vals
        return lambda x: A * np.sin(n * math.pi * np.asarray(x, dtype=np.float64) / L)
    if kind == "cosine":
        A, n = vals
        return lambda x: A * np.cos(n * math.pi * np.asarray(x, dtype=np.float64) / L)
    A, c, w = vals
    if not w > 0:
        raise ConfigError("gauss width must be positive")
    return lambda x: A * np.exp(-((np.asarray(x, dtype=np.float64) - c) ** 2) / (2 * w * w))


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(",", " ").replace(";", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(repr(float(u)) for u in v)
    return str(v)


@dataclass
class ScenarioConfig:
    # [params]
    k: float = 5.0
    k0: Optional[float] = None
    mu: float = 1.0
    C: float = 1.0
    rho: float = 1.0726
    L: float = 1.0
    alpha: float = 0.5
    source: str = "sine 1 2"
    source_normalize: bool = True
    initial: str = "sine 4 2"
    # [grid]
    nx: int = 201
    nt: int = 2001
    T: float = 3.0
    # [exosystem]
    n: int = 3
    S: List[float] = field(default_factory=lambda: [-25.0, 0.0, 0.0, 0.0, 0.0, 2 * math.pi, 0.0, -2 * math.pi, 0.0])
    V0: List[float] = field(default_factory=lambda: [1.0, 0.0, 1.0])
    a: List[float] = field(default_factory=lambda: [1.0, 0.0, 0.0])
    b: List[float] = field(default_factory=lambda: [1.0, 0.0, 0.0])
    c: List[float] = field(default_factory=lambda: [0.0, 1.0, 0.0])
    q: List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    # [controller]
    controller: str = "volterra"
    kernel_m: int = 1
    l_hat_gamma: float = 5.0
    # [observer]
    observer: str = "adaptive"
    lambda_mode: str = "decoupled"
    observer_initial: str = "zero"
    # [noise]
    sigma: float = 0.0
    seed: int = 0

    SECTIONS = {
        "params": ("k", "k0", "mu", "C", "rho", "L", "alpha", "source", "source_normalize", "initial"),
        "grid": ("nx", "nt", "T"),
        "exosystem": ("n", "S", "V0", "a", "b", "c", "q"),
        "controller": ("controller", "kernel_m", "l_hat_gamma"),
        "observer": ("observer", "lambda_mode", "observer_initial"),
        "noise": ("sigma", "seed"),
    }
    # keys whose INI name differs from the attribute
    KEY_ALIASES = {"controller": "type", "observer": "type", "observer_initial": "initial"}

    def validate(self) -> "ScenarioConfig":
        if self.controller not in ("volterra", "convolution", "none"):
            raise ConfigError(f"controller type must be volterra, convolution or none, got {self.controller!r}")
        if self.observer not in ("adaptive", "none"):
            raise ConfigError(f"observer type must be adaptive or none, got {self.observer!r}")
        if self.lambda_mode not in ("decoupled", "advection"):
            raise ConfigError(f"lambda_mode must be decoupled or advection, got {self.lambda_mode!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.sigma < 0:
            raise ConfigError("noise sigma must be non-negative")
        if self.kernel_m < 0:
            raise ConfigError("kernel_m must be non-negative")
        if len(self.S) != self.n * self.n:
            raise ConfigError(f"S needs n*n = {self.n * self.n} entries, got {len(self.S)}")
        for name in ("V0", "a", "b", "c", "q"):
            if len(getattr(self, name)) != self.n:
                raise ConfigError(f"{name} needs {self.n} entries")
        k0 = self.k if self.k0 is None else self.k0
        if not (k0 > 0 and self.k >= k0):
            raise ConfigError("need 0 < k0 <= k")
        for name in ("mu", "C", "rho", "L", "T"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.nx < 8 or self.nt < 2:
            raise ConfigError("grid too small (nx >= 8, nt >= 2)")
        parse_profile(self.source, self.L)
        parse_profile(self.initial, self.L)
        parse_profile(self.observer_initial, self.L)
        return self

    # -- serialization -------------------------------------------------------------

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec, keys in self.SECTIONS.items():
            cp[sec] = {}
            for key in keys:
                v = getattr(self, key)
                if v is None:
                    continue
                cp[sec][self.KEY_ALIASES.get(key, key)] = _fmt(v)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from exc
        unknown = set(cp.sections()) - set(cls.SECTIONS)
        if unknown:
            raise ConfigError(f"unknown sections: {sorted(unknown)}")
        defaults = cls()
        kwargs = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for sec, keys in cls.SECTIONS.items():
            if sec not in cp:
                continue
            names = {cls.KEY_ALIASES.get(k, k): k for k in keys}
            for ini_key, raw in cp[sec].items():
                if ini_key not in names:
                    raise ConfigError(f"unknown key {ini_key!r} in [{sec}]")
                attr = names[ini_key]
                kwargs[attr] = cls._convert(attr, raw, getattr(defaults, attr), types[attr])
        return cls(**kwargs).validate()

    @staticmethod
    def _convert(attr, raw, default, typ):
        raw = raw.strip()
        try:
            if "List" in str(typ):
                return _floats(raw)
            if "bool" in str(typ):
                if raw.lower() in ("true", "yes", "1", "on"):
                    return True
                if raw.lower() in ("false", "no", "0", "off"):
                    return False
                raise ConfigError(f"{attr}: expected a boolean, got {raw!r}")
            if "int" in str(typ) and "float" not in str(typ):
                return int(raw)
            if "float" in str(typ):
                return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{attr}: cannot read {raw!r}") from exc
        return raw

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes).validate()


def default_config() -> ScenarioConfig:
    """Tracking demo: k = 5, mu = C = L = 1, rho = 1.0726, d1 = d2 = exp(-25 t), y_d = sin(2 pi t)."""
    return ScenarioConfig().validate()


def parse_config_text(text: str) -> ScenarioConfig:
    return ScenarioConfig.from_text(text)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return ScenarioConfig.from_text(text)


@dataclass
class Scenario:
    """Built objects for a configuration."""

    config: ScenarioConfig
    params: PhysicalParams
    alpha: float
    grid: Grid
    exo: Exosystem
    f: np.ndarray
    initial: np.ndarray
    observer_initial: np.ndarray
    kernel: PolyKernel
    transport: TransportKernel

    @property
    def controller(self) -> str:
        return self.config.controller

    @property
    def observer(self) -> str:
        return self.config.observer

    @property
    def noise_sigma(self) -> float:
        return self.config.sigma

    @property
    def seed(self) -> int:
        return self.config.seed

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "Scenario":
        cfg.validate()
        k0 = cfg.k if cfg.k0 is None else cfg.k0
        params = PhysicalParams(k0=k0, mu=cfg.mu, C=cfg.C, rho=cfg.rho, L=cfg.L,
                                k_of_t=None if k0 == cfg.k else (lambda t, _k=cfg.k: _k))
        grid = Grid(cfg.nx, cfg.nt, cfg.T, cfg.L)
        x = grid.x
        try:
            exo = Exosystem(np.reshape(cfg.S, (cfg.n, cfg.n)), cfg.V0, cfg.a, cfg.b, cfg.c, cfg.q)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        f = parse_profile(cfg.source, cfg.L)(x) * np.ones_like(x)
        if cfg.source_normalize:
            norm = float(np.trapezoid(np.abs(f), x))
            if norm == 0:
                raise ConfigError("cannot normalize a zero source profile")
            f = f / norm
        return cls(
            config=cfg,
            params=params,
            alpha=cfg.alpha,
            grid=grid,
            exo=exo,
            f=f,
            initial=parse_profile(cfg.initial, cfg.L)(x) * np.ones_like(x),
            observer_initial=parse_profile(cfg.observer_initial, cfg.L)(x) * np.ones_like(x),
            kernel=PolyKernel(cfg.kernel_m),
            transport=TransportKernel(cfg.l_hat_gamma),
        )


@dataclass
class RunReport:
    mode: str
    t: np.ndarray
    x: np.ndarray
    field: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_d: np.ndarray
    e: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    observer: Optional[Dict[str, np.ndarray]]
    metrics: Dict[str, float]
    config_text: str
    runtime_s: float = 0.0

    def tracking_table(self) -> np.ndarray:
        return np.column_stack([self.t, self.u, self.y, self.y_d, self.e])

    def observer_table(self) -> Optional[np.ndarray]:
        if self.observer is None:
            return None
        o = self.observer
        return np.column_stack([self.t, o["ptilde_sup"], self.d1, o["d1_hat"], self.d2, o["d2_hat"], o["w0"], o["V1"]])


def tracking_metrics(t: np.ndarray, e: np.ndarray, T: float) -> Dict[str, float]:
    peak = float(np.max(np.abs(e)))
    late_sel = t >= 2.0 * T / 3.0 - 1e-12
    late = float(np.max(np.abs(e[late_sel])))
    return {
        "e_peak": peak,
        "e_late_max": late,
        "e_late_ratio": late / peak if peak > 0 else 0.0,
        "e_final": float(abs(e[-1])),
    }


def lyapunov_flags(t: np.ndarray, V1: np.ndarray, w0: np.ndarray, tol: float = LYAPUNOV_TOL) -> np.ndarray:
    """Per-step check of V1' <= -V1 + w(0)^2.

    The adaptive law holds the innovation measured at the end of each step constant
    over the step, so the step from t_j to t_{j+1} is checked against w(0, t_{j+1})
    with the trapezoid average of V1.
    """
    dt = np.diff(t)
    lhs = np.diff(V1) / dt
    rhs = -0.5 * (V1[1:] + V1[:-1]) + w0[1:] ** 2
    return lhs <= rhs + tol


def observer_metrics(t: np.ndarray, obs: Dict[str, np.ndarray], d1, d2, T: float) -> Dict[str, float]:
    ptil = obs["ptilde_sup"]
    th = np.hypot(obs["d1_hat"] - d1, obs["d2_hat"] - d2)
    sel = t >= T / 3.0 - 1e-12
    slope = float(np.polyfit(t[sel], np.log(np.maximum(th[sel], 1e-300)), 1)[0])
    flags = lyapunov_flags(t, obs["V1"], obs["w0"])
    return {
        "ptilde_initial": float(ptil[0]),
        "ptilde_final": float(ptil[-1]),
        "ptilde_ratio": float(ptil[-1] / ptil[0]) if ptil[0] > 0 else 0.0,
        "theta_tilde_final": float(th[-1]),
        "theta_log_slope": slope,
        "lyapunov_fraction": float(np.mean(flags)),
    }


def run_scenario(sc: Scenario, mode: str = "closed-loop") -> RunReport:
    """Simulate plant, controller and observer together.

    Modes: ``open-loop`` (u = 0), ``track`` (controller fed by the true state plus
    sensor noise), ``observe`` (observer alongside a plant driven by the controller on
    the noise-free true state), ``closed-loop`` (controller fed by the estimate).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    t0 = time.perf_counter()
    cfg = sc.config
    grid, params, exo = sc.grid, sc.params, sc.exo
    nx, nt, dx = grid.nx, grid.nt, grid.dx
    x, ts = grid.x, grid.t
    cr = params.C * params.rho
    sigma = cfg.sigma
    rng = np.random.default_rng(cfg.seed)

    use_ctrl = sc.controller != "none" and mode != "open-loop"
    use_obs = sc.observer == "adaptive" and mode in ("observe", "closed-loop")
    if mode == "closed-loop" and not use_obs and use_ctrl:
        raise ConfigError("closed-loop mode feeds the estimate to the controller; enable the observer")

    plant = ImplicitStepper(PdeSpec(params, sc.alpha), grid)
    Mc: Optional[MCurve] = None
    if use_ctrl:
        Mc = solve_M(exo, sc.kernel, sc.alpha, params, sc.f, grid, variant=sc.controller, transport=sc.transport)
    obs = None
    if use_obs:
        obs = AdaptiveObserver(params, sc.alpha, grid, sc.f, kernel=sc.kernel, lambda_mode=cfg.lambda_mode,
                               P_hat0=sc.observer_initial)

    Vs = exo.evolve(ts)
    d1 = Vs @ exo.a
    d2 = Vs @ exo.b
    yd = Vs @ exo.c

    P = sc.initial.copy()
    field_data = np.empty((nt, nx))
    field_data[0] = P
    u = np.zeros(nt)
    y = np.zeros(nt)
    u[0] = P[-1]
    y[0] = boundary_slope(P, dx)
    hist = np.zeros(nt)  # boundary value seen by the convolution controller

    o_rec = None
    if obs is not None:
        o_rec = {k: np.zeros(nt) for k in ("ptilde_sup", "d1_hat", "d2_hat", "w0", "V1")}
        st = obs.state
        o_rec["ptilde_sup"][0] = np.max(np.abs(st.P_hat - P))
        o_rec["d1_hat"][0], o_rec["d2_hat"][0] = st.theta_hat
        o_rec["w0"][0] = obs.w0(P[0], (d1[0], d2[0]))
        o_rec["V1"][0] = obs.lyapunov((d1[0], d2[0]))
        hist[0] = st.P_hat[-1]
    else:
        hist[0] = P[-1]

    for j in range(1, nt):
        t = ts[j]
        if mode == "track":
            fed = P + sigma * rng.standard_normal(nx) if sigma > 0 else P
        elif mode == "closed-loop":
            fed = obs.state.P_hat
        else:
            fed = P
        if use_ctrl:
            if sc.controller == "volterra":
                uj = control_volterra(fed, sc.kernel, Mc, exo, t)
            else:
                hist[j - 1] = fed[-1]
                uj = control_convolution(hist[:j], ts[:j], sc.transport, Mc, exo, t)
        else:
            uj = 0.0
        P = plant.step(P, t, d2[j], uj, extra=sc.f * d1[j] / cr)
        field_data[j] = P
        u[j] = uj
        y[j] = boundary_slope(P, dx)
        n1, n2 = (rng.standard_normal(2) * sigma) if sigma > 0 else (0.0, 0.0)
        z_m = P[0] + n1
        y_m = n2  # the discrete Caputo derivative vanishes at the lower terminal
        if obs is not None:
            st = obs.step(t, z_m, y_m, uj)
            o_rec["ptilde_sup"][j] = np.max(np.abs(st.P_hat - P))
            o_rec["d1_hat"][j], o_rec["d2_hat"][j] = st.theta_hat
            # w(0) is built from the innovation P_hat(0) - z_m that drives the law
            o_rec["w0"][j] = obs.w0(z_m, (d1[j], d2[j]))
            o_rec["V1"][j] = obs.lyapunov((d1[j], d2[j]))
    e = y - yd
    metrics = {"sup_norm_final": float(np.max(np.abs(field_data[-1])))}
    if use_ctrl or mode == "open-loop":
        metrics.update(tracking_metrics(ts, e, grid.T))
    if o_rec is not None:
        metrics.update(observer_metrics(ts, o_rec, d1, d2, grid.T))
    metrics["cfl"] = grid.cfl(sc.alpha, params.diffusivity())
    return RunReport(
        mode=mode, t=ts, x=x, field=field_data, u=u, y=y, y_d=yd, e=e, d1=d1, d2=d2,
        observer=o_rec, metrics=metrics, config_text=cfg.to_text(), runtime_s=time.perf_counter() - t0,
    )


def run_closed_loop(sc: Scenario) -> RunReport:
    """Plant, controller fed by the observer estimate, and observer."""
    return run_scenario(sc, "closed-loop")


def _write_table(path, header, table) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in table:
            fh.write("\t".join(format(float(v), ".17g") for v in row) + "\n")


TRACKING_HEADER = ("t", "u", "y", "y_d", "e")
OBSERVER_HEADER = ("t", "ptilde_sup", "d1", "d1_hat", "d2", "d2_hat", "w0", "V1")

PLOT_SCRIPT = '''"""Plots for a run directory written by fracpde. Usage: python plot.py [run_dir]"""
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

run = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent

def table(name):
    path = run / name
    if not path.exists():
        return None
    return np.genfromtxt(path, delimiter="\\t", names=True)

trk = table("tracking.csv")
if trk is not None:
    fig, ax = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax[0].plot(trk["t"], trk["y"], label="y")
    ax[0].plot(trk["t"], trk["y_d"], "--", label="y_d")
    ax[0].legend()
    ax[1].plot(trk["t"], trk["e"])
    ax[1].set_ylabel("e")
    ax[1].set_xlabel("t")
    fig.savefig(run / "tracking.png", dpi=120)

obs = table("observer.csv")
if obs is not None:
    fig, ax = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    ax[0].semilogy(obs["t"], np.maximum(obs["ptilde_sup"], 1e-16))
    ax[0].set_ylabel("sup |P_hat - P|")
    ax[1].plot(obs["t"], obs["d1"], label="d1")
    ax[1].plot(obs["t"], obs["d1_hat"], "--", label="d1 estimate")
    ax[1].plot(obs["t"], obs["d2"], label="d2")
    ax[1].plot(obs["t"], obs["d2_hat"], "--", label="d2 estimate")
    ax[1].legend()
    ax[2].semilogy(obs["t"], np.maximum(obs["V1"], 1e-16))
    ax[2].set_ylabel("V1")
    ax[2].set_xlabel("t")
    fig.savefig(run / "observer.png", dpi=120)

fld = run / "field.csv"
if fld.exists():
    with open(fld) as fh:
        x = np.array([float(v) for v in fh.readline().split("\\t")[1:]])
        data = np.loadtxt(fh, delimiter="\\t", ndmin=2)
    t, P = data[:, 0], data[:, 1:]
    fig, ax = plt.subplots(figsize=(7, 4))
    mesh = ax.pcolormesh(x, t, P, shading="auto")
    fig.colorbar(mesh, ax=ax, label="P")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.savefig(run / "field.png", dpi=120)
print("figures written to", run)
'''


def write_plot_script(out_dir) -> Path:
    path = Path(out_dir) / "plot.py"
    path.write_text(PLOT_SCRIPT)
    return path


def write_outputs(report: RunReport, out_dir) -> Dict[str, str]:
    """field.csv, tracking.csv, observer.csv (if any), report.json and plot.py."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    write_field_csv(out / "field.csv", report.x, report.t, report.field)
    paths["field"] = str(out / "field.csv")
    _write_table(out / "tracking.csv", TRACKING_HEADER, report.tracking_table())
    paths["tracking"] = str(out / "tracking.csv")
    ot = report.observer_table()
    if ot is not None:
        _write_table(out / "observer.csv", OBSERVER_HEADER, ot)
        paths["observer"] = str(out / "observer.csv")
    summary = {
        "version": __version__,
        "backend": kernels.BACKEND,
        "mode": report.mode,
        "metrics": report.metrics,
        "config": report.config_text,
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    paths["report"] = str(out / "report.json")
    paths["plot"] = str(write_plot_script(out))
    return paths


def metrics_from_csv(run_dir, T: float) -> Dict[str, float]:
    """Recompute the summary metrics from the CSV files of a run directory."""
    run = Path(run_dir)
    out: Dict[str, float] = {}
    trk = np.loadtxt(run / "tracking.csv", delimiter="\t", skiprows=1, ndmin=2)
    out.update(tracking_metrics(trk[:, 0], trk[:, 4], T))
    if (run / "observer.csv").exists():
        ob = np.loadtxt(run / "observer.csv", delimiter="\t", skiprows=1, ndmin=2)
        rec = {"ptilde_sup": ob[:, 1], "d1_hat": ob[:, 3], "d2_hat": ob[:, 5], "w0": ob[:, 6], "V1": ob[:, 7]}
        out.update(observer_metrics(ob[:, 0], rec, ob[:, 2], ob[:, 4], T))
    return out
