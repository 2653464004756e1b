"""Boundary control and adaptive estimation for a fractional (Caputo-flux) diffusion equation.

The compiled kernels are used when the extension module is importable; otherwise the
pure-Python versions are selected. ``fracpde.kernels.BACKEND`` reports which one is active.
"""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
from .fractional import (  # noqa: E402
    FractionalOrder,
    SampledFunction,
    caputo_left,
    caputo_right,
    caputo_power_rule,
    gamma_fn,
    phi_symbol,
    rl_integral,
)
from .green import (  # noqa: E402
    GreenAccuracyError,
    GreenDomainError,
    GreenQuadrature,
    PhysicalParams,
    analytic_solution,
    green_eval,
    green_mass,
    green_tilde,
    stability_bound,
)
from .fdm import Field, Grid, ImplicitStepper, PdeSpec, SimulationError, simulate  # noqa: E402
from .exosystem import Exosystem  # noqa: E402
from .control import (  # noqa: E402
    MCurve,
    PolyKernel,
    TransportKernel,
    VolterraTransform,
    control_convolution,
    control_volterra,
    kernel_residuals,
    solve_M,
    solve_regulator,
    volterra_forward,
    volterra_inverse,
)
from .observer import AdaptiveObserver, adaptive_update, compute_gains  # noqa: E402
from .scenario import (  # noqa: E402
    ConfigError,
    RunReport,
    Scenario,
    ScenarioConfig,
    default_config,
    load_config,
    run_closed_loop,
    run_scenario,
)
