"""Simulator and stability toolkit for a tensioned beam conveying fluid.

The public surface re-exports the pieces most runs need: parameter and
profile types, the simulator, the functional evaluations, the stability
constants pipeline, and the analysis helpers.  The command line lives in
pipeflex.cli (console script ``pipeflex``).
"""

from .analysis import (DecayFit, SpectrumReport, check_decay_bound,
                       check_sandwich, dissipativity_residual, fit_decay,
                       frozen_spectrum, poincare_check, tension_sweep)
from .config import RunConfig, parse_config
from .errors import (CertificateError, ConfigError, DivergenceError,
                     HorizonError, InitialConditionError,
                     InsufficientDataError, NotApplicableError,
                     PipeflexError, StepError)
from .functionals import (FunctionalSample, dE_dt_analytic, dG_dt_analytic,
                          energy, g_functionals, sample)
from .model import (AssumptionsReport, BeamParams, Constant,
                    InitialCondition, Polynomial, SandwichConstants,
                    SineMode, SinusoidalOffset, SmoothRamp, SplineTable,
                    StabilityConstants, VelocityBounds, Zero,
                    check_assumptions, compute_bounds,
                    compute_decay_certificate, compute_sandwich_constants)
from .output import (read_timeseries, plot_timeseries, write_sweep_csv,
                     write_timeseries)
from .timestep import SimulationConfig, State, Trajectory, simulate

__version__ = "0.1.0"

__all__ = [
    "AssumptionsReport", "BeamParams", "CertificateError", "ConfigError",
    "Constant", "DecayFit", "DivergenceError", "FunctionalSample",
    "HorizonError", "InitialCondition", "InitialConditionError",
    "InsufficientDataError", "NotApplicableError", "PipeflexError",
    "Polynomial", "RunConfig", "SandwichConstants", "SimulationConfig",
    "SineMode", "SinusoidalOffset", "SmoothRamp", "SpectrumReport",
    "SplineTable", "StabilityConstants", "State", "StepError", "Trajectory",
    "VelocityBounds", "Zero", "check_assumptions", "check_decay_bound",
    "check_sandwich", "compute_bounds", "compute_decay_certificate",
    "compute_sandwich_constants", "dE_dt_analytic", "dG_dt_analytic",
    "dissipativity_residual", "energy", "fit_decay", "frozen_spectrum",
    "g_functionals", "parse_config", "plot_timeseries", "poincare_check",
    "read_timeseries", "sample", "simulate", "tension_sweep",
    "write_sweep_csv", "write_timeseries", "__version__",
]
