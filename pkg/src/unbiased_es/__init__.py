"""Unbiased extremum seeking with delay and diffusion-PDE compensation."""

from .config import ScenarioConfig
from .delay_es import DelayLoopParams, run_delay_scenario, validate_params_delay
from .demod import FilterState, estimates
from .diffusion_es import DiffusionLoopParams, run_diffusion_scenario, validate_params_diffusion
from .engine import (
    CrankNicolsonHeat,
    HistoryBuffer,
    Trajectory,
    crank_nicolson_heat_step,
    delayed_value,
    rk4_step,
)
from .errors import (
    ConfigError,
    DomainError,
    HistoryUnderflowError,
    HorizonOverflowError,
    InsufficientDataError,
    NumericalBlowupError,
    SingularSystemError,
    UESError,
)
from .maps import QuadraticMap, SmoothMap
from .oracle import (
    AveragedParams,
    averaged_theta_delay,
    eta_av_limit,
    fit_decay_rate,
    integrate_averaged_delay,
    integrate_averaged_diffusion,
    reaction_diffusion_exact,
)
from .signals import (
    DitherParams,
    additive_dither_delay,
    demod_gradient_signal,
    demod_hessian_signal,
    diffusion_dither,
    motion_planning_beta,
    pq_constants,
)
from .validation import Condition, ValidationReport

__version__ = "0.1.0"
