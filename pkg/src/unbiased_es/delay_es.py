"""Delay-compensated unbiased extremum seeking.

The map is measured ``D`` seconds after actuation. The estimate update
corrects the gradient step with the Hessian estimate times the drift of
the estimate over the delay window, which acts as a predictor for the
delayed loop.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

from .demod import FilterState
from .engine import HistoryBuffer, Trajectory, delayed_value, rk4_step2
from .errors import DomainError
from .maps import QuadraticMap
from .signals import (
    DitherParams,
    additive_dither_delay,
    demod_gradient_signal,
    demod_hessian_signal,
)
from .validation import Condition, ValidationReport

log = logging.getLogger(__name__)

STENCIL = 4


@dataclass(frozen=True)
class DelayLoopParams:
    k: float
    dither: DitherParams
    omega_h: float
    map: QuadraticMap
    dt: float | None = None
    horizon: float = 300.0
    sample_stride: int = 5
    theta_hat0: float = 0.0
    eta0: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise DomainError(f"k must be positive, got {self.k}")
        if not self.omega_h > 0:
            raise DomainError(f"omega_h must be positive, got {self.omega_h}")
        if self.horizon < 0:
            raise DomainError(f"horizon must be non-negative, got {self.horizon}")
        if self.dt is not None and not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.sample_stride < 1:
            raise DomainError("sample_stride must be at least 1")

    @property
    def D(self) -> float:
        return self.dither.D


def default_dt(dither: DitherParams) -> float:
    """``min(period/40, D/50)``, or ``period/40`` without delay."""
    dt = dither.period / 40.0
    if dither.D > 0:
        dt = min(dt, dither.D / 50.0)
    return dt


def step_grid(horizon: float, dt: float, stride: int) -> tuple[int, float]:
    """Number of steps and adjusted dt so samples land exactly on the horizon."""
    if horizon == 0:
        return 0, dt
    n_samples = max(1, math.ceil(horizon / (dt * stride) - 1e-9))
    n_steps = n_samples * stride
    return n_steps, horizon / n_steps


def validate_params_delay(params: DelayLoopParams, H_assumed: float) -> ValidationReport:
    """Check ``lambda < omega_h/2`` and ``k > lambda/H`` for a lower bound ``H``."""
    if not H_assumed > 0:
        raise DomainError(f"H_assumed must be positive, got {H_assumed}")
    lam = params.dither.lam
    return ValidationReport(
        [
            Condition("lambda < omega_h/2", lam, params.omega_h / 2.0),
            Condition("k > lambda/H", lam / H_assumed, params.k),
        ]
    )


@dataclass
class DelayLoopState:
    theta_hat: float
    filter: FilterState
    t: float
    history: HistoryBuffer = field(repr=False)
    actuation: HistoryBuffer = field(repr=False)

    def delayed_estimate(self, s: float) -> float:
        return delayed_value(self.history, s)


def initial_state(params: DelayLoopParams, dt: float) -> DelayLoopState:
    """Zero-time state with histories pre-filled for negative times."""
    D = params.D
    lookback = D + (STENCIL + 1) * dt
    hist = HistoryBuffer(lookback=lookback)
    act = HistoryBuffer(lookback=lookback)
    th0 = params.theta_hat0
    act0 = th0 + additive_dither_delay(0.0, params.dither)
    n_pre = math.ceil(D / dt) + STENCIL if D > 0 else 0
    for i in range(n_pre, 0, -1):
        hist.append(-i * dt, th0)
        act.append(-i * dt, act0)
    hist.append(0.0, th0)
    act.append(0.0, act0)
    return DelayLoopState(th0, FilterState(params.eta0, params.omega_h), 0.0, hist, act)


def theta_hat_derivative(state: DelayLoopState, G: float, H_hat: float, k: float, D: float) -> float:
    """Update law ``-k G - k Hhat (theta_hat(t) - theta_hat(t-D))``."""
    if D == 0:
        return -k * G
    drift = state.theta_hat - state.delayed_estimate(state.t - D)
    return -k * G - k * H_hat * drift


def actuator_value(state: DelayLoopState, params: DelayLoopParams) -> float:
    return state.theta_hat + additive_dither_delay(state.t, params.dither)


class _DelayRHS:
    """Right-hand side of the (theta_hat, eta) pair at arbitrary stage times."""

    def __init__(self, state: DelayLoopState, params: DelayLoopParams):
        self.state = state
        self.k = params.k
        self.wh = params.omega_h
        self.dither = params.dither
        self.D = params.D
        self.qmap = params.map
        self.last = None

    def measure(self, s: float, theta_hat: float) -> tuple[float, float]:
        """Delayed output at ``s`` and the delayed estimate used by the update law."""
        D = self.D
        if D == 0:
            theta = theta_hat + additive_dither_delay(s, self.dither)
            return self.qmap(theta), theta_hat
        lag = s - D
        theta_past = delayed_value(self.state.actuation, lag)
        return self.qmap(theta_past), delayed_value(self.state.history, lag)

    def __call__(self, s: float, theta_hat: float, eta: float):
        y, delayed = self.measure(s, theta_hat)
        r = y - eta
        G = demod_gradient_signal(s, self.dither) * r
        Hh = demod_hessian_signal(s, self.dither) * r
        self.last = (y, G, Hh)
        return -self.k * G - self.k * Hh * (theta_hat - delayed), self.wh * r


def step_delay_loop(state: DelayLoopState, params: DelayLoopParams, dt: float,
                    rhs: _DelayRHS | None = None) -> DelayLoopState:
    """Advance the loop by ``dt`` in place and return it."""
    if params.D > 0 and dt > params.D:
        raise DomainError(f"dt={dt} exceeds the delay D={params.D}; stage lookups would need the future")
    if rhs is None:
        rhs = _DelayRHS(state, params)
    th, eta = rk4_step2(state.theta_hat, state.filter.eta, rhs, state.t, dt)
    t = state.t + dt
    state.theta_hat = th
    state.filter = replace(state.filter, eta=eta)
    state.t = t
    state.history.append(t, th)
    state.actuation.append(t, th + additive_dither_delay(t, params.dither))
    return state


def run_delay_scenario(params: DelayLoopParams, H_assumed: float | None = None) -> Trajectory:
    """Simulate ``[0, horizon]`` and return the sampled record.

    Parameter conditions are checked against ``H_assumed`` (the map's
    Hessian by default); violations are logged and the run continues.
    """
    H = params.map.hessian if H_assumed is None else H_assumed
    report = validate_params_delay(params, H)
    if not report.passed:
        log.warning("delay loop parameters violate design conditions:\n%s", report.format())

    dt = params.dt if params.dt is not None else default_dt(params.dither)
    n_steps, dt = step_grid(params.horizon, dt, params.sample_stride)
    state = initial_state(params, dt)
    rhs = _DelayRHS(state, params)
    traj = Trajectory(sample_dt=dt * params.sample_stride)

    def record():
        y, delayed = rhs.measure(state.t, state.theta_hat)
        r = y - state.filter.eta
        traj.append(
            t=state.t,
            theta=actuator_value(state, params),
            y=y,
            estimate=state.theta_hat,
            G=demod_gradient_signal(state.t, params.dither) * r,
            Hhat=demod_hessian_signal(state.t, params.dither) * r,
            eta=state.filter.eta,
        )

    record()
    for i in range(1, n_steps + 1):
        step_delay_loop(state, params, dt, rhs)
        # pin the clock to the grid so sample times do not drift
        state.t = i * dt
        if i % params.sample_stride == 0:
            record()
    traj.meta["report"] = report
    traj.meta["dt"] = dt
    return traj.finalize()
