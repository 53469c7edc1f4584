"""Diffusion-compensated unbiased extremum seeking.

The actuator ``Theta`` drives the flux at ``x = D`` of a heat equation
with a Dirichlet end at ``x = 0``; the flux leaving ``x = 0`` integrates
into the map input ``theta``. The dither injected at ``x = D`` is chosen
so that ``theta`` carries ``e^{-lam t} a sin(omega t)`` once the initial
transient of the heat equation has died out.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .delay_es import default_dt, step_grid
from .demod import FilterState
from .engine import (
    CrankNicolsonHeat,
    Trajectory,
    conservative_flux_left,
    flux_right,
    rk4_step2,
    trapezoid_norm,
)
from .errors import DomainError
from .maps import QuadraticMap
from .signals import (
    DitherParams,
    PQConstants,
    demod_gradient_signal,
    demod_hessian_signal,
    diffusion_dither,
    pq_constants,
    target_output_dither,
)
from .validation import Condition, ValidationReport

log = logging.getLogger(__name__)

MIN_CELLS = 8


@dataclass(frozen=True)
class DiffusionLoopParams:
    """Loop gains, dither, map and numerics; ``dither.D`` is the domain length.

    ``Theta0`` is the initial actuator value. The estimate starts at
    ``Theta0 - S(0)`` unless ``Theta_hat0`` is given explicitly.
    """

    k: float
    dither: DitherParams
    omega_h: float
    map: QuadraticMap
    N: int = 100
    dt: float | None = None
    horizon: float = 300.0
    sample_stride: int = 5
    Theta0: float = 0.0
    Theta_hat0: float | None = None
    theta0: float = 0.0
    eta0: float = 0.0
    corrector: bool = True

    def __post_init__(self):
        if self.k < 0:
            raise DomainError(f"k must be non-negative, got {self.k}")
        if not self.omega_h > 0:
            raise DomainError(f"omega_h must be positive, got {self.omega_h}")
        if self.N < MIN_CELLS:
            raise DomainError(f"N must be at least {MIN_CELLS}, got {self.N}")
        if not self.dither.D > 0:
            raise DomainError("diffusion domain length D must be positive")
        if self.horizon < 0:
            raise DomainError(f"horizon must be non-negative, got {self.horizon}")
        if self.dt is not None and not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")

    @property
    def D(self) -> float:
        return self.dither.D


def validate_params_diffusion(params, H_assumed: float) -> ValidationReport:
    """Check ``lambda < min(omega_h/2, pi^2/(4 D^2))`` and ``k > lambda/H``."""
    if not H_assumed > 0:
        raise DomainError(f"H_assumed must be positive, got {H_assumed}")
    lam, D = params.dither.lam, params.dither.D
    return ValidationReport(
        [
            Condition("lambda < omega_h/2", lam, params.omega_h / 2.0),
            Condition("lambda < pi^2/(4 D^2)", lam, math.pi**2 / (4.0 * D * D)),
            Condition("k > lambda/H", lam / H_assumed, params.k),
        ]
    )


@dataclass
class DiffusionPlantState:
    alpha: np.ndarray
    theta: float
    h: float

    @property
    def N(self) -> int:
        return len(self.alpha) - 1

    @classmethod
    def zero(cls, D: float, N: int, theta: float = 0.0) -> "DiffusionPlantState":
        if N < MIN_CELLS:
            raise DomainError(f"N must be at least {MIN_CELLS}, got {N}")
        return cls(np.zeros(N + 1), theta, D / N)

    def output_rate(self) -> float:
        """``d theta/dt``, the slope of ``alpha`` at ``x = 0``."""
        return conservative_flux_left(self.alpha, self.h)

    def invariant(self, Theta: float) -> float:
        """``theta - Theta + integral(alpha)``; constant in time for the exact plant."""
        a = self.alpha
        return self.theta - Theta + self.h * (a.sum() - 0.5 * (a[0] + a[-1]))

    def boundary_flux(self) -> float:
        return flux_right(self.alpha, self.h)

    def l2_norm(self) -> float:
        return trapezoid_norm(self.alpha, self.h)


@dataclass
class DiffusionLoopState:
    Theta_hat: float
    plant: DiffusionPlantState
    filter: FilterState
    t: float


def plant_step(plant: DiffusionPlantState, boundary_flux: float, dt: float,
               solver: CrankNicolsonHeat | None = None) -> DiffusionPlantState:
    """One CN step of the heat equation and a trapezoid step of ``theta``."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if solver is None:
        solver = CrankNicolsonHeat(plant.N, plant.h, dt)
    rate0 = plant.output_rate()
    alpha = solver.step(plant.alpha, 0.0, boundary_flux)
    new = DiffusionPlantState(alpha, plant.theta, plant.h)
    new.theta = plant.theta + 0.5 * dt * (rate0 + new.output_rate())
    return new


def Theta_hat_derivative(state: DiffusionLoopState, G: float, H_hat: float, params) -> float:
    """Update law using the measured plant output ``theta``."""
    mismatch = state.Theta_hat - state.plant.theta + target_output_dither(state.t, params.dither)
    return -params.k * G - params.k * H_hat * mismatch


class _DiffusionRHS:
    """(Theta_hat, eta) derivatives with ``theta`` supplied by a per-step profile."""

    def __init__(self, params: DiffusionLoopParams):
        self.k = params.k
        self.wh = params.omega_h
        self.dither = params.dither
        self.qmap = params.map
        self.a, self.w, self.lam = params.dither.a, params.dither.omega, params.dither.lam
        self.t0 = 0.0
        self.coef = (0.0, 0.0, 0.0)

    def set_profile(self, t0: float, theta0: float, rate0: float, curvature: float):
        """``theta(t0 + tau) = theta0 + rate0*tau + curvature*tau^2``."""
        self.t0 = t0
        self.coef = (theta0, rate0, curvature)

    def theta_at(self, s: float) -> float:
        tau = s - self.t0
        c0, c1, c2 = self.coef
        return c0 + tau * (c1 + tau * c2)

    def __call__(self, s: float, Theta_hat: float, eta: float):
        theta = self.theta_at(s)
        y = self.qmap(theta)
        r = y - eta
        G = demod_gradient_signal(s, self.dither) * r
        Hh = demod_hessian_signal(s, self.dither) * r
        mismatch = Theta_hat - theta + math.exp(-self.lam * s) * self.a * math.sin(self.w * s)
        return -self.k * G - self.k * Hh * mismatch, self.wh * r


def step_diffusion_loop(state: DiffusionLoopState, params: DiffusionLoopParams, dt: float,
                        solver: CrankNicolsonHeat | None = None, rhs: _DiffusionRHS | None = None,
                        pq: PQConstants | None = None) -> DiffusionLoopState:
    """Advance the loop by ``dt``.

    The ODE pair is integrated with RK4 while ``theta`` follows a
    quadratic in time whose end slope comes from a predictor plant step;
    the plant is then advanced again with the corrected actuator flux.
    """
    plant = state.plant
    if solver is None:
        solver = CrankNicolsonHeat(plant.N, plant.h, dt)
    if rhs is None:
        rhs = _DiffusionRHS(params)
    if pq is None:
        pq = pq_constants(params.dither.lam, params.dither.omega)
    t = state.t
    # step-averaged dither rate: keeps Theta = Theta_hat + S exact; a point rate
    # leaves a constant O(dt^2) offset that the growing demodulation amplifies
    s_rate = (diffusion_dither(t + dt, params.dither, pq) - diffusion_dither(t, params.dither, pq)) / dt
    rate0 = plant.output_rate()

    rhs.set_profile(t, plant.theta, rate0, 0.0)
    Th, eta = rk4_step2(state.Theta_hat, state.filter.eta, rhs, t, dt)
    new_plant = plant_step(plant, (Th - state.Theta_hat) / dt + s_rate, dt, solver)
    if params.corrector:
        rate1 = new_plant.output_rate()
        rhs.set_profile(t, plant.theta, rate0, 0.5 * (rate1 - rate0) / dt)
        Th, eta = rk4_step2(state.Theta_hat, state.filter.eta, rhs, t, dt)
        new_plant = plant_step(plant, (Th - state.Theta_hat) / dt + s_rate, dt, solver)

    return DiffusionLoopState(Th, new_plant, FilterState(eta, state.filter.omega_h), t + dt)


def initial_state(params: DiffusionLoopParams) -> DiffusionLoopState:
    Th0 = params.Theta_hat0
    if Th0 is None:
        Th0 = params.Theta0 - diffusion_dither(0.0, params.dither)
    plant = DiffusionPlantState.zero(params.D, params.N, params.theta0)
    return DiffusionLoopState(Th0, plant, FilterState(params.eta0, params.omega_h), 0.0)


def run_diffusion_scenario(params: DiffusionLoopParams, H_assumed: float | None = None) -> Trajectory:
    """Simulate ``[0, horizon]``; ``estimate`` records ``Theta_hat``."""
    H = params.map.hessian if H_assumed is None else H_assumed
    report = validate_params_diffusion(params, H)
    if not report.passed:
        log.warning("diffusion loop parameters violate design conditions:\n%s", report.format())

    dt = params.dt if params.dt is not None else default_dt(
        DitherParams(params.dither.a, params.dither.omega, params.dither.lam, 0.0)
    )
    n_steps, dt = step_grid(params.horizon, dt, params.sample_stride)
    state = initial_state(params)
    solver = CrankNicolsonHeat(params.N, state.plant.h, dt)
    rhs = _DiffusionRHS(params)
    pq = pq_constants(params.dither.lam, params.dither.omega)
    traj = Trajectory(sample_dt=dt * params.sample_stride)

    def record():
        theta = state.plant.theta
        y = params.map(theta)
        r = y - state.filter.eta
        traj.append(
            t=state.t,
            theta=theta,
            y=y,
            estimate=state.Theta_hat,
            G=demod_gradient_signal(state.t, params.dither) * r,
            Hhat=demod_hessian_signal(state.t, params.dither) * r,
            eta=state.filter.eta,
            alpha_l2=state.plant.l2_norm(),
        )

    record()
    for i in range(1, n_steps + 1):
        state = step_diffusion_loop(state, params, dt, solver, rhs, pq)
        state.t = i * dt
        if i % params.sample_stride == 0:
            record()
    traj.meta["report"] = report
    traj.meta["dt"] = dt
    traj.meta["final_state"] = state
    return traj.finalize()
