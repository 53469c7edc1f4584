"""Closed-form averaged solutions and analysis helpers.

These are the ground truth the simulated loops and the PDE solver are
checked against: exponentially weighted averaged dynamics of both loops,
the separation-of-variables solution of the averaged reaction-diffusion
equation, and an envelope decay-rate fit for trajectories.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.signal import find_peaks

from .engine import (
    CrankNicolsonHeat,
    HistoryBuffer,
    conservative_flux_left,
    delayed_value,
    rk4_step2,
)
from .errors import DomainError, InsufficientDataError

RESONANCE_TOL = 1e-12

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AveragedParams:
    k: float
    H: float
    lam: float
    omega_h: float
    a: float
    D: float

    @property
    def contraction(self) -> float:
        """``kH - lambda``; positive means the averaged estimate error contracts."""
        return self.k * self.H - self.lam


@dataclass(frozen=True)
class AveragedDelayState:
    theta_f_av: float
    eta_f_av: float
    t: float = 0.0


@dataclass(frozen=True)
class SeriesTruncation:
    n_modes: int = 50

    def __post_init__(self):
        if self.n_modes < 1:
            raise DomainError("n_modes must be at least 1")


# --------------------------------------------------------------------------
# Delay loop
# --------------------------------------------------------------------------


def averaged_theta_delay(t, theta0: float, k: float, H: float, lam: float):
    return theta0 * np.exp(-(k * H - lam) * np.asarray(t, dtype=float))


def averaged_transport_profile(x, t, theta0: float, k: float, H: float, lam: float, D: float):
    """Transport-line profile whose right end is :func:`averaged_theta_delay`."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > D):
        raise DomainError(f"x outside [0, {D}]")
    return theta0 * np.exp(-(k * H - lam) * (np.asarray(t, dtype=float) + x - D))


def eta_av_limit(omega_h: float, H: float, a: float, lam: float) -> float:
    if not omega_h > 2.0 * lam:
        raise DomainError(f"omega_h={omega_h} must exceed 2*lambda={2 * lam}")
    return omega_h * H * a * a / (4.0 * (omega_h - 2.0 * lam))


def averaged_delay_rhs(state: AveragedDelayState, delayed_theta_f_av: float, params: AveragedParams):
    p = params
    d_theta = -p.contraction * state.theta_f_av
    forcing = math.exp(2.0 * p.lam * p.D) * delayed_theta_f_av**2 + 0.5 * p.a * p.a
    d_eta = -(p.omega_h - 2.0 * p.lam) * state.eta_f_av + p.omega_h * 0.5 * p.H * forcing
    return d_theta, d_eta


def integrate_averaged_delay(theta0: float, params: AveragedParams, horizon: float, dt: float,
                             eta0: float = 0.0):
    """RK4 solution of the averaged delay system.

    The delayed argument comes from a history buffer seeded with the
    initial transport-line profile.
    """
    D = params.D
    if D > 0 and dt > D:
        raise DomainError(f"dt={dt} exceeds D={D}")
    n = int(round(horizon / dt))
    dt = horizon / n if n else dt
    rate = params.contraction
    hist = HistoryBuffer(lookback=D + 6 * dt)
    if D > 0:
        n_pre = math.ceil(D / dt) + 4
        for i in range(n_pre, 0, -1):
            tau = -i * dt
            hist.append(tau, theta0 * math.exp(-rate * tau))
    hist.append(0.0, theta0)

    def rhs(s, th, eta):
        delayed = delayed_value(hist, s - D) if D > 0 else th
        return averaged_delay_rhs(AveragedDelayState(th, eta, s), delayed, params)

    t = np.empty(n + 1)
    th = np.empty(n + 1)
    eta = np.empty(n + 1)
    t[0], th[0], eta[0] = 0.0, theta0, eta0
    for i in range(n):
        th[i + 1], eta[i + 1] = rk4_step2(th[i], eta[i], rhs, i * dt, dt)
        t[i + 1] = (i + 1) * dt
        hist.append(t[i + 1], th[i + 1])
    return {"t": t, "theta_f_av": th, "eta_f_av": eta}


# --------------------------------------------------------------------------
# Diffusion loop
# --------------------------------------------------------------------------


def averaged_diffusion_rhs(Theta_f_av: float, eta_f_av: float, theta_f_av: float, params: AveragedParams):
    """Averaged actuator and filter dynamics; ``theta_f_av`` is the PDE's left-end slope."""
    p = params
    d_Theta = -p.contraction * Theta_f_av
    d_eta = -(p.omega_h - 2.0 * p.lam) * eta_f_av + p.omega_h * 0.5 * p.H * (theta_f_av**2 + 0.5 * p.a * p.a)
    return d_Theta, d_eta


def _sqrt_kH(k, H):
    kH = k * H
    if not kH > 0:
        raise DomainError(f"k*H must be positive, got {kH}")
    return math.sqrt(kH)


def particular_amplitude(Theta0: float, k: float, H: float, D: float) -> float:
    """Amplitude of the ``sin(sqrt(kH) x)`` part driven by the actuator."""
    r = _sqrt_kH(k, H)
    c = math.cos(r * D)
    if abs(c) < RESONANCE_TOL:
        raise DomainError(f"cos(sqrt(kH) D) = {c:.3g}: actuator frequency resonates with the domain")
    return Theta0 / (r * c)


def mode_wavenumbers(D: float, n_modes: int) -> np.ndarray:
    n = np.arange(1, n_modes + 1)
    return math.pi * (2 * n - 1) / (2.0 * D)


def non_decaying_threshold(D: float) -> float:
    """``pi^2/(4 D^2)``: reaction rates at or above it leave a growing mode."""
    return math.pi**2 / (4.0 * D * D)


def mode_exponents(lam: float, D: float, n_modes: int) -> np.ndarray:
    """Growth exponents ``lam - mu_n^2`` of the homogeneous modes."""
    return lam - mode_wavenumbers(D, n_modes) ** 2


def mode_coefficients(Theta0: float, k: float, H: float, D: float, initial_profile=None,
                      trunc: SeriesTruncation = SeriesTruncation()) -> np.ndarray:
    """Coefficients of the homogeneous modes.

    Projects the initial profile minus the actuator-driven part onto
    ``sin(mu_n x)``. The integral runs over ``[0, 2D]`` with the profile
    reflected about ``x = D`` and weight ``1/D``, composite Simpson rule.
    """
    n_modes = trunc.n_modes
    n_points = max(4 * n_modes + 1, 64 * n_modes + 1)
    x = np.linspace(0.0, 2.0 * D, n_points)
    xr = np.where(x <= D, x, 2.0 * D - x)
    A = particular_amplitude(Theta0, k, H, D)
    f = -A * np.sin(math.sqrt(k * H) * xr)
    if initial_profile is not None:
        f = f + np.asarray(initial_profile(xr), dtype=float)
    mu = mode_wavenumbers(D, n_modes)
    basis = np.sin(np.outer(mu, x))
    return simpson(basis * f, x=x, axis=1) / D


def reaction_diffusion_exact(x, t, Theta0: float, k: float, H: float, lam: float, D: float,
                             initial_profile=None, trunc: SeriesTruncation = SeriesTruncation(),
                             coefficients=None):
    """Series solution of ``u_t = u_xx + lam u``, ``u(0)=0``, ``u_x(D)=Theta0 e^{-(kH-lam)t}``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > D * (1 + 1e-12)):
        raise DomainError(f"x outside [0, {D}]")
    if lam >= non_decaying_threshold(D):
        log.warning("lambda=%g >= pi^2/(4 D^2)=%g: the slowest mode does not decay", lam, non_decaying_threshold(D))
    A = particular_amplitude(Theta0, k, H, D)
    M = coefficients if coefficients is not None else mode_coefficients(Theta0, k, H, D, initial_profile, trunc)
    mu = mode_wavenumbers(D, len(M))
    decay = np.exp((lam - mu**2) * t)
    modes = np.sin(np.multiply.outer(x, mu)) @ (decay * M)
    return A * np.sin(math.sqrt(k * H) * x) * math.exp(-(k * H - lam) * t) + modes


def reaction_diffusion_exact_flux0(t, Theta0: float, k: float, H: float, lam: float, D: float,
                                   initial_profile=None, trunc: SeriesTruncation = SeriesTruncation(),
                                   coefficients=None):
    """Slope at ``x = 0`` of :func:`reaction_diffusion_exact` (the averaged plant output)."""
    A = particular_amplitude(Theta0, k, H, D)
    M = coefficients if coefficients is not None else mode_coefficients(Theta0, k, H, D, initial_profile, trunc)
    mu = mode_wavenumbers(D, len(M))
    t = np.asarray(t, dtype=float)
    modes = np.exp(np.multiply.outer(t, lam - mu**2)) @ (mu * M)
    return A * math.sqrt(k * H) * np.exp(-(k * H - lam) * t) + modes


def solve_reaction_diffusion(Theta0: float, params: AveragedParams, horizon: float, dt: float, N: int,
                             initial_profile=None, times=()):
    """Crank-Nicolson solution of the averaged reaction-diffusion problem.

    Returns the left-end slope at every step and profiles at ``times``.
    """
    D = params.D
    h = D / N
    x = np.linspace(0.0, D, N + 1)
    u = np.zeros(N + 1) if initial_profile is None else np.asarray(initial_profile(x), dtype=float)
    u[0] = 0.0
    solver = CrankNicolsonHeat(N, h, dt, reaction=params.lam)
    n = int(round(horizon / dt))
    rate = params.contraction
    want = {int(round(tt / dt)): tt for tt in times}
    profiles = {}
    if 0 in want:
        profiles[want[0]] = u.copy()
    t = np.arange(n + 1) * dt
    slope = np.empty(n + 1)
    slope[0] = conservative_flux_left(u, h)
    for i in range(n):
        # flux held at its step-midpoint value
        g = Theta0 * math.exp(-rate * (i + 0.5) * dt)
        u = solver.step(u, 0.0, g)
        slope[i + 1] = conservative_flux_left(u, h)
        if i + 1 in want:
            profiles[want[i + 1]] = u.copy()
    return {"t": t, "x": x, "theta_f_av": slope, "profiles": profiles}


def integrate_averaged_diffusion(Theta0: float, params: AveragedParams, horizon: float, dt: float,
                                 N: int = 100, eta0: float = 0.0):
    """Averaged diffusion loop: RK4 actuator/filter, CN reaction-diffusion plant."""
    pde = solve_reaction_diffusion(Theta0, params, horizon, dt, N)
    t = pde["t"]
    slope = pde["theta_f_av"]
    n = len(t) - 1
    Th = np.empty(n + 1)
    eta = np.empty(n + 1)
    Th[0], eta[0] = Theta0, eta0
    for i in range(n):
        s0, s1 = slope[i], slope[i + 1]

        def rhs(s, a, e, t0=t[i], s0=s0, s1=s1):
            w = (s - t0) / dt
            return averaged_diffusion_rhs(a, e, s0 + w * (s1 - s0), params)

        Th[i + 1], eta[i + 1] = rk4_step2(Th[i], eta[i], rhs, t[i], dt)
    return {"t": t, "Theta_f_av": Th, "theta_f_av": slope, "eta_f_av": eta}


# --------------------------------------------------------------------------
# Trajectory analysis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Fitted ``rate`` (positive for decay), fit quality and number of peaks used."""

    rate: float
    r_squared: float
    n_peaks: int


def fit_decay_rate(trajectory, field: str, window: tuple[float, float], limit: float = 0.0,
                   min_separation: float | None = None) -> DecayFit:
    """Exponential rate of the envelope of ``|signal - limit|`` over ``window``.

    Local maxima are fitted as ``log(peak) = c - rate * t`` by least
    squares. ``min_separation`` (seconds) suppresses secondary ripples
    between envelope peaks.
    """
    t = np.asarray(trajectory["t"], dtype=float)
    y = np.abs(np.asarray(trajectory[field], dtype=float) - limit)
    t0, t1 = window
    if t0 < t[0] - 1e-9 or t1 > t[-1] + 1e-9 or t1 <= t0:
        raise DomainError(f"window {window} not inside trajectory span [{t[0]}, {t[-1]}]")
    m = (t >= t0) & (t <= t1)
    tw, yw = t[m], y[m]
    distance = None
    if min_separation is not None and len(tw) > 1:
        distance = max(1, int(round(min_separation / (tw[1] - tw[0]))))
    idx, _ = find_peaks(yw, distance=distance)
    idx = idx[yw[idx] > 0]
    if len(idx) < 3:
        raise InsufficientDataError(f"{len(idx)} envelope peaks in window {window}; need at least 3")
    tp = tw[idx]
    lp = np.log(yw[idx])
    slope, intercept = np.polyfit(tp, lp, 1)
    resid = lp - (slope * tp + intercept)
    ss_tot = float(np.sum((lp - lp.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(-float(slope), r2, len(idx))


def reweighted(trajectory, field: str, lam: float, limit: float = 0.0) -> np.ndarray:
    """``e^{lam t} (signal - limit)``: the exponentially weighted error."""
    t = np.asarray(trajectory["t"], dtype=float)
    return np.exp(lam * t) * (np.asarray(trajectory[field], dtype=float) - limit)


def reweighted_residual(trajectory, field: str, lam: float, limit: float, window) -> float:
    """``sup |e^{lam t} (signal - limit)|`` over ``window``."""
    t = np.asarray(trajectory["t"], dtype=float)
    m = (t >= window[0] - 1e-9) & (t <= window[1] + 1e-9)
    if not np.any(m):
        raise InsufficientDataError(f"no samples in window {window}")
    return float(np.max(np.abs(reweighted(trajectory, field, lam, limit)[m])))


def period_average(t, signal, period: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``signal`` over consecutive whole periods (trapezoid rule)."""
    t = np.asarray(t, dtype=float)
    signal = np.asarray(signal, dtype=float)
    centres, means = [], []
    start = t[0]
    while start + period <= t[-1] + 1e-9:
        m = (t >= start - 1e-9) & (t <= start + period + 1e-9)
        centres.append(start + 0.5 * period)
        means.append(np.trapezoid(signal[m], t[m]) / (t[m][-1] - t[m][0]))
        start += period
    return np.array(centres), np.array(means)
