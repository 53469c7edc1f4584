"""Build loop parameters from a :class:`ScenarioConfig`, run, and summarise."""

from __future__ import annotations

import math
import time

import numpy as np

from .config import ScenarioConfig
from .delay_es import DelayLoopParams, run_delay_scenario, validate_params_delay
from .diffusion_es import DiffusionLoopParams, run_diffusion_scenario, validate_params_diffusion
from .errors import ConfigError, InsufficientDataError, UESError
from .maps import QuadraticMap
from .oracle import (
    AveragedParams,
    averaged_theta_delay,
    eta_av_limit,
    fit_decay_rate,
    integrate_averaged_delay,
    integrate_averaged_diffusion,
    mode_coefficients,
    reaction_diffusion_exact_flux0,
    reweighted_residual,
    SeriesTruncation,
)
from .signals import DitherParams


def _dither(cfg: ScenarioConfig) -> DitherParams:
    d = cfg.dither
    try:
        return DitherParams(d.a, d.omega, d.lam, d.D)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _map(cfg: ScenarioConfig) -> QuadraticMap:
    m = cfg.map
    try:
        return QuadraticMap(m.y_star, m.theta_star, m.hessian)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def delay_params(cfg: ScenarioConfig) -> DelayLoopParams:
    n = cfg.numerics
    try:
        return DelayLoopParams(
            k=cfg.loop.k, dither=_dither(cfg), omega_h=cfg.loop.omega_h, map=_map(cfg),
            dt=n.dt, horizon=n.horizon, sample_stride=n.sample_stride,
            theta_hat0=cfg.loop.initial_input,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def diffusion_params(cfg: ScenarioConfig) -> DiffusionLoopParams:
    n = cfg.numerics
    try:
        return DiffusionLoopParams(
            k=cfg.loop.k, dither=_dither(cfg), omega_h=cfg.loop.omega_h, map=_map(cfg),
            N=n.N, dt=n.dt, horizon=n.horizon, sample_stride=n.sample_stride,
            Theta0=cfg.loop.initial_input,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def averaged_params(cfg: ScenarioConfig) -> AveragedParams:
    return AveragedParams(cfg.loop.k, cfg.map.hessian, cfg.dither.lam, cfg.loop.omega_h,
                          cfg.dither.a, cfg.dither.D)


def validate(cfg: ScenarioConfig):
    if cfg.mode in ("delay", "averaged-delay"):
        return validate_params_delay(delay_params(cfg), cfg.H_assumed)
    return validate_params_diffusion(diffusion_params(cfg), cfg.H_assumed)


def simulate(cfg: ScenarioConfig):
    if cfg.mode == "delay":
        return run_delay_scenario(delay_params(cfg), cfg.H_assumed)
    if cfg.mode == "diffusion":
        return run_diffusion_scenario(diffusion_params(cfg), cfg.H_assumed)
    raise ConfigError(f"mode {cfg.mode!r} is an oracle mode; use the oracle command")


def late_window(horizon: float) -> tuple[float, float]:
    """Final third of the horizon."""
    return (2.0 * horizon / 3.0, horizon)


def summarize(cfg: ScenarioConfig, traj) -> dict:
    """Convergence figures for a finished run."""
    theta_star, y_star = cfg.map.theta_star, cfg.map.y_star
    out = {
        "mode": cfg.mode,
        "horizon": float(traj["t"][-1]),
        "dt": traj.meta.get("dt"),
        "final_input_error": abs(float(traj["theta"][-1]) - theta_star),
        "final_output_error": abs(float(traj["y"][-1]) - y_star),
        "final_estimate_error": abs(float(traj["estimate"][-1]) - theta_star),
    }
    window = late_window(cfg.numerics.horizon)
    fit = {"window": list(window)}
    try:
        f = fit_decay_rate(traj, "estimate", window, theta_star)
        fit.update(rate=f.rate, r_squared=f.r_squared, n_peaks=f.n_peaks)
    except (InsufficientDataError, ValueError) as exc:
        fit.update(rate=None, r_squared=None, error=str(exc))
    out["decay_fit"] = fit
    try:
        out["reweighted_residual"] = reweighted_residual(traj, "estimate", cfg.dither.lam, theta_star, window)
    except UESError:
        out["reweighted_residual"] = None
    report = traj.meta.get("report")
    if report is not None:
        out["conditions"] = report.as_dict()
    return out


def run_and_summarize(cfg: ScenarioConfig):
    start = time.perf_counter()
    traj = simulate(cfg)
    summary = summarize(cfg, traj)
    summary["runtime_s"] = time.perf_counter() - start
    return traj, summary


def averaged_rate_numeric(cfg: ScenarioConfig, horizon: float = 50.0, dt: float = 0.05) -> float:
    """Contraction rate of the averaged estimate error measured by integration."""
    p = averaged_params(cfg)
    if p.D > 0:
        dt = min(dt, p.D)
    r = integrate_averaged_delay(1.0, p, horizon, dt)
    th = r["theta_f_av"]
    return -math.log(abs(th[-1]) / abs(th[0])) / r["t"][-1]


def oracle_tables(cfg: ScenarioConfig) -> dict:
    """Closed-form and numerically integrated averaged trajectories."""
    p = averaged_params(cfg)
    n = cfg.numerics
    theta0 = cfg.oracle.theta0
    if cfg.mode == "averaged-delay":
        dt = n.dt if n.dt is not None else 0.01
        if p.D > 0:
            dt = min(dt, p.D)
        r = integrate_averaged_delay(theta0, p, n.horizon, dt)
        t = r["t"]
        table = {
            "t": t,
            "theta_f_av_closed": averaged_theta_delay(t, theta0, p.k, p.H, p.lam),
            "theta_f_av": r["theta_f_av"],
            "eta_f_av": r["eta_f_av"],
        }
        limit = eta_av_limit(p.omega_h, p.H, p.a, p.lam)
        table["eta_limit"] = np.full_like(t, limit)
    elif cfg.mode == "averaged-diffusion":
        dt = n.dt if n.dt is not None else 1e-3
        r = integrate_averaged_diffusion(theta0, p, n.horizon, dt, n.N)
        t = r["t"]
        coeffs = mode_coefficients(theta0, p.k, p.H, p.D, trunc=SeriesTruncation(n.n_modes))
        table = {
            "t": t,
            "Theta_f_av_closed": averaged_theta_delay(t, theta0, p.k, p.H, p.lam),
            "Theta_f_av": r["Theta_f_av"],
            "theta_f_av": r["theta_f_av"],
            "theta_f_av_exact": reaction_diffusion_exact_flux0(t, theta0, p.k, p.H, p.lam, p.D,
                                                               coefficients=coeffs),
            "eta_f_av": r["eta_f_av"],
        }
        limit = eta_av_limit(p.omega_h, p.H, p.a, p.lam)
        table["eta_limit"] = np.full_like(t, limit)
    else:
        raise ConfigError(f"oracle needs an averaged mode, got {cfg.mode!r}")
    stride = n.sample_stride
    return {k: v[::stride] if (len(v) - 1) % stride == 0 else np.append(v[::stride], v[-1])
            for k, v in table.items()}
