"""Dither, demodulation and motion-planning signals.

Every function here is a pure function of time. Growing exponentials go
through :func:`checked_exp` so a long horizon fails loudly instead of
propagating ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, HorizonOverflowError

MAX_EXPONENT = 700.0


def checked_exp(x: float) -> float:
    if x > MAX_EXPONENT:
        raise HorizonOverflowError(
            f"exponent {x:.6g} exceeds {MAX_EXPONENT}; shorten the horizon or reduce lambda"
        )
    return math.exp(x)


@dataclass(frozen=True)
class DitherParams:
    """Amplitude ``a``, frequency ``omega`` [rad/s], decay ``lam`` [1/s], length/delay ``D``."""

    a: float
    omega: float
    lam: float
    D: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        if self.lam < 0:
            raise DomainError(f"lambda must be non-negative, got {self.lam}")
        if self.D < 0:
            raise DomainError(f"D must be non-negative, got {self.D}")
        if self.a == 0:
            raise DomainError("dither amplitude a must be nonzero")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


@dataclass(frozen=True)
class PQConstants:
    p: float
    q: float


def pq_constants(lam: float, omega: float) -> PQConstants:
    """Real and imaginary parts of ``sqrt(-lam + j*omega)``."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    if lam < 0:
        raise DomainError(f"lambda must be non-negative, got {lam}")
    q = math.sqrt((math.hypot(lam, omega) + lam) / 2.0)
    # p from 2pq = omega; sqrt((r - lam)/2) cancels badly when lam >> omega
    return PQConstants(omega / (2.0 * q), q)


def additive_dither_delay(t: float, params: DitherParams) -> float:
    """Decaying dither advanced by the delay, ``S(t + D)``."""
    s = t + params.D
    return math.exp(-params.lam * s) * params.a * math.sin(params.omega * s)


def additive_dither_delay_rate(t: float, params: DitherParams) -> float:
    s = t + params.D
    w, lam = params.omega, params.lam
    return params.a * math.exp(-lam * s) * (w * math.cos(w * s) - lam * math.sin(w * s))


def demod_gradient_signal(t: float, params: DitherParams) -> float:
    return (2.0 / params.a) * checked_exp(params.lam * t) * math.sin(params.omega * t)


def demod_hessian_signal(t: float, params: DitherParams) -> float:
    a = params.a
    return -(8.0 / (a * a)) * checked_exp(2.0 * params.lam * t) * math.cos(2.0 * params.omega * t)


def target_output_dither(t: float, params: DitherParams) -> float:
    """``e^{-lam t} a sin(omega t)``: what the diffusion plant output should carry."""
    return math.exp(-params.lam * t) * params.a * math.sin(params.omega * t)


def diffusion_dither(t: float, params: DitherParams, pq: PQConstants | None = None) -> float:
    """Boundary flux that makes the far end of the heat domain follow the target dither."""
    if pq is None:
        pq = pq_constants(params.lam, params.omega)
    p, q, D = pq.p, pq.q, params.D
    wt = params.omega * t
    return (
        0.5
        * params.a
        * math.exp(-params.lam * t)
        * (math.sin(wt + q * D) * math.exp(p * D) + math.sin(wt - q * D) * math.exp(-p * D))
    )


def diffusion_dither_rate(t: float, params: DitherParams, pq: PQConstants | None = None) -> float:
    """Closed-form time derivative of :func:`diffusion_dither`."""
    if pq is None:
        pq = pq_constants(params.lam, params.omega)
    p, q, D = pq.p, pq.q, params.D
    w, lam = params.omega, params.lam
    wt = w * t
    plus = (-lam * math.sin(wt + q * D) + w * math.cos(wt + q * D)) * math.exp(p * D)
    minus = (-lam * math.sin(wt - q * D) + w * math.cos(wt - q * D)) * math.exp(-p * D)
    return 0.5 * params.a * math.exp(-lam * t) * (plus + minus)


def motion_planning_beta(x: float, t: float, params: DitherParams, pq: PQConstants | None = None) -> float:
    """Heat-equation profile with zero value and the target dither as slope at ``x = 0``.

    Its slope at ``x = D`` is :func:`diffusion_dither`.
    """
    if x < 0 or x > params.D:
        raise DomainError(f"x={x} outside [0, {params.D}]")
    return _beta(x, t, params, pq)


def _beta(x, t, params, pq=None):
    if pq is None:
        pq = pq_constants(params.lam, params.omega)
    p, q = pq.p, pq.q
    w, lam = params.omega, params.lam
    wt = w * t
    plus = (p * math.sin(wt + q * x) - q * math.cos(wt + q * x)) * math.exp(p * x - lam * t)
    minus = (p * math.sin(wt - q * x) - q * math.cos(wt - q * x)) * math.exp(-p * x - lam * t)
    return (plus - minus) * params.a / (2.0 * p * p + 2.0 * q * q)


def motion_planning_profile(x_grid, t: float, params: DitherParams):
    """Vectorised :func:`motion_planning_beta` over a grid of positions."""
    import numpy as np

    x = np.asarray(x_grid, dtype=float)
    if x.size and (x.min() < 0 or x.max() > params.D * (1 + 1e-12)):
        raise DomainError(f"grid leaves [0, {params.D}]")
    pq = pq_constants(params.lam, params.omega)
    p, q = pq.p, pq.q
    wt = params.omega * t
    decay = math.exp(-params.lam * t)
    plus = (p * np.sin(wt + q * x) - q * np.cos(wt + q * x)) * np.exp(p * x)
    minus = (p * np.sin(wt - q * x) - q * np.cos(wt - q * x)) * np.exp(-p * x)
    return decay * (plus - minus) * params.a / (2.0 * p * p + 2.0 * q * q)
