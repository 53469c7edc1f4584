"""Washout filter and the gradient/Hessian estimates built from it."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .signals import DitherParams, demod_gradient_signal, demod_hessian_signal


@dataclass(frozen=True)
class FilterState:
    eta: float
    omega_h: float

    def __post_init__(self):
        if not self.omega_h > 0:
            raise DomainError(f"omega_h must be positive, got {self.omega_h}")


def filter_derivative(state: FilterState, y: float) -> float:
    return state.omega_h * (y - state.eta)


def gradient_estimate(t: float, y: float, state: FilterState, params: DitherParams) -> float:
    return demod_gradient_signal(t, params) * (y - state.eta)


def hessian_estimate(t: float, y: float, state: FilterState, params: DitherParams) -> float:
    return demod_hessian_signal(t, params) * (y - state.eta)


def estimates(t: float, y: float, eta: float, params: DitherParams) -> tuple[float, float]:
    """``(G, Hhat)`` from a raw ``(y, eta)`` pair; the form used inside integrator stages."""
    r = y - eta
    return demod_gradient_signal(t, params) * r, demod_hessian_signal(t, params) * r
