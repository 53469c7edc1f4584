"""Static objective maps and delayed measurement of the plant output."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import DomainError, HistoryUnderflowError


@dataclass(frozen=True)
class QuadraticMap:
    """Quadratic objective ``y* + H/2 (theta - theta*)^2`` with ``H > 0``."""

    y_star: float
    theta_star: float
    hessian: float

    def __post_init__(self):
        if not self.hessian > 0:
            raise DomainError(f"hessian must be positive, got {self.hessian}")

    def __call__(self, theta: float) -> float:
        return eval_map(self, theta)


@dataclass(frozen=True)
class SmoothMap:
    """Arbitrary scalar objective for exploratory runs.

    No convergence guarantee is attached to it; the loops only assume
    it is callable with a float.
    """

    func: Callable[[float], float]

    def __call__(self, theta: float) -> float:
        return float(self.func(theta))


def eval_map(qmap: QuadraticMap, theta: float) -> float:
    d = theta - qmap.theta_star
    return qmap.y_star + 0.5 * qmap.hessian * d * d


def eval_delayed(qmap, theta_history, t: float, D: float) -> float:
    """Output measured at ``t`` when the map sees the input ``D`` seconds late.

    ``theta_history`` is either a callable ``s -> theta(s)`` or a
    :class:`~unbiased_es.engine.HistoryBuffer`. Times before zero use the
    value at zero.
    """
    if D < 0:
        raise DomainError(f"delay must be non-negative, got {D}")
    s = max(t - D, 0.0)
    if callable(theta_history):
        theta = theta_history(s)
    else:
        from .engine import delayed_value

        theta = delayed_value(theta_history, s)
    if theta is None:
        raise HistoryUnderflowError(f"no input sample available at s={s}")
    return qmap(theta)
