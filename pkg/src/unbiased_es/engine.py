"""Fixed-step numerical machinery shared by the loops.

RK4 for the scalar ODE states, Crank-Nicolson with a Thomas solve for the
heat equation, a time-stamped history buffer with cubic interpolation for
delayed lookups, and the sampled :class:`Trajectory` record.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HistoryUnderflowError, NumericalBlowupError, SingularSystemError

PIVOT_TOL = 1e-300


# --------------------------------------------------------------------------
# ODE stepping
# --------------------------------------------------------------------------


def rk4_step(y, rhs, t: float, dt: float):
    """Advance ``y' = rhs(t, y)`` by one classical Runge-Kutta step."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(rhs(t, y), dtype=float)
    k2 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(rhs(t + dt, y + dt * k3), dtype=float)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError(
            f"non-finite state after RK4 step at t={t:.6g}: "
            f"k1={k1.tolist()} k4={k4.tolist()} y={out.tolist()}"
        )
    return out


def rk4_step2(y0: float, y1: float, rhs, t: float, dt: float) -> tuple[float, float]:
    """RK4 for a pair of scalars without array overhead (the loops' hot path)."""
    h2 = 0.5 * dt
    a0, a1 = rhs(t, y0, y1)
    b0, b1 = rhs(t + h2, y0 + h2 * a0, y1 + h2 * a1)
    c0, c1 = rhs(t + h2, y0 + h2 * b0, y1 + h2 * b1)
    d0, d1 = rhs(t + dt, y0 + dt * c0, y1 + dt * c1)
    z0 = y0 + dt / 6.0 * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
    z1 = y1 + dt / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
    if not (math.isfinite(z0) and math.isfinite(z1)):
        raise NumericalBlowupError(
            f"non-finite state after RK4 step at t={t:.6g}: "
            f"k1=({a0:.3g}, {a1:.3g}) k4=({d0:.3g}, {d1:.3g})"
        )
    return z0, z1


# --------------------------------------------------------------------------
# Tridiagonal solves and Crank-Nicolson
# --------------------------------------------------------------------------


def thomas_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system without pivoting.

    ``lower[i]`` multiplies ``x[i-1]`` and ``upper[i]`` multiplies
    ``x[i+1]``; ``lower[0]`` and ``upper[-1]`` are ignored.
    """
    n = len(diag)
    cp = [0.0] * n
    dp = [0.0] * n
    den = diag[0]
    if abs(den) < PIVOT_TOL:
        raise SingularSystemError("zero pivot in row 0")
    cp[0] = upper[0] / den if n > 1 else 0.0
    dp[0] = rhs[0] / den
    for i in range(1, n):
        den = diag[i] - lower[i] * cp[i - 1]
        if abs(den) < PIVOT_TOL:
            raise SingularSystemError(f"zero pivot in row {i}")
        cp[i] = upper[i] / den if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / den
    x = [0.0] * n
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


class CrankNicolsonHeat:
    """Repeated CN steps of ``u_t = u_xx + reaction*u`` on a fixed uniform grid.

    The left end carries a Dirichlet value. The right end is either a
    Neumann flux, eliminated through a ghost node, or a Dirichlet value.
    The factorisation of the constant left-hand matrix is cached.
    """

    def __init__(self, n_cells: int, h: float, dt: float, reaction: float = 0.0, right: str = "neumann"):
        if n_cells < 2:
            raise ValueError("need at least two cells")
        if not (h > 0 and dt > 0):
            raise ValueError("h and dt must be positive")
        if right not in ("neumann", "dirichlet"):
            raise ValueError(f"unknown right boundary kind {right!r}")
        self.n = n_cells
        self.h = h
        self.dt = dt
        self.reaction = reaction
        self.right = right
        mu = dt / (2.0 * h * h)
        rho = 0.5 * reaction * dt
        self.mu, self.rho = mu, rho
        m = n_cells if right == "neumann" else n_cells - 1
        lower = [-mu] * m
        upper = [-mu] * m
        diag = [1.0 + 2.0 * mu - rho] * m
        if right == "neumann":
            lower[-1] = -2.0 * mu
        lower[0] = 0.0
        upper[-1] = 0.0
        # forward-elimination coefficients of the constant matrix
        cp = [0.0] * m
        inv = [0.0] * m
        den = diag[0]
        for i in range(m):
            if i > 0:
                den = diag[i] - lower[i] * cp[i - 1]
            if abs(den) < PIVOT_TOL:
                raise SingularSystemError(f"zero pivot in row {i}")
            inv[i] = 1.0 / den
            cp[i] = upper[i] * inv[i]
        self._lower = lower
        self._cp = cp
        self._inv = inv

    def step(self, u, left: float = 0.0, right_value: float = 0.0):
        """One step from ``u`` (length ``n+1``); returns the new field.

        ``left`` is the new boundary value at ``x=0``; the old one is
        ``u[0]``. ``right_value`` is the flux for a Neumann end (held over
        the step) or the new boundary value for a Dirichlet end.
        """
        u = np.asarray(u, dtype=float)
        mu, rho, h = self.mu, self.rho, self.h
        r = (1.0 - 2.0 * mu + rho) * u[1:]
        r[:-1] += mu * (u[:-2] + u[2:])
        if self.right == "neumann":
            r[-1] += 2.0 * mu * u[-2] + 4.0 * mu * h * right_value
        else:
            r = r[:-1]
            r[-1] += mu * right_value
        r[0] += mu * left
        rhs = r.tolist()
        lower, cp, inv = self._lower, self._cp, self._inv
        m = len(rhs)
        dp = [0.0] * m
        prev = 0.0
        for i in range(m):
            prev = (rhs[i] - lower[i] * prev) * inv[i]
            dp[i] = prev
        x = [0.0] * m
        nxt = dp[-1]
        x[-1] = nxt
        for i in range(m - 2, -1, -1):
            nxt = dp[i] - cp[i] * nxt
            x[i] = nxt
        out = np.empty_like(u)
        out[0] = left
        if self.right == "neumann":
            out[1:] = x
        else:
            out[1:-1] = x
            out[-1] = right_value
        return out


def crank_nicolson_heat_step(field, dirichlet0: float, neumannD: float, h: float, dt: float,
                             reaction: float = 0.0):
    """Single CN step with Dirichlet value at ``x=0`` and flux ``neumannD`` at ``x=D``."""
    field = np.asarray(field, dtype=float)
    solver = CrankNicolsonHeat(len(field) - 1, h, dt, reaction)
    return solver.step(field, left=dirichlet0, right_value=neumannD)


def flux_left(u, h: float) -> float:
    """Second-order one-sided slope at the first node."""
    return (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)


def conservative_flux_left(u, h: float) -> float:
    """Two-point slope at the first node.

    It is the flux that makes a CN step conserve the trapezoid integral
    exactly, and it is second order whenever ``u_xx`` vanishes at the
    node (a fixed Dirichlet end of the heat equation).
    """
    return (u[1] - u[0]) / h


def flux_right(u, h: float) -> float:
    """Second-order one-sided slope at the last node."""
    return (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)


def trapezoid_norm(u, h: float) -> float:
    """Discrete L2 norm with trapezoid weights."""
    u = np.asarray(u, dtype=float)
    s = np.dot(u, u) - 0.5 * (u[0] * u[0] + u[-1] * u[-1])
    return math.sqrt(max(s, 0.0) * h)


# --------------------------------------------------------------------------
# History buffer
# --------------------------------------------------------------------------


class HistoryBuffer:
    """Time-stamped samples with a bounded lookback.

    Samples older than ``newest - lookback`` are dropped in amortised
    batches. Lookups interpolate, they never extrapolate.
    """

    def __init__(self, lookback: float = math.inf, capacity: int | None = None):
        self.lookback = lookback
        self.capacity = capacity
        self._t: list[float] = []
        self._v: list[float] = []

    def __len__(self):
        return len(self._t)

    @property
    def span(self) -> tuple[float, float]:
        if not self._t:
            raise HistoryUnderflowError("history buffer is empty")
        return self._t[0], self._t[-1]

    def append(self, t: float, value: float) -> None:
        if self._t and not t > self._t[-1]:
            raise ValueError(f"timestamps must increase: {t} after {self._t[-1]}")
        self._t.append(t)
        self._v.append(value)
        self._evict()

    def _evict(self):
        cut = self._t[-1] - self.lookback
        n = len(self._t)
        limit = self.capacity if self.capacity is not None else None
        # drop in batches so append stays O(1) amortised
        if limit is not None and n > 2 * limit:
            drop = n - limit
        elif self._t[0] < cut and n > 64:
            drop = bisect.bisect_left(self._t, cut)
            if drop < n // 2:
                return
        else:
            return
        del self._t[:drop]
        del self._v[:drop]

    def times(self):
        return np.array(self._t)

    def values(self):
        return np.array(self._v)


def delayed_value(buffer: HistoryBuffer, t_query: float) -> float:
    """Cubic interpolation through the four samples nearest ``t_query``."""
    ts, vs = buffer._t, buffer._v
    n = len(ts)
    if n == 0:
        raise HistoryUnderflowError("history buffer is empty")
    if t_query < ts[0] or t_query > ts[-1]:
        raise HistoryUnderflowError(
            f"query t={t_query:.9g} outside stored span [{ts[0]:.9g}, {ts[-1]:.9g}]"
        )
    i = bisect.bisect_right(ts, t_query) - 1
    if ts[i] == t_query:
        return vs[i]
    if n < 4:
        if n == 1:
            return vs[0]
        # too short for a cubic: linear between neighbours
        t0, t1 = ts[i], ts[i + 1]
        w = (t_query - t0) / (t1 - t0)
        return vs[i] + w * (vs[i + 1] - vs[i])
    j = min(max(i - 1, 0), n - 4)
    t0, t1, t2, t3 = ts[j], ts[j + 1], ts[j + 2], ts[j + 3]
    x = t_query
    l0 = (x - t1) * (x - t2) * (x - t3) / ((t0 - t1) * (t0 - t2) * (t0 - t3))
    l1 = (x - t0) * (x - t2) * (x - t3) / ((t1 - t0) * (t1 - t2) * (t1 - t3))
    l2 = (x - t0) * (x - t1) * (x - t3) / ((t2 - t0) * (t2 - t1) * (t2 - t3))
    l3 = (x - t0) * (x - t1) * (x - t2) / ((t3 - t0) * (t3 - t1) * (t3 - t2))
    return l0 * vs[j] + l1 * vs[j + 1] + l2 * vs[j + 2] + l3 * vs[j + 3]


# --------------------------------------------------------------------------
# Trajectory record
# --------------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("t", "theta", "y", "estimate", "G", "Hhat", "eta")


@dataclass
class Trajectory:
    """Uniformly sampled record of a closed-loop run."""

    sample_dt: float
    columns: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in TRAJECTORY_COLUMNS:
            self.columns.setdefault(name, [])

    def append(self, **values) -> None:
        for name, v in values.items():
            self.columns.setdefault(name, []).append(float(v))

    def finalize(self) -> "Trajectory":
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"ragged trajectory columns: {lengths}")
        return self

    def __getitem__(self, name):
        return np.asarray(self.columns[name])

    def __len__(self):
        return len(self.columns["t"])

    @property
    def names(self):
        return list(self.columns)

    def window(self, t0: float, t1: float) -> np.ndarray:
        t = self["t"]
        return (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
