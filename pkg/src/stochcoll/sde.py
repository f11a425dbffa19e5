"""Feedback-controlled linear SDE plants with closed-form moments.

Each agent follows, per dimension ``j``,

    dx_j = (a_j x_j - k_j (x_j - xi_j(t))) dt + sqrt(nu_j) dW_j

where ``xi`` is a piecewise-constant setpoint signal described by a
:class:`Plan`.  With ``q_j = k_j - a_j > 0`` the state is a Gaussian process
whose mean, variance and cross-time covariance have closed forms; no
quadrature is involved anywhere in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidArgumentError, PlanError, SingularityError
from .lipschitz import lipschitz_combine

DEFAULT_INITIAL_VARIANCE = 1e-6
_TIME_TOL = 1e-9


def _vec(x, dim, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise InvalidArgumentError(f"{name} must have {dim} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AgentDynamics:
    """Diagonal plant parameters of one agent.

    Scalars for ``gains``, ``drift``, ``noise`` and ``initial_cov`` are
    broadcast to the dimension of ``initial_mean``.
    """

    gains: np.ndarray
    noise: np.ndarray
    initial_mean: np.ndarray
    drift: np.ndarray = 0.0
    initial_cov: np.ndarray = DEFAULT_INITIAL_VARIANCE
    diameter: float = 1.0

    def __post_init__(self):
        mu0 = np.asarray(self.initial_mean, dtype=float).ravel()
        dim = mu0.size
        if dim < 1:
            raise InvalidArgumentError("dimension must be >= 1")
        set_ = object.__setattr__
        set_(self, "initial_mean", _vec(mu0, dim, "initial_mean"))
        for name in ("gains", "noise", "drift", "initial_cov"):
            set_(self, name, _vec(getattr(self, name), dim, name))
        if np.any(self.rate <= 0):
            raise InvalidArgumentError("gains - drift must be positive in every dimension")
        if np.any(self.noise < 0):
            raise InvalidArgumentError("noise must be non-negative")
        if np.any(self.initial_cov < 0):
            raise InvalidArgumentError("initial_cov must be non-negative")
        if not self.diameter > 0:
            raise InvalidArgumentError("diameter must be positive")
        set_(self, "diameter", float(self.diameter))

    @property
    def dim(self) -> int:
        return self.initial_mean.size

    @property
    def rate(self) -> np.ndarray:
        """Mean-reversion rate ``q = k - a`` per dimension."""
        return np.asarray(self.gains) - np.asarray(self.drift)

    @property
    def stationary_cov(self) -> np.ndarray:
        return self.noise / (2.0 * self.rate)

    def to_dict(self) -> dict:
        return {
            "gains": self.gains.tolist(),
            "drift": self.drift.tolist(),
            "noise": self.noise.tolist(),
            "initial_mean": self.initial_mean.tolist(),
            "initial_cov": self.initial_cov.tolist(),
            "diameter": self.diameter,
        }


@dataclass(frozen=True, eq=False)
class Plan:
    """Time-setpoint pairs ``(t_i, zeta_i)``.

    Setpoint ``zeta_i`` (i >= 1) is active on ``(t_{i-1}, t_i]``; after the
    last time the last setpoint stays active until ``tf``.  ``zeta_0`` only
    matters for a single-pair plan, where it is held over the whole horizon.
    """

    times: np.ndarray
    setpoints: np.ndarray
    tf: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        pts = np.atleast_2d(np.asarray(self.setpoints, dtype=float))
        if times.size < 1:
            raise PlanError("a plan needs at least one setpoint")
        if pts.shape[0] != times.size:
            raise PlanError(f"{times.size} times but {pts.shape[0]} setpoints")
        if np.any(np.diff(times) <= 0):
            raise PlanError("setpoint times must be strictly increasing")
        tf = float(self.tf)
        if not tf > times[0]:
            raise PlanError("horizon end must exceed the first setpoint time")
        if times[-1] > tf + _TIME_TOL * (tf - times[0]):
            raise PlanError(f"last setpoint time {times[-1]} exceeds horizon end {tf}")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(pts))):
            raise PlanError("plan entries must be finite")
        times.flags.writeable = False
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "setpoints", pts)
        object.__setattr__(self, "tf", tf)

    @classmethod
    def start_to_goal(cls, x0, xf, t0: float, tf: float) -> "Plan":
        return cls(np.array([t0, tf]), np.array([x0, xf], dtype=float), tf)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def dim(self) -> int:
        return self.setpoints.shape[1]

    def __len__(self):
        return self.times.size

    def segments(self):
        """``(starts, ends, values)`` of the piecewise-constant reference signal."""
        h = self.times.size - 1
        if h == 0:
            return np.array([self.t0]), np.array([np.inf]), self.setpoints[:1]
        starts = self.times.copy()
        ends = np.append(self.times[1:], np.inf)
        values = np.vstack([self.setpoints[1:], self.setpoints[-1:]])
        return starts, ends, values

    def setpoint_after(self, t):
        """Right-continuous reference value, active on ``[t, t + dt)``."""
        idx = np.searchsorted(self.times, t, side="right")
        idx = np.minimum(idx, self.times.size - 1)
        return self.setpoints[idx]

    def setpoint_before(self, t):
        """Left-continuous reference value, active on ``(t - dt, t]``."""
        idx = np.searchsorted(self.times, t, side="left")
        idx = np.minimum(idx, self.times.size - 1)
        return self.setpoints[idx]

    def to_list(self):
        return [[float(t), [float(v) for v in s]] for t, s in zip(self.times, self.setpoints)]

    def key(self):
        """Hashable identity, used for cycle detection."""
        return (self.tf, self.times.tobytes(), self.setpoints.tobytes())

    def same_as(self, other: "Plan") -> bool:
        return (
            self.tf == other.tf
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.setpoints, other.setpoints)
        )


def plan_insert(plan: Plan, t: float, s, replace: bool = False) -> Plan:
    """Return a copy of ``plan`` with ``(t, s)`` merged in time order."""
    t = float(t)
    s = np.asarray(s, dtype=float).ravel()
    if s.size != plan.dim:
        raise PlanError(f"setpoint has {s.size} entries, plan dimension is {plan.dim}")
    if not plan.t0 < t < plan.tf:
        raise PlanError(f"insertion time {t} outside open horizon ({plan.t0}, {plan.tf})")
    tol = 1e-12 * (plan.tf - plan.t0)
    hit = np.flatnonzero(np.abs(plan.times - t) <= tol)
    if hit.size:
        if not replace:
            raise PlanError(f"a setpoint already exists at t={plan.times[hit[0]]}")
        pts = plan.setpoints.copy()
        pts[hit[0]] = s
        return Plan(plan.times, pts, plan.tf)
    idx = int(np.searchsorted(plan.times, t))
    times = np.insert(plan.times, idx, t)
    pts = np.insert(plan.setpoints, idx, s, axis=0)
    return Plan(times, pts, plan.tf)


def _check_times(t, t0, tf):
    t = np.asarray(t, dtype=float)
    tol = _TIME_TOL * (tf - t0)
    if np.any(t < t0 - tol) or np.any(t > tf + tol):
        raise DomainError(f"time outside horizon [{t0}, {tf}]")
    return np.clip(t, t0, tf)


def _mean(dyn: AgentDynamics, plan: Plan, t):
    """Closed-form mean; ``t`` of shape (n,) gives (n, D)."""
    t = np.atleast_1d(t)[:, None, None]
    q = dyn.rate
    k = dyn.gains
    t0 = plan.t0
    starts, ends, values = plan.segments()
    lo = np.minimum(starts[None, :, None], t)
    hi = np.minimum(ends[None, :, None], t)
    weights = np.exp(q * (hi - t)) - np.exp(q * (lo - t))
    forced = np.sum((k / q) * values[None, :, :] * weights, axis=1)
    free = np.exp(-q * (t[:, 0, :] - t0)) * dyn.initial_mean
    return free + forced


def mean_at(dyn: AgentDynamics, plan: Plan, t):
    """Mean state at time(s) ``t``; scalar ``t`` returns a D-vector."""
    scalar = np.ndim(t) == 0
    t = _check_times(t, plan.t0, plan.tf)
    out = _mean(dyn, plan, t)
    return out[0] if scalar else out


def _cov(dyn: AgentDynamics, t0, t):
    t = np.atleast_1d(t)[:, None]
    q = dyn.rate
    c_inf = dyn.stationary_cov
    return np.exp(-2.0 * q * (t - t0)) * (dyn.initial_cov - c_inf) + c_inf


def cov_at(dyn: AgentDynamics, t, t0: float = 0.0, tf: float = np.inf):
    """Diagonal of the covariance matrix at time(s) ``t``.

    The covariance does not depend on the plan, only on the horizon start.
    """
    scalar = np.ndim(t) == 0
    if math.isfinite(tf):
        t = _check_times(t, t0, tf)
    elif np.any(np.asarray(t) < t0):
        raise DomainError(f"time before horizon start {t0}")
    out = np.maximum(_cov(dyn, t0, t), 0.0)
    return out[0] if scalar else out


def cross_cov_at(dyn: AgentDynamics, s, t, t0: float = 0.0, tf: float = np.inf):
    """Diagonal entries of ``cov(x(s), x(t))``."""
    if math.isfinite(tf):
        _check_times([s, t], t0, tf)
    elif min(s, t) < t0:
        raise DomainError(f"time before horizon start {t0}")
    q = dyn.rate
    c_inf = dyn.stationary_cov
    decay = np.exp(-q * (s + t - 2.0 * t0))
    return decay * dyn.initial_cov + c_inf * (np.exp(-q * abs(t - s)) - decay)


class MomentFunctions:
    """Evaluable moments of one agent's trajectory under a fixed plan.

    Besides the mean and diagonal covariance it carries certified Lipschitz
    constants, both global and on sub-intervals.
    """

    def __init__(self, dyn: AgentDynamics, plan: Plan):
        if dyn.dim != plan.dim:
            raise InvalidArgumentError(f"dynamics are {dyn.dim}-D but the plan is {plan.dim}-D")
        self.dyn = dyn
        self.plan = plan
        self.t0 = plan.t0
        self.tf = plan.tf
        self._q = dyn.rate
        self._k = dyn.gains
        self._c_inf = dyn.stationary_cov
        self._c_gap = dyn.initial_cov - self._c_inf
        self.mean_lipschitz, self.cov_lipschitz = moment_lipschitz(dyn, plan)

    @property
    def dim(self):
        return self.dyn.dim

    def mean(self, t):
        return mean_at(self.dyn, self.plan, t)

    def cov(self, t):
        return cov_at(self.dyn, t, self.t0, self.tf)

    def cross_cov(self, s, t):
        return cross_cov_at(self.dyn, s, t, self.t0, self.tf)

    def std(self, t):
        return np.sqrt(self.cov(t))

    def cov_inf(self) -> np.ndarray:
        """Infimum of each variance over the horizon (attained at an endpoint)."""
        return np.minimum(self.cov(self.t0), self.cov(self.tf))

    def cov_sup(self) -> np.ndarray:
        return np.maximum(self.cov(self.t0), self.cov(self.tf))

    def std_lipschitz(self) -> np.ndarray:
        """Global constant of ``sqrt(C_jj)`` via the square-root rule.

        Raises :class:`SingularityError` if some variance vanishes on the
        horizon while still changing.
        """
        inf = self.cov_inf()
        out = np.zeros(self.dim)
        for j in range(self.dim):
            if self.cov_lipschitz[j] == 0:
                continue
            out[j] = lipschitz_combine("sqrt", [self.cov_lipschitz[j]], inf=inf[j]).value
        return out

    def mean_lipschitz_on(self, a: float, b: float) -> np.ndarray:
        """sup |d mean / dt| over ``[a, b]``.

        On each constant-setpoint piece ``|dmu/dt| = q |mu - k zeta / q|``
        decays, so the supremum sits at ``a`` or at a setpoint switch inside
        ``(a, b)``.
        """
        pts = [a] + [float(t) for t in self.plan.times if a < t < b]
        pts = np.asarray(pts)
        mu = _mean(self.dyn, self.plan, pts)
        ref = self.plan.setpoint_after(pts)
        return np.max(np.abs(-self._q * mu + self._k * ref), axis=0)

    def std_lipschitz_on(self, a: float, b: float) -> np.ndarray:
        """sup |d sqrt(C) / dt| over ``[a, b]``, bounded as sup|C'| / (2 inf sqrt(C))."""
        dc = 2.0 * self._q * np.abs(self._c_gap) * np.exp(-2.0 * self._q * (a - self.t0))
        sig_min = np.sqrt(np.minimum(_cov(self.dyn, self.t0, a)[0], _cov(self.dyn, self.t0, b)[0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(dc == 0, 0.0, dc / (2.0 * sig_min))
        return out


def moment_lipschitz(dyn: AgentDynamics, plan: Plan):
    """Per-dimension Lipschitz constants ``(mean, covariance)`` on the horizon.

    The covariance constant is ``|2 q (C0 - nu / (2q))|``; the mean constant
    is the exact supremum of ``|d mean / dt|`` taken over setpoint switches.
    """
    if dyn.dim != plan.dim:
        raise InvalidArgumentError("dimension mismatch between dynamics and plan")
    q = dyn.rate
    cov_l = np.abs(2.0 * q * (dyn.initial_cov - dyn.stationary_cov))
    pts = np.asarray([float(t) for t in plan.times if t < plan.tf])
    mu = _mean(dyn, plan, pts)
    ref = plan.setpoint_after(pts)
    mean_l = np.max(np.abs(-q * mu + dyn.gains * ref), axis=0)
    return mean_l, cov_l


def constant_setpoint_mean_bound(dyn: AgentDynamics, plan: Plan) -> np.ndarray:
    """Loose closed-form mean bound for drift-free plants.

    ``|k mu0| + |k| |xi| e^{k T} + |xi (e^{k T} - 1)|`` with ``|xi|`` the
    largest setpoint magnitude; it grows exponentially in the horizon ``T``.
    """
    k = dyn.gains
    span = plan.tf - plan.t0
    xi = np.max(np.abs(plan.setpoints), axis=0)
    growth = np.exp(k * span)
    return np.abs(k * dyn.initial_mean) + np.abs(k) * xi * growth + np.abs(xi * (growth - 1.0))


__all__ = [
    "AgentDynamics",
    "Plan",
    "MomentFunctions",
    "plan_insert",
    "mean_at",
    "cov_at",
    "cross_cov_at",
    "moment_lipschitz",
    "constant_setpoint_mean_bound",
    "DEFAULT_INITIAL_VARIANCE",
    "SingularityError",
]
