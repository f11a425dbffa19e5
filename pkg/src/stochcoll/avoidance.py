"""Plan repair: composite plan cost, WAIT and FREE resolution."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .criterion import CriterionKind, _whittle_radius_diag, chebyshev_radius
from .errors import InvalidArgumentError, PlanError
from .sde import AgentDynamics, Plan, _mean, cov_at, mean_at, plan_insert

log = logging.getLogger(__name__)

COST_GRID = 257  # 256 chords
WAIT_MIN_FRACTION = 1e-3
WAIT_STEP_FRACTION = 0.05
FREE_MARGIN = 0.02


@dataclass(frozen=True)
class CostWeights:
    w1: float = 10.0
    w2: float = 1e3
    w3: float = 1e6
    lambda_hinge: float = 1.0

    def __post_init__(self):
        vals = (self.w1, self.w2, self.w3, self.lambda_hinge)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidArgumentError("cost weights must be finite")
        if min(self.w1, self.w2, self.w3) < 0:
            raise InvalidArgumentError("cost weights must be non-negative")
        if not self.lambda_hinge > 0:
            raise InvalidArgumentError("hinge scale must be positive")


Goal = Tuple[float, np.ndarray]


def normalize_goals(goals) -> Tuple[Goal, ...]:
    return tuple((float(t), np.asarray(g, dtype=float)) for t, g in goals)


def _grid(plan: Plan, n: int = COST_GRID):
    return np.linspace(plan.t0, plan.tf, n)


def _chord_length(path: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))


def cost_traj(dyn: AgentDynamics, plan: Plan) -> float:
    """Arc length of the mean trajectory (256-chord sum)."""
    return _chord_length(_mean(dyn, plan, _grid(plan)))


def cost_miss(dyn: AgentDynamics, plan: Plan, goals) -> float:
    """Sum of squared distances between the mean and each timed goal."""
    total = 0.0
    for t, g in normalize_goals(goals):
        d = mean_at(dyn, plan, t) - g
        total += float(d @ d)
    return total


def cost_coll(criterion_min: float, lambda_hinge: float = 1.0) -> float:
    return lambda_hinge * max(0.0, -float(criterion_min))


def _interval_speed(dyn: AgentDynamics, plan: Plan, times: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Bound on ``|d mean / dt|`` over each grid cell, shape (n - 1, D).

    Within a constant-setpoint piece the speed decays, so it is largest just
    after the cell start or just after a switch inside the cell; the latter
    is at most ``e^{q h}`` times the speed just before the cell end.
    """
    q, k = dyn.rate, dyn.gains
    h = times[1] - times[0]
    v_right = np.abs(-q * mu[:-1] + k * plan.setpoint_after(times[:-1]))
    v_left = np.abs(-q * mu[1:] + k * plan.setpoint_before(times[1:]))
    return np.maximum(v_right, np.exp(q * h) * v_left)


class CollisionContext:
    """Fixed opponents against which candidate plans of one agent are scored.

    The criterion minimum is replaced by a lower bound over grid cells: the
    mean gap is floored with its speed bound and each radius is taken at its
    larger endpoint (radii are monotone in time).  Opponent quantities and
    all radii are plan-independent for the candidate, so they are
    precomputed once.
    """

    def __init__(self, dyn: AgentDynamics, t0: float, tf: float, opponents, kind=CriterionKind.CHEBYSHEV,
                 n: int = COST_GRID):
        """``opponents`` is a sequence of ``(id, MomentFunctions, PairParams)``."""
        kind = CriterionKind.parse(kind)
        radius = chebyshev_radius if kind is CriterionKind.CHEBYSHEV else _whittle_radius_diag
        self.dyn = dyn
        self.times = np.linspace(t0, tf, n)
        self.h = self.times[1] - self.times[0]
        self.ids = tuple(o[0] for o in opponents)
        means, speeds, slack = [], [], []
        for _, mom, params in opponents:
            mu = mom.mean(self.times)
            means.append(mu)
            speeds.append(_interval_speed(mom.dyn, mom.plan, self.times, mu))
            r = radius(cov_at(dyn, self.times, t0, tf), params.delta) + radius(mom.cov(self.times), params.delta)
            slack.append(params.lambda_pair + np.maximum(r[:-1], r[1:]))
        shape = (len(opponents), n, dyn.dim)
        self.opp_means = np.array(means).reshape(shape)
        self.opp_speed = np.array(speeds).reshape(len(opponents), n - 1, dyn.dim)
        self.slack = np.array(slack).reshape(len(opponents), n - 1, dyn.dim)

    def __len__(self):
        return len(self.ids)

    def gamma_floor(self, plan: Plan, mean_grid: np.ndarray) -> np.ndarray:
        """Lower bound of the multi-agent criterion on each grid cell."""
        if not self.ids:
            return np.full(self.times.size - 1, np.inf)
        gap = np.abs(mean_grid[None] - self.opp_means)
        speed = _interval_speed(self.dyn, plan, self.times, mean_grid)[None] + self.opp_speed
        floor = np.maximum(0.5 * (gap[:, :-1] + gap[:, 1:]) - 0.5 * self.h * speed, 0.0)
        return np.min(np.max(floor - self.slack, axis=2), axis=0)

    def gamma_min(self, plan: Plan, mean_grid: Optional[np.ndarray] = None) -> float:
        if mean_grid is None:
            mean_grid = _mean(self.dyn, plan, self.times)
        return float(np.min(self.gamma_floor(plan, mean_grid)))


def plan_cost_parts(dyn, plan, goals, weights: CostWeights, context: Optional[CollisionContext] = None,
                    margin: float = 0.0):
    if context is not None:
        times = context.times
    else:
        times = _grid(plan)
    mu = _mean(dyn, plan, times)
    traj = _chord_length(mu)
    miss = cost_miss(dyn, plan, goals)
    coll = 0.0
    if context is not None and len(context):
        coll = cost_coll(context.gamma_min(plan, mu) - margin, weights.lambda_hinge)
    return traj, miss, coll


def plan_cost(dyn, plan, goals, weights: CostWeights = CostWeights(), context: Optional[CollisionContext] = None,
              margin: float = 0.0) -> float:
    """``w1 c_traj + w2 c_miss + w3 c_coll``.

    ``margin`` shifts the hinge so that minimisers keep a small positive
    criterion value instead of sitting on zero.
    """
    traj, miss, coll = plan_cost_parts(dyn, plan, goals, weights, context, margin)
    return weights.w1 * traj + weights.w2 * miss + weights.w3 * coll


def _hold_until(plan: Plan) -> float:
    """End of the hold-at-start prefix, or ``t0`` if the plan leaves at once."""
    start = plan.setpoints[0]
    last = plan.t0
    for t, s in zip(plan.times[1:], plan.setpoints[1:]):
        if not np.array_equal(s, start):
            break
        last = float(t)
    return last


def resolve_wait(plan: Plan, t_coll: float) -> Plan:
    """Hold at the start setpoint until the detected collision time.

    The insertion time is clamped into the open horizon.  When the current
    plan already holds at least that long, the hold is extended by a fixed
    fraction of the horizon so that repeated calls always delay departure.
    """
    t0, tf = plan.t0, plan.tf
    span = tf - t0
    lo, hi = t0 + WAIT_MIN_FRACTION * span, tf - WAIT_MIN_FRACTION * span
    t_star = min(max(float(t_coll), lo), hi)
    held = _hold_until(plan)
    if t_star <= held:
        t_star = held + WAIT_STEP_FRACTION * span
    if t_star >= tf:
        raise PlanError("cannot wait any longer: hold already spans the horizon")
    start = plan.setpoints[0]
    try:
        return plan_insert(plan, t_star, start)
    except PlanError:
        # an existing setpoint sits exactly at t_star: nudge past it
        return plan_insert(plan, t_star + 1e-6 * span, start)


def arena_box(points, inflate: float = 0.2):
    """Axis-aligned box around ``points`` grown by ``inflate`` times its largest side.

    Using the largest side on every axis keeps the box from collapsing when
    all points are collinear.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = inflate * max(float(np.max(hi - lo)), 1.0)
    return lo - pad, hi + pad


def _neutral_time(plan: Plan) -> float:
    # middle of the longest segment, away from existing setpoint times
    times = np.append(plan.times, plan.tf)
    widths = np.diff(times)
    i = int(np.argmax(widths))
    return float(times[i] + 0.5 * widths[i])


def resolve_free(
    plan: Plan,
    dyn: AgentDynamics,
    goals,
    weights: CostWeights,
    context: Optional[CollisionContext],
    box,
    restarts: int = 10,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
    margin: float = FREE_MARGIN,
) -> Plan:
    """Insert the time-setpoint pair that minimises the plan cost.

    Multistart bounded Nelder-Mead over ``(t, s)`` with ``s`` in ``box``
    (``(lower, upper)`` corner arrays).  The neutral insertion, which leaves
    the reference signal unchanged, is always a candidate, so the result never
    costs more than the input plan.
    """
    goals = normalize_goals(goals)
    lo_s, hi_s = (np.asarray(b, dtype=float) for b in box)
    span = plan.tf - plan.t0
    t_lo, t_hi = plan.t0 + WAIT_MIN_FRACTION * span, plan.tf - WAIT_MIN_FRACTION * span
    bounds = [(t_lo, t_hi)] + list(zip(lo_s, hi_s))

    def candidate(z):
        t = float(np.clip(z[0], t_lo, t_hi))
        s = np.clip(z[1:], lo_s, hi_s)
        return plan_insert(plan, t, s, replace=True)

    def objective(z):
        return plan_cost(dyn, candidate(z), goals, weights, context, margin)

    t_neutral = _neutral_time(plan)
    z_neutral = np.concatenate([[t_neutral], plan.setpoint_after(t_neutral)])
    best_z, best_c = z_neutral, objective(z_neutral)

    rng = np.random.default_rng(seed)
    for r in range(restarts):
        z0 = np.concatenate([[rng.uniform(t_lo, t_hi)], rng.uniform(lo_s, hi_s)])
        res = minimize(
            objective, z0, method="Nelder-Mead", bounds=bounds,
            options={"maxiter": max_iter, "xatol": 1e-6, "fatol": tol, "initial_simplex": _simplex(z0, bounds)},
        )
        if res.fun < best_c:
            best_z, best_c = res.x, float(res.fun)
    return candidate(best_z)


def _simplex(z0, bounds, frac=0.25):
    """Initial simplex spanning a quarter of each bounded range."""
    n = z0.size
    pts = np.tile(z0, (n + 1, 1))
    for i, (lo, hi) in enumerate(bounds):
        step = frac * (hi - lo)
        pts[i + 1, i] = z0[i] + step if z0[i] + step <= hi else z0[i] - step
    return pts


__all__ = [
    "CostWeights",
    "CollisionContext",
    "cost_traj",
    "cost_miss",
    "cost_coll",
    "plan_cost",
    "plan_cost_parts",
    "resolve_wait",
    "resolve_free",
    "arena_box",
    "normalize_goals",
]
