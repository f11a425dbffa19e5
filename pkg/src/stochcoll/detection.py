"""Collision detection of one agent against a set of others.

Detection certifies that the multi-agent criterion stays positive over the
whole horizon.  Anything short of a certificate counts as a collision.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Dict, Hashable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .criterion import CriterionFn, multi_agent_criterion
from .errors import InvalidArgumentError
from .lipschitz import ScalarTarget, Verdict, certify_adaptive, certify_naive

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10_000
FALLBACK_GRID = 2048
SWEEP_LEVELS = 8
ZERO_LIPSCHITZ = 1e-12


class Detector(str, enum.Enum):
    NAIVE = "naive"
    ADAPTIVE = "adaptive"
    GRID = "grid"

    @classmethod
    def parse(cls, value) -> "Detector":
        if isinstance(value, cls):
            return value
        value = str(value).lower()
        if value == "grid_fallback":
            return cls.GRID
        try:
            return cls(value)
        except ValueError:
            raise InvalidArgumentError(f"unknown detector {value!r}") from None


@dataclass(frozen=True)
class DetectionReport:
    agent: Hashable
    flag: bool
    t_coll: Optional[float]
    conflict_set: Tuple
    evaluations: int
    method: Detector
    verdict: Verdict
    certified: bool = True
    gamma_at_t_coll: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "flag": self.flag,
            "t_coll": self.t_coll,
            "conflict_set": list(self.conflict_set),
            "evaluations": self.evaluations,
            "method": self.method.value,
            "verdict": self.verdict.value,
            "certified": self.certified,
        }


def grid_minimum(func, t0: float, tf: float, n: int = FALLBACK_GRID, refine: bool = True):
    """Approximate ``(argmin, min)`` of a vectorised function on ``[t0, tf]``.

    Uses a uniform grid followed by a bounded scalar search on the two cells
    around the best grid point.
    """
    ts = np.linspace(t0, tf, n)
    vals = np.asarray(func(ts), dtype=float)
    i = int(np.argmin(vals))
    best_t, best_v = float(ts[i]), float(vals[i])
    if refine and n > 2:
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, n - 1)]
        res = minimize_scalar(
            lambda t: float(func(np.array([t]))[0]),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-9 * (tf - t0)},
        )
        if res.fun < best_v:
            best_t, best_v = float(res.x), float(res.fun)
    return best_t, best_v


def _naive_refinements(budget: int) -> int:
    # cumulative cost of r rounds is sum_{j<=r} (2^j + 1) ~ 2^(r+1)
    return max(1, int(math.log2(max(budget, 4))) - 1)


def _certify(target: ScalarTarget, method: Detector, budget: int):
    if method is Detector.NAIVE:
        return certify_naive(target, _naive_refinements(budget))
    return certify_adaptive(target, budget)


def _sub_target(target: ScalarTarget, a: float, b: float) -> ScalarTarget:
    return ScalarTarget(target.func, a, b, target.lipschitz_on(a, b), target.local_lipschitz)


def _sweep_left(target, method, budget, witness):
    """Push a non-positive witness towards the earliest non-positive time.

    Bisection on ``[t0, witness]``: a certified positive left half moves the
    lower bracket, a new witness moves the upper one.
    """
    lo, hi = target.t0, witness
    evals = 0
    tol = 1e-9 * (target.tf - target.t0)
    for _ in range(SWEEP_LEVELS):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        out = _certify(_sub_target(target, lo, mid), method, budget)
        evals += out.evaluations
        if out.flag is Verdict.NON_POSITIVE_FOUND:
            hi = out.critical_time
        elif out.flag is Verdict.ALL_POSITIVE:
            lo = mid
        else:
            break
    return hi, evals


def detect(
    agent,
    others,
    criteria: Dict[Hashable, CriterionFn],
    detector=Detector.ADAPTIVE,
    budget: int = DEFAULT_BUDGET,
) -> DetectionReport:
    """Check ``agent`` against ``others`` using the pair criteria keyed by opponent id."""
    method = Detector.parse(detector)
    others = sorted(others)
    if not others:
        return DetectionReport(agent, False, None, (), 0, method, Verdict.ALL_POSITIVE)
    missing = [b for b in others if b not in criteria]
    if missing:
        raise InvalidArgumentError(f"no criterion for pairs ({agent}, {missing})")
    pair_crits = [criteria[b] for b in others]
    gamma = multi_agent_criterion(pair_crits)

    if method is not Detector.GRID and not math.isfinite(gamma.lipschitz):
        log.info("agent %s: no finite Lipschitz constant, using grid fallback", agent)
        method = Detector.GRID

    if method is Detector.GRID:
        return _detect_grid(agent, others, pair_crits, gamma)

    target = gamma.to_target(ZERO_LIPSCHITZ)
    out = _certify(target, method, budget)
    evals = out.evaluations
    if out.flag is Verdict.ALL_POSITIVE:
        return DetectionReport(agent, False, None, (), evals, method, out.flag)
    if out.flag is Verdict.NON_POSITIVE_FOUND:
        t_coll, extra = _sweep_left(target, method, budget, out.critical_time)
        evals += extra
        certified = True
    else:
        log.warning("agent %s: certification inconclusive after %d evaluations; assuming collision", agent, evals)
        t_coll = float(min(out.samples, key=lambda s: s[1])[0])
        certified = False
    conflicts = _conflict_set(others, pair_crits, t_coll, strict=out.flag is Verdict.NON_POSITIVE_FOUND)
    return DetectionReport(
        agent, True, t_coll, conflicts, evals, method, out.flag, certified, float(gamma(t_coll))
    )


def _conflict_set(others, pair_crits, t, strict=True):
    vals = [c(t) for c in pair_crits]
    members = tuple(b for b, v in zip(others, vals) if v <= 0)
    if not members and not strict:
        members = (others[int(np.argmin(vals))],)
    return members


def _detect_grid(agent, others, pair_crits, gamma):
    ts = np.linspace(gamma.t0, gamma.tf, FALLBACK_GRID)
    vals = gamma.func(ts)
    bad = np.flatnonzero(vals <= 0)
    if bad.size:
        t_coll = float(ts[bad[0]])
        conflicts = _conflict_set(others, pair_crits, t_coll)
        return DetectionReport(
            agent, True, t_coll, conflicts, ts.size, Detector.GRID,
            Verdict.NON_POSITIVE_FOUND, False, float(vals[bad[0]]),
        )
    t_min, v_min = grid_minimum(gamma.func, gamma.t0, gamma.tf)
    if v_min <= 0:
        conflicts = _conflict_set(others, pair_crits, t_min)
        return DetectionReport(
            agent, True, t_min, conflicts, ts.size, Detector.GRID,
            Verdict.NON_POSITIVE_FOUND, False, v_min,
        )
    return DetectionReport(agent, False, None, (), ts.size, Detector.GRID, Verdict.ALL_POSITIVE, False)


__all__ = ["Detector", "DetectionReport", "detect", "grid_minimum", "DEFAULT_BUDGET"]
