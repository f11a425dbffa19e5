"""Collision criterion functions.

A criterion ``gamma(t)`` is a scalar function of time whose positivity
certifies that the instantaneous collision probability of two agents stays
below a threshold ``delta``.  Both shipped variants confine each agent to a
box around its mean, with one finite radius per dimension, and take the best
dimension:

    gamma(t) = max_i |mu^a_i - mu^b_i| - Lambda - r^a_i - r^b_i
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    CovarianceError,
    DimensionMismatchError,
    InvalidArgumentError,
    SingularityError,
)
from .lipschitz import ScalarTarget, lipschitz_combine
from .sde import MomentFunctions

PSD_TOL = 1e-12


class CriterionKind(str, enum.Enum):
    CHEBYSHEV = "cheb"
    WHITTLE = "whittle"

    @classmethod
    def parse(cls, value) -> "CriterionKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown criterion kind {value!r}") from None


@dataclass(frozen=True)
class PairParams:
    delta: float
    lambda_pair: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgumentError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.lambda_pair > 0:
            raise InvalidArgumentError(f"pair diameter must be positive, got {self.lambda_pair}")

    @classmethod
    def for_agents(cls, delta, diameter_a, diameter_b):
        return cls(delta, 0.5 * (diameter_a + diameter_b))


def chebyshev_radius(cov_ii, delta):
    """Per-dimension radius ``sqrt(2 C_ii / delta)`` (tail mass delta/2)."""
    return np.sqrt(2.0 * np.maximum(cov_ii, 0.0) / delta)


def whittle_radius(cov, i: int, delta: float) -> float:
    """Radius along dimension ``i`` from a two-dimensional Chebyshev-type bound.

    For a diagonal covariance this reduces to ``sqrt(C_ii / delta)``, a
    factor ``1/sqrt(2)`` below :func:`chebyshev_radius`.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2):
        raise DimensionMismatchError("whittle_radius needs a 2x2 covariance")
    j = 1 - i
    cii, cjj, cij = cov[i, i], cov[j, j], cov[i, j]
    if cjj <= 0:
        raise SingularityError(f"C_{j}{j} must be positive, got {cjj}")
    det = cii * cjj - cij * cij
    if det < -PSD_TOL:
        raise CovarianceError(f"covariance is not positive semi-definite (det={det})")
    det = max(det, 0.0)
    inner = cii + math.sqrt(cii * cjj * det) / cjj
    return math.sqrt(1.0 / (2.0 * delta)) * math.sqrt(inner)


def _whittle_radius_diag(cov_ii, delta):
    # diagonal specialisation, safe for vanishing variances
    return np.sqrt(np.maximum(cov_ii, 0.0) / delta)


def _radius_gain(kind: CriterionKind, delta: float) -> float:
    """Radius per unit standard deviation."""
    if kind is CriterionKind.CHEBYSHEV:
        return math.sqrt(2.0 / delta)
    return math.sqrt(1.0 / delta)


@dataclass(frozen=True, eq=False)
class CriterionFn:
    """Vectorised criterion with a certified global Lipschitz constant.

    ``local_lipschitz(a, b)`` optionally returns a tighter constant valid on
    the sub-interval ``[a, b]``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    kind: CriterionKind
    pair: Tuple
    t0: float
    tf: float
    local_lipschitz: Optional[Callable[[float, float], float]] = None

    def __call__(self, t):
        if np.ndim(t) == 0:
            return float(self.func(np.array([float(t)]))[0])
        return self.func(np.asarray(t, dtype=float))

    def lipschitz_on(self, a: float, b: float) -> float:
        if self.local_lipschitz is None:
            return self.lipschitz
        return min(self.lipschitz, self.local_lipschitz(a, b))

    def to_target(self, floor: float = 1e-12) -> ScalarTarget:
        """Wrap as a certification target; zero constants are lifted to ``floor``."""
        lip = max(self.lipschitz, floor)
        local = None
        if self.local_lipschitz is not None:
            local = lambda a, b: max(self.local_lipschitz(a, b), floor)  # noqa: E731
        return ScalarTarget(self.__call__, self.t0, self.tf, lip, local)

    def trace(self, n: int = 512):
        """``(times, values)`` on a uniform grid, for plotting and CSV export."""
        ts = np.linspace(self.t0, self.tf, n)
        return ts, self.func(ts)


def _check_pair(ma: MomentFunctions, mb: MomentFunctions, kind: CriterionKind):
    if ma.dim != mb.dim:
        raise DimensionMismatchError(f"agents have dimensions {ma.dim} and {mb.dim}")
    if abs(ma.t0 - mb.t0) > 1e-12 or abs(ma.tf - mb.tf) > 1e-12:
        raise InvalidArgumentError("moment functions do not share a horizon")
    if kind is CriterionKind.WHITTLE and ma.dim != 2:
        raise DimensionMismatchError("the Whittle criterion is defined for D = 2 only")


def make_pair_criterion(
    ma: MomentFunctions,
    mb: MomentFunctions,
    params: PairParams,
    kind=CriterionKind.CHEBYSHEV,
    pair=("a", "b"),
    with_lipschitz: bool = True,
) -> CriterionFn:
    """Criterion for agents ``a`` and ``b``.

    With ``with_lipschitz`` the global constant is attached; a vanishing
    variance then raises :class:`SingularityError` and the caller should
    switch to the grid fallback (or pass ``with_lipschitz=False``, which
    leaves the constant at ``inf``).
    """
    kind = CriterionKind.parse(kind)
    _check_pair(ma, mb, kind)
    delta, lam = params.delta, params.lambda_pair
    radius = chebyshev_radius if kind is CriterionKind.CHEBYSHEV else _whittle_radius_diag
    t0 = ma.t0
    tf = ma.tf

    def func(ts):
        ts = np.clip(np.atleast_1d(ts), t0, tf)
        gap = np.abs(ma.mean(ts) - mb.mean(ts))
        ra = radius(ma.cov(ts), delta)
        rb = radius(mb.cov(ts), delta)
        return np.max(gap - lam - ra - rb, axis=1)

    crit = CriterionFn(func, math.inf, kind, tuple(pair), t0, tf)
    if not with_lipschitz:
        return crit
    lip = attach_lipschitz(crit, ma, mb, params)
    gain = _radius_gain(kind, delta)

    def local(a, b):
        lm = ma.mean_lipschitz_on(a, b) + mb.mean_lipschitz_on(a, b)
        ls = ma.std_lipschitz_on(a, b) + mb.std_lipschitz_on(a, b)
        return float(np.max(lm + gain * ls))

    return CriterionFn(func, lip, kind, tuple(pair), t0, tf, local)


def attach_lipschitz(crit: CriterionFn, ma: MomentFunctions, mb: MomentFunctions, params: PairParams) -> float:
    """Certified global Lipschitz constant of a pair criterion.

    Per dimension the constant is ``L(mu^a) + L(mu^b) + g (L(sigma^a) +
    L(sigma^b))`` with ``g`` the radius-per-standard-deviation gain of the
    criterion kind; the max rule then covers the outer maximum.
    """
    gain = _radius_gain(crit.kind, params.delta)
    try:
        sa = ma.std_lipschitz()
        sb = mb.std_lipschitz()
    except SingularityError as exc:
        raise SingularityError(
            f"{exc}; no finite Lipschitz constant exists, use the grid_fallback detector"
        ) from None
    per_dim = []
    for i in range(ma.dim):
        gap = lipschitz_combine("sum", [ma.mean_lipschitz[i], mb.mean_lipschitz[i]])
        spread = lipschitz_combine("scale", [lipschitz_combine("sum", [sa[i], sb[i]])], factor=gain)
        per_dim.append(lipschitz_combine("sum", [gap, spread]))
    return float(lipschitz_combine("max", per_dim).value)


def multi_agent_criterion(criteria: Sequence[CriterionFn]) -> CriterionFn:
    """Pointwise minimum over pair criteria (union bound over opponents)."""
    criteria = list(criteria)
    if not criteria:
        raise InvalidArgumentError("multi-agent criterion needs at least one pair criterion")
    if len(criteria) == 1:
        return criteria[0]
    t0, tf = criteria[0].t0, criteria[0].tf
    for c in criteria[1:]:
        if abs(c.t0 - t0) > 1e-12 or abs(c.tf - tf) > 1e-12:
            raise InvalidArgumentError("criteria do not share a horizon")

    def func(ts):
        return np.min(np.vstack([c.func(ts) for c in criteria]), axis=0)

    lip = max(c.lipschitz for c in criteria)
    def local_max(a, b):
        return max(c.lipschitz_on(a, b) for c in criteria)

    local = local_max if all(c.local_lipschitz is not None for c in criteria) else None

    pair = (criteria[0].pair[0], tuple(c.pair[1] for c in criteria))
    return CriterionFn(func, lip, criteria[0].kind, pair, t0, tf, local)


__all__ = [
    "CriterionKind",
    "PairParams",
    "CriterionFn",
    "chebyshev_radius",
    "whittle_radius",
    "make_pair_criterion",
    "attach_lipschitz",
    "multi_agent_criterion",
]
