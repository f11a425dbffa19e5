"""Confidence that a sign check on a grid misses no negative region.

Given a prior over the number ``n`` of sign change points (SCPs) of a
function with positive endpoint values, a negative region escapes a grid of
``k`` equal-probability cells only if every cell holds an even number of
SCPs.  This module bounds that miss probability and picks ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict

from .errors import InvalidArgumentError, UnreachableConfidenceError

PRIOR_TOL = 1e-12
DEFAULT_K_MAX = 10**12


@dataclass(frozen=True)
class ScpPrior:
    mass: Dict[int, float]

    def __post_init__(self):
        mass = {int(n): float(p) for n, p in dict(self.mass).items()}
        if not mass:
            raise InvalidArgumentError("prior needs at least one support point")
        if any(n < 0 for n in mass):
            raise InvalidArgumentError("SCP counts must be non-negative")
        if any(p < 0 for p in mass.values()):
            raise InvalidArgumentError("probabilities must be non-negative")
        total = sum(mass.values())
        if abs(total - 1.0) > PRIOR_TOL:
            raise InvalidArgumentError(f"prior mass sums to {total}, not 1")
        object.__setattr__(self, "mass", mass)


def _log_binom(n: int, r: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def scp_miss_bound(n: int, k: int) -> float:
    """Upper bound on the miss probability with ``n`` SCPs in ``k`` cells.

    Zero for odd ``n`` (some cell must hold an odd count) and for ``n = 0``
    (no SCP means no negative region).  Otherwise
    ``min(1, C(n(n-1)/2, n/2) / k^(n/2))``, evaluated in log space.
    """
    if k < 1:
        raise InvalidArgumentError("need k >= 1")
    if n < 0:
        raise InvalidArgumentError("need n >= 0")
    if n == 0 or n % 2:
        return 0.0
    half = n // 2
    log_p = _log_binom(n * (n - 1) // 2, half) - half * math.log(k)
    return 1.0 if log_p >= 0 else math.exp(log_p)


def lattice_confidence(prior: ScpPrior, k: int) -> float:
    """Miss probability ``sum_n P_{n,k} Q[n]`` (the complement is the confidence)."""
    return sum(p * scp_miss_bound(n, k) for n, p in prior.mass.items() if p > 0 and n % 2 == 0)


def choose_k(prior: ScpPrior, theta: float, k_max: int = DEFAULT_K_MAX) -> int:
    """Smallest ``k`` whose confidence ``1 - miss`` is at least ``theta``."""
    if not 0 < theta < 1:
        raise InvalidArgumentError("theta must lie in (0, 1)")
    target = 1.0 - theta

    def ok(k):
        # relative slack absorbs rounding in 1 - theta
        return lattice_confidence(prior, k) <= target * (1.0 + 1e-9)

    if ok(1):
        return 1
    hi = 2
    while not ok(hi):
        if hi >= k_max:
            best = lattice_confidence(prior, k_max)
            raise UnreachableConfidenceError(
                f"confidence {theta} not reached for k <= {k_max}; best miss probability {best:.3g}", best
            )
        hi = min(2 * hi, k_max)
    lo = hi // 2  # not ok
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


__all__ = ["ScpPrior", "scp_miss_bound", "lattice_confidence", "choose_k"]
