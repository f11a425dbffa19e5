"""Sign certification of Lipschitz functions on an interval.

Two certifiers decide whether a scalar function with a known Lipschitz
constant attains a non-positive value on ``[t0, tf]``:

* :func:`certify_naive` refines an equidistant dyadic grid until either a
  non-positive sample appears or every sample exceeds ``L * spacing``.
* :func:`certify_adaptive` maintains the piecewise-linear lower envelope
  ("floor") of Shubert's method and samples at its global minimiser.

Both return a :class:`CertificationOutcome`.  A third verdict,
``INCONCLUSIVE``, is reported when the evaluation budget runs out; callers
doing collision detection must treat it as "collision possible".

The module also carries the Lipschitz-constant arithmetic used to build
certified constants for composite functions.
"""

from __future__ import annotations

import bisect
import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    InsufficientBeliefError,
    InvalidArgumentError,
    InvalidTargetError,
    SingularityError,
)

__all__ = [
    "Verdict",
    "ScalarTarget",
    "CertificationOutcome",
    "LipschitzConstant",
    "certify_naive",
    "certify_adaptive",
    "floor_values",
    "lipschitz_combine",
    "lipschitz_from_belief",
]


class Verdict(enum.Enum):
    NON_POSITIVE_FOUND = "non_positive_found"
    ALL_POSITIVE = "all_positive"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ScalarTarget:
    """A function on ``[t0, tf]`` together with a Lipschitz constant.

    ``local_lipschitz(a, b)``, when given, returns a constant valid on the
    sub-interval ``[a, b]``; the smaller of it and the global constant is used.
    """

    func: Callable[[float], float]
    t0: float
    tf: float
    lipschitz: float
    local_lipschitz: Optional[Callable[[float, float], float]] = None

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.tf)) or self.t0 >= self.tf:
            raise InvalidArgumentError(f"need t0 < tf, got [{self.t0}, {self.tf}]")
        if not math.isfinite(self.lipschitz) or self.lipschitz <= 0:
            raise InvalidArgumentError(f"Lipschitz constant must be positive, got {self.lipschitz}")

    def evaluate(self, t: float) -> float:
        value = float(self.func(t))
        if not math.isfinite(value):
            raise InvalidTargetError(f"target returned {value} at t={t}")
        return value

    def lipschitz_on(self, a: float, b: float) -> float:
        if self.local_lipschitz is None:
            return self.lipschitz
        local = float(self.local_lipschitz(a, b))
        if not local > 0 or not math.isfinite(local):
            return self.lipschitz
        return min(local, self.lipschitz)


@dataclass(frozen=True)
class CertificationOutcome:
    flag: Verdict
    critical_time: Optional[float]
    evaluations: int
    floor_min: float
    t0: float
    tf: float
    # sorted (t, value) pairs the certifier evaluated
    samples: tuple = field(default=(), repr=False)
    # Lipschitz constant per sample interval, aligned with consecutive samples
    interval_lipschitz: tuple = field(default=(), repr=False)

    @property
    def found(self) -> bool:
        return self.flag is Verdict.NON_POSITIVE_FOUND

    @property
    def serialized_critical_time(self) -> float:
        """Critical time, or ``t0 - 1`` when none exists (serialized form)."""
        return self.t0 - 1.0 if self.critical_time is None else self.critical_time

    def floor_at(self, t) -> np.ndarray:
        ts = np.array([s[0] for s in self.samples])
        fs = np.array([s[1] for s in self.samples])
        return floor_values(ts, fs, np.asarray(self.interval_lipschitz), t)

    def trace_rows(self):
        """Rows ``(t, value, floor)`` for CSV export.

        Sampled points carry their value; per-interval floor minimisers carry
        ``nan`` as value.
        """
        rows = [(t, v, v) for t, v in self.samples]
        for (a, fa), (b, fb), lip in zip(self.samples, self.samples[1:], self.interval_lipschitz):
            xi, m = _interval_floor_min(a, b, fa, fb, lip)
            rows.append((xi, float("nan"), m))
        rows.sort(key=lambda r: r[0])
        return rows


@dataclass(frozen=True)
class LipschitzConstant:
    value: float
    valid_interval: Optional[tuple] = None

    def __post_init__(self):
        if not self.value >= 0:
            raise InvalidArgumentError(f"Lipschitz constant must be >= 0, got {self.value}")

    def __float__(self):
        return float(self.value)


def _interval_floor_min(a, b, fa, fb, lip):
    xi = 0.5 * (a + b) - (fb - fa) / (2.0 * lip)
    xi = min(max(xi, a), b)
    m = 0.5 * (fa + fb) - 0.5 * lip * (b - a)
    # guards against an underestimated constant on this interval
    m = min(m, fa, fb)
    return xi, m


def floor_values(ts, fs, lips, t):
    """Evaluate the Shubert floor built on samples ``(ts, fs)`` at ``t``.

    ``lips`` holds one Lipschitz constant per interval ``[ts[i], ts[i+1]]``
    (a scalar is broadcast).
    """
    ts = np.asarray(ts, dtype=float)
    fs = np.asarray(fs, dtype=float)
    lips = np.broadcast_to(np.asarray(lips, dtype=float), (len(ts) - 1,))
    t = np.asarray(t, dtype=float)
    idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
    left = fs[idx] - lips[idx] * (t - ts[idx])
    right = fs[idx + 1] - lips[idx] * (ts[idx + 1] - t)
    return np.maximum(left, right)


def certify_naive(target: ScalarTarget, max_refinements: int = 20) -> CertificationOutcome:
    """Dyadic grid refinement.

    Round ``r`` evaluates the full grid with spacing ``(tf - t0) / 2**r``.
    Each round re-evaluates every grid point, so ``evaluations`` grows as
    ``sum(2**r + 1)``.
    """
    if max_refinements < 0:
        raise InvalidArgumentError("max_refinements must be >= 0")
    t0, tf, lip = target.t0, target.tf, target.lipschitz
    evaluations = 0
    grid = values = None
    spacing = tf - t0
    for r in range(max_refinements + 1):
        n = 2**r
        spacing = (tf - t0) / n
        grid = t0 + spacing * np.arange(n + 1)
        grid[-1] = tf
        values = np.array([target.evaluate(t) for t in grid])
        evaluations += n + 1
        k = int(np.argmin(values))
        min_val = float(values[k])
        if min_val <= 0:
            return _naive_outcome(Verdict.NON_POSITIVE_FOUND, float(grid[k]), evaluations,
                                  min_val - lip * spacing, target, grid, values)
        if min_val > lip * spacing:
            return _naive_outcome(Verdict.ALL_POSITIVE, None, evaluations,
                                  min_val - lip * spacing, target, grid, values)
    return _naive_outcome(Verdict.INCONCLUSIVE, None, evaluations,
                          float(values.min()) - lip * spacing, target, grid, values)


def _naive_outcome(flag, crit, evaluations, floor_min, target, grid, values):
    samples = tuple(zip(grid.tolist(), values.tolist()))
    lips = (target.lipschitz,) * (len(samples) - 1)
    return CertificationOutcome(flag, crit, evaluations, floor_min, target.t0, target.tf,
                                samples, lips)


def certify_adaptive(target: ScalarTarget, max_evaluations: int = 10_000) -> CertificationOutcome:
    """Shubert-style adaptive certification.

    Both endpoints are evaluated first.  Afterwards the interval with the
    lowest floor value (leftmost on ties) is refined at its floor minimiser
    until a non-positive sample is found, the global floor minimum becomes
    positive, or ``max_evaluations`` is spent.
    """
    if max_evaluations < 2:
        raise InvalidArgumentError("max_evaluations must be >= 2")
    t0, tf = target.t0, target.tf
    f0, f1 = target.evaluate(t0), target.evaluate(tf)
    ts = [t0, tf]
    fs = {t0: f0, tf: f1}
    evaluations = 2

    def outcome(flag, crit, floor_min):
        samples = tuple((t, fs[t]) for t in ts)
        lips = tuple(target.lipschitz_on(a, b) for a, b in zip(ts, ts[1:]))
        return CertificationOutcome(flag, crit, evaluations, floor_min, t0, tf, samples, lips)

    if f0 <= 0 or f1 <= 0:
        crit = t0 if f0 <= 0 else tf
        return outcome(Verdict.NON_POSITIVE_FOUND, crit, min(f0, f1))

    # heap of (floor value, left, right); `right_of` marks live intervals
    heap = []
    right_of = {}

    def push(a, b):
        _, m = _interval_floor_min(a, b, fs[a], fs[b], target.lipschitz_on(a, b))
        right_of[a] = b
        heapq.heappush(heap, (m, a, b))

    def peek():
        while heap and right_of.get(heap[0][1]) != heap[0][2]:
            heapq.heappop(heap)
        return heap[0]

    push(t0, tf)
    dup_tol = 1e-12 * (tf - t0)
    while True:
        m, a, b = peek()
        if m > 0:
            return outcome(Verdict.ALL_POSITIVE, None, m)
        if evaluations >= max_evaluations:
            return outcome(Verdict.INCONCLUSIVE, None, m)
        heapq.heappop(heap)
        del right_of[a]
        xi, _ = _interval_floor_min(a, b, fs[a], fs[b], target.lipschitz_on(a, b))
        if xi - a <= dup_tol or b - xi <= dup_tol:
            lo, hi = _widest_adjacent(ts, a if xi - a <= dup_tol else b)
            if (lo, hi) != (a, b):
                push(a, b)
                del right_of[lo]
                a, b = lo, hi
            xi = 0.5 * (a + b)
            if b - a <= dup_tol:
                # interval exhausted at machine resolution
                return outcome(Verdict.INCONCLUSIVE, None, m)
        value = target.evaluate(xi)
        evaluations += 1
        fs[xi] = value
        bisect.insort(ts, xi)
        if value <= 0:
            return outcome(Verdict.NON_POSITIVE_FOUND, xi, m)
        push(a, xi)
        push(xi, b)


def _widest_adjacent(ts, p):
    """The wider of the two grid intervals touching grid point ``p``."""
    i = bisect.bisect_left(ts, p)
    candidates = []
    if i > 0:
        candidates.append((ts[i - 1], ts[i]))
    if i + 1 < len(ts):
        candidates.append((ts[i], ts[i + 1]))
    return max(candidates, key=lambda iv: (iv[1] - iv[0], -iv[0]))


# -- Lipschitz arithmetic ----------------------------------------------------

def _values(inputs):
    return [float(x) for x in inputs]


def lipschitz_combine(op: str, inputs: Sequence, **bounds) -> LipschitzConstant:
    """Lipschitz constant of a composite function from its parts.

    ``op`` is one of ``sum, scale, abs, max, product, reciprocal, sqrt,
    compose, power``.  Extra bounds are keyword arguments:

    - ``scale``: ``factor``
    - ``product``: ``sups`` (sup |f|, sup |g|)
    - ``reciprocal``: ``inf`` (inf |f| > 0)
    - ``sqrt``: ``inf`` (infimum of the argument's range, > 0); ``inputs`` may
      be empty, giving the constant of the square root itself
    - ``power``: ``exponent`` and ``sup`` (or ``inf`` for exponents < 1)

    Optional ``interval`` is attached to the result unchanged.
    """
    vals = _values(inputs)
    interval = bounds.pop("interval", None)
    if any(v < 0 for v in vals):
        raise InvalidArgumentError("input constants must be non-negative")
    if op == "sum":
        value = sum(vals)
    elif op == "scale":
        (lf,) = vals
        value = abs(float(bounds["factor"])) * lf
    elif op == "abs":
        (value,) = vals
    elif op == "max":
        value = max(vals)
    elif op == "compose":
        # inputs ordered (outer g, inner f)
        lg, lf = vals
        value = lg * lf
    elif op == "product":
        lf, lg = vals
        sf, sg = (abs(float(s)) for s in bounds["sups"])
        value = sf * lg + sg * lf
    elif op == "reciprocal":
        (lf,) = vals
        b = float(bounds["inf"])
        if not b > 0:
            raise SingularityError(f"reciprocal needs inf|f| > 0, got {b}")
        value = lf / b**2
    elif op == "sqrt":
        a = float(bounds["inf"])
        if not a > 0:
            raise SingularityError(f"sqrt needs a positive domain infimum, got {a}")
        lf = vals[0] if vals else 1.0
        value = lf / (2.0 * math.sqrt(a))
    elif op == "power":
        (lf,) = vals
        q = float(bounds["exponent"])
        if q >= 1:
            value = abs(q) * abs(float(bounds["sup"])) ** (q - 1) * lf
        else:
            b = float(bounds["inf"])
            if not b > 0:
                raise SingularityError(f"power {q} < 1 needs inf|f| > 0, got {b}")
            value = abs(q) * b ** (q - 1) * lf
    else:
        raise InvalidArgumentError(f"unknown Lipschitz rule {op!r}")
    return LipschitzConstant(float(value), interval)


def lipschitz_from_belief(cdf_samples, confidence: float) -> LipschitzConstant:
    """Smallest tabulated value whose cumulative probability reaches ``confidence``.

    ``cdf_samples`` is a sequence of ``(value, cumulative probability)`` pairs
    sorted by value.
    """
    if not 0.0 <= confidence <= 1.0:
        raise InvalidArgumentError(f"confidence must lie in [0, 1], got {confidence}")
    table = [(float(v), float(p)) for v, p in cdf_samples]
    if not table:
        raise InsufficientBeliefError("empty belief table")
    probs = [p for _, p in table]
    if any(p1 < p0 for p0, p1 in zip(probs, probs[1:])):
        raise InvalidArgumentError("cumulative probabilities must be non-decreasing")
    for value, prob in table:
        if prob >= confidence:
            return LipschitzConstant(value)
    raise InsufficientBeliefError(
        f"belief never reaches {confidence}; max tabulated probability is {probs[-1]}"
    )
