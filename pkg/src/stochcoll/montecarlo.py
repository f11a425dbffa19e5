"""Euler-Maruyama simulation of agent plans and ensemble metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidArgumentError
from .sde import AgentDynamics, Plan

CHUNK_DRAWS = 2048


@dataclass(frozen=True)
class SimConfig:
    n_draws: int = 100
    dt: float = 1e-3
    master_seed: int = 0

    def __post_init__(self):
        if int(self.n_draws) < 1:
            raise InvalidArgumentError("n_draws must be >= 1")
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Sampled paths: ``paths[draw, step, dim]`` at ``times[step]``."""

    times: np.ndarray
    paths: np.ndarray

    @property
    def n_draws(self):
        return self.paths.shape[0]

    def at(self, t: float) -> np.ndarray:
        """States of all draws at the recorded time nearest to ``t``."""
        return self.paths[:, int(np.argmin(np.abs(self.times - t))), :]


def _step_grid(t0, tf, dt):
    n = max(1, int(round((tf - t0) / dt)))
    return np.linspace(t0, tf, n + 1), (tf - t0) / n


def draw_rng(master_seed: int, stream: int, draw: int) -> np.random.Generator:
    """Independent generator per (seed, agent stream, draw)."""
    return np.random.default_rng([int(master_seed), int(stream), int(draw)])


def simulate_paths(dyn: AgentDynamics, plan: Plan, sim: SimConfig, stream: int = 0,
                   record_times: Optional[Sequence[float]] = None) -> Ensemble:
    """Euler-Maruyama paths of one agent following ``plan``.

    The initial state is drawn from ``N(mu0, C0)``.  Each draw owns its
    random stream, so results do not depend on chunking.  With
    ``record_times`` only the steps nearest to those times are kept, which
    keeps memory flat for large ensembles.
    """
    if dyn.dim != plan.dim:
        raise DimensionMismatchError("dynamics and plan dimensions differ")
    grid, dt = _step_grid(plan.t0, plan.tf, sim.dt)
    n_steps = grid.size - 1
    if record_times is None:
        keep = np.arange(grid.size)
    else:
        keep = np.array([int(np.argmin(np.abs(grid - t))) for t in record_times])
    ref = plan.setpoint_after(grid[:-1])  # reference on [t_k, t_k + dt)
    k, a = dyn.gains, dyn.drift
    noise_scale = np.sqrt(dyn.noise * dt)
    init_scale = np.sqrt(dyn.initial_cov)
    dim = dyn.dim
    out = np.empty((sim.n_draws, keep.size, dim))
    slot = {int(s): [] for s in np.unique(keep)}
    for j, s in enumerate(keep):
        slot[int(s)].append(j)

    for lo in range(0, sim.n_draws, CHUNK_DRAWS):
        hi = min(lo + CHUNK_DRAWS, sim.n_draws)
        eta = np.empty((hi - lo, n_steps + 1, dim))
        for j, d in enumerate(range(lo, hi)):
            draw_rng(sim.master_seed, stream, d).standard_normal(out=eta[j])
        x = dyn.initial_mean + init_scale * eta[:, 0]
        if 0 in slot:
            out[lo:hi, slot[0], :] = x[:, None, :]
        for step in range(n_steps):
            x = x + (k * (ref[step] - x) + a * x) * dt + noise_scale * eta[:, step + 1]
            if step + 1 in slot:
                out[lo:hi, slot[step + 1], :] = x[:, None, :]
    return Ensemble(grid[keep], out)


def simulate_agents(agents, plans: Dict[int, Plan], sim: SimConfig) -> Dict[int, Ensemble]:
    """Ensembles for every agent; the agent id selects the random stream."""
    return {a.id: simulate_paths(a.dyn, plans[a.id], sim, stream=a.id) for a in agents}


@dataclass(frozen=True)
class MetricsRow:
    method: str
    collision_prob_pct: float
    avg_path_length: float
    avg_sqr_goal_dist: float
    resolution_rounds: int
    per_instant_max_pct: float

    def __post_init__(self):
        if not 0.0 <= self.collision_prob_pct <= 100.0:
            raise InvalidArgumentError("collision percentage outside [0, 100]")

    FIELDS = ("method", "collision_prob_pct", "avg_path_length", "avg_sqr_goal_dist",
              "resolution_rounds", "per_instant_max_pct")

    def as_row(self):
        return [self.method, f"{self.collision_prob_pct:.6g}", f"{self.avg_path_length:.6g}",
                f"{self.avg_sqr_goal_dist:.6g}", str(self.resolution_rounds), f"{self.per_instant_max_pct:.6g}"]


def _check_aligned(ensembles: Dict[int, Ensemble]):
    ens = list(ensembles.values())
    ref = ens[0]
    for e in ens[1:]:
        if e.paths.shape[:2] != ref.paths.shape[:2] or not np.array_equal(e.times, ref.times):
            raise DimensionMismatchError("ensembles are not time-aligned")


def pair_collisions(ensembles: Dict[int, Ensemble], lambdas: Dict[tuple, float]) -> Dict[tuple, np.ndarray]:
    """Boolean ``[draw, step]`` collision indicators per agent pair."""
    _check_aligned(ensembles)
    out = {}
    for a, b in combinations(sorted(ensembles), 2):
        dist = np.linalg.norm(ensembles[a].paths - ensembles[b].paths, axis=2)
        out[(a, b)] = dist <= lambdas[(a, b)]
    return out


def per_instant_pair_frequency(ensembles, lambdas) -> Dict[tuple, np.ndarray]:
    """Fraction of draws in collision at each recorded step, per pair."""
    return {p: c.mean(axis=0) for p, c in pair_collisions(ensembles, lambdas).items()}


def estimate_metrics(ensembles: Dict[int, Ensemble], goals: Dict[int, Sequence], lambdas: Dict[tuple, float],
                     rounds: int = 0, method: str = "") -> MetricsRow:
    """Table-style metrics over an ensemble of joint executions.

    - collision: percentage of draws in which some pair comes within its
      diameter at some step; the per-instant maximum is reported as well
    - path length: chord length per path, averaged over draws and agents
    - goal distance: per draw, squared distances to every timed goal summed
      per agent, averaged over agents and then draws
    """
    _check_aligned(ensembles)
    ids = sorted(ensembles)
    n_draws = ensembles[ids[0]].n_draws
    hit = np.zeros(ensembles[ids[0]].paths.shape[:2], dtype=bool)
    for c in pair_collisions(ensembles, lambdas).values():
        hit |= c
    coll_pct = 100.0 * float(np.mean(hit.any(axis=1))) if len(ids) > 1 else 0.0
    inst_pct = 100.0 * float(np.max(hit.mean(axis=0))) if len(ids) > 1 else 0.0
    lengths = [np.linalg.norm(np.diff(ensembles[a].paths, axis=1), axis=2).sum(axis=1) for a in ids]
    path_len = float(np.mean(lengths))
    miss = np.zeros(n_draws)
    for a in ids:
        for t, g in goals.get(a, ()):
            d = ensembles[a].at(t) - np.asarray(g, dtype=float)
            miss += np.sum(d * d, axis=1)
    goal = float(np.mean(miss / len(ids)))
    return MetricsRow(method, coll_pct, path_len, goal, int(rounds), inst_pct)


def write_metrics_csv(path, rows: Sequence[MetricsRow]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MetricsRow.FIELDS)
        for r in rows:
            w.writerow(r.as_row())


ENSEMBLE_FIELDS = ("method", "agent", "draw", "t", "x", "y")


def write_ensembles_csv(path, ensembles_by_method: Dict[str, Dict[int, Ensemble]], stride: int = 10,
                        max_draws: Optional[int] = None):
    """Long-format path dump; coordinates beyond the second are dropped."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENSEMBLE_FIELDS)
        for method, ens in ensembles_by_method.items():
            for a in sorted(ens):
                e = ens[a]
                n = e.n_draws if max_draws is None else min(e.n_draws, max_draws)
                idx = np.arange(0, e.times.size, stride)
                if idx[-1] != e.times.size - 1:
                    idx = np.append(idx, e.times.size - 1)
                for d in range(n):
                    for s in idx:
                        p = e.paths[d, s]
                        y = f"{p[1]:.6g}" if p.size > 1 else ""
                        w.writerow([method, a, d, f"{e.times[s]:.6g}", f"{p[0]:.6g}", y])


__all__ = [
    "SimConfig",
    "Ensemble",
    "MetricsRow",
    "simulate_paths",
    "simulate_agents",
    "draw_rng",
    "pair_collisions",
    "per_instant_pair_frequency",
    "estimate_metrics",
    "write_metrics_csv",
    "write_ensembles_csv",
]
