"""Multi-agent coordination: fixed priorities (FP) and the lazy auction (AUC)."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .avoidance import (
    CollisionContext,
    CostWeights,
    arena_box,
    normalize_goals,
    plan_cost,
    resolve_free,
    resolve_wait,
)
from .criterion import CriterionKind, PairParams, make_pair_criterion
from .detection import DEFAULT_BUDGET, DetectionReport, Detector, detect
from .errors import InvalidArgumentError, PlanError, SingularityError
from .sde import AgentDynamics, MomentFunctions, Plan

log = logging.getLogger(__name__)

ARENA_INFLATE = 0.2


class Protocol(str, enum.Enum):
    FP = "fp"
    AUC = "auc"


class Resolution(str, enum.Enum):
    WAIT = "wait"
    FREE = "free"


def _parse_enum(cls, value):
    if isinstance(value, cls):
        return value
    try:
        return cls(str(value).lower())
    except ValueError:
        raise InvalidArgumentError(f"unknown {cls.__name__.lower()} {value!r}") from None


@dataclass
class Agent:
    id: int
    dyn: AgentDynamics
    plan: Plan
    goals: tuple = ()

    def __post_init__(self):
        self.goals = normalize_goals(self.goals)


@dataclass(frozen=True)
class CoordinationConfig:
    protocol: Protocol = Protocol.AUC
    resolution: Resolution = Resolution.WAIT
    max_rounds: int = 50
    delta: float = 0.05
    split_delta: bool = True
    criterion: CriterionKind = CriterionKind.CHEBYSHEV
    detector: Detector = Detector.ADAPTIVE
    budget: int = DEFAULT_BUDGET
    weights: CostWeights = CostWeights()
    seed: int = 0
    restarts: int = 10
    wait_cap: int = 20
    box: Optional[Tuple] = None
    avoid_bystanders: bool = True

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "protocol", _parse_enum(Protocol, self.protocol))
        set_(self, "resolution", _parse_enum(Resolution, self.resolution))
        set_(self, "criterion", CriterionKind.parse(self.criterion))
        set_(self, "detector", Detector.parse(self.detector))
        if self.max_rounds < 1:
            raise InvalidArgumentError("max_rounds must be >= 1")
        if not 0 < self.delta < 1:
            raise InvalidArgumentError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class AuctionRecord:
    round: int
    opener: int
    participants: tuple
    bids: Dict[int, float]
    winner: int
    t_coll: float

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "opener": self.opener,
            "participants": list(self.participants),
            "bids": {str(k): float(v) for k, v in self.bids.items()},
            "winner": self.winner,
            "t_coll": float(self.t_coll),
        }


@dataclass
class RunReport:
    protocol: Protocol
    resolution: Resolution
    resolved: bool
    rounds: int
    agent_rounds: Dict[int, int]
    plans: Dict[int, Plan]
    auctions: List[AuctionRecord] = field(default_factory=list)
    cycle_detected: bool = False


class _World:
    """Current plans plus cached moments and pair criteria."""

    def __init__(self, agents: List[Agent], cfg: CoordinationConfig):
        self.cfg = cfg
        self.agents = {a.id: a for a in agents}
        self.order = sorted(self.agents)
        if len(self.order) != len(agents):
            raise InvalidArgumentError("agent ids must be unique")
        self.plans = {a.id: a.plan for a in agents}
        n_opp = max(len(agents) - 1, 1)
        self.pair_delta = cfg.delta / n_opp if cfg.split_delta else cfg.delta
        self._moments: Dict[int, MomentFunctions] = {}

    def moments(self, a, plan: Optional[Plan] = None) -> MomentFunctions:
        if plan is not None and plan is not self.plans[a]:
            return MomentFunctions(self.agents[a].dyn, plan)
        m = self._moments.get(a)
        if m is None or m.plan is not self.plans[a]:
            m = MomentFunctions(self.agents[a].dyn, self.plans[a])
            self._moments[a] = m
        return m

    def set_plan(self, a, plan: Plan):
        self.plans[a] = plan

    def pair_params(self, a, b) -> PairParams:
        return PairParams.for_agents(self.pair_delta, self.agents[a].dyn.diameter, self.agents[b].dyn.diameter)

    def criteria(self, a, others, plan: Optional[Plan] = None):
        ma = self.moments(a, plan)
        out = {}
        for b in others:
            mb = self.moments(b)
            params = self.pair_params(a, b)
            try:
                out[b] = make_pair_criterion(ma, mb, params, self.cfg.criterion, (a, b))
            except SingularityError:
                out[b] = make_pair_criterion(ma, mb, params, self.cfg.criterion, (a, b), with_lipschitz=False)
        return out

    def detect(self, a, others, plan: Optional[Plan] = None) -> DetectionReport:
        crit = self.criteria(a, others, plan)
        return detect(a, others, crit, self.cfg.detector, self.cfg.budget)

    def context(self, a, others) -> CollisionContext:
        plan = self.plans[a]
        opp = [(b, self.moments(b), self.pair_params(a, b)) for b in others]
        return CollisionContext(self.agents[a].dyn, plan.t0, plan.tf, opp, self.cfg.criterion)

    def search_opponents(self, a, others):
        """Opponents scored by the FREE search: ``others`` plus, optionally, every bystander."""
        if not self.cfg.avoid_bystanders:
            return list(others)
        return [b for b in self.order if b != a]

    def box(self):
        """FREE search box: the arena (or the hull of all setpoints and goals), inflated."""
        if self.cfg.box is not None:
            pts = list(self.cfg.box)
        else:
            pts = [s for a in self.order for s in self.agents[a].plan.setpoints]
            pts += [g for a in self.order for _, g in self.agents[a].goals]
        return arena_box(pts, ARENA_INFLATE)

    def key(self):
        return tuple(self.plans[a].key() for a in self.order)


def _free_seed(cfg: CoordinationConfig, round_no: int, agent: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, round_no, agent]).generate_state(1)[0])


def _avoiding_plan(world: _World, a, others, round_no: int) -> Plan:
    cfg = world.cfg
    agent = world.agents[a]
    plan = world.plans[a]
    if cfg.resolution is Resolution.FREE:
        # bystanders enter the search so a loser does not trade one conflict for another
        ctx = world.context(a, world.search_opponents(a, others))
        return resolve_free(
            plan, agent.dyn, agent.goals, cfg.weights, ctx, world.box(),
            restarts=cfg.restarts, seed=_free_seed(cfg, round_no, a),
        )
    # WAIT: keep delaying departure until the participants are cleared
    for _ in range(cfg.wait_cap):
        rep = world.detect(a, others, plan)
        if not rep.flag:
            break
        try:
            plan = resolve_wait(plan, rep.t_coll)
        except PlanError:
            break
    return plan


def compute_bid(world: _World, a, others, round_no: int = 0) -> Tuple[float, Plan]:
    """Bid of agent ``a``: cost of its best avoiding plan minus the cost of
    keeping its current plan as if the others gave way."""
    agent = world.agents[a]
    avoid = _avoiding_plan(world, a, others, round_no)
    ctx = world.context(a, others)
    keep = plan_cost(agent.dyn, world.plans[a], agent.goals, world.cfg.weights)
    give_way = plan_cost(agent.dyn, avoid, agent.goals, world.cfg.weights, ctx)
    return give_way - keep, avoid


def select_winner(bids: Dict[int, float]) -> int:
    """Highest bid wins, ties go to the lowest index."""
    top = max(bids.values())
    return min(a for a, b in bids.items() if b == top)


def coordinate_fp(agents: List[Agent], cfg: CoordinationConfig):
    world = _World(agents, cfg)
    agent_rounds = {a: 0 for a in world.order}
    resolved = True
    for idx, a in enumerate(world.order[1:], start=1):
        higher = world.order[:idx]
        while True:
            rep = world.detect(a, higher)
            if not rep.flag:
                break
            if agent_rounds[a] >= cfg.max_rounds:
                log.warning("agent %s unresolved after %d rounds", a, agent_rounds[a])
                resolved = False
                break
            agent_rounds[a] += 1
            log.debug("FP round %d for agent %s: t_coll=%.4f", agent_rounds[a], a, rep.t_coll)
            try:
                world.set_plan(a, _resolve_one(world, a, higher, rep, agent_rounds[a]))
            except PlanError as exc:
                log.warning("agent %s cannot resolve further: %s", a, exc)
                resolved = False
                break
    report = RunReport(
        Protocol.FP, cfg.resolution, resolved, sum(agent_rounds.values()), agent_rounds, dict(world.plans)
    )
    return dict(world.plans), report


def _resolve_one(world: _World, a, others, rep: DetectionReport, round_no: int) -> Plan:
    cfg = world.cfg
    agent = world.agents[a]
    if cfg.resolution is Resolution.WAIT:
        return resolve_wait(world.plans[a], rep.t_coll)
    ctx = world.context(a, world.search_opponents(a, others))
    return resolve_free(
        world.plans[a], agent.dyn, agent.goals, cfg.weights, ctx, world.box(),
        restarts=cfg.restarts, seed=_free_seed(cfg, round_no, a),
    )


def coordinate_auc(agents: List[Agent], cfg: CoordinationConfig):
    world = _World(agents, cfg)
    records: List[AuctionRecord] = []
    agent_rounds = {a: 0 for a in world.order}
    seen = {world.key()}
    cycle = False
    resolved = False
    for round_no in range(1, cfg.max_rounds + 1):
        rep = None
        for a in world.order:
            others = [b for b in world.order if b != a]
            r = world.detect(a, others)
            if r.flag:
                rep = r
                break
        if rep is None:
            resolved = True
            break
        participants = tuple(sorted(set(rep.conflict_set) | {rep.agent}))
        bids, avoid = {}, {}
        for p in participants:
            opp = [b for b in participants if b != p]
            bids[p], avoid[p] = compute_bid(world, p, opp, round_no)
        winner = select_winner(bids)
        for p in participants:
            if p != winner:
                world.set_plan(p, avoid[p])
                agent_rounds[p] += 1
        records.append(AuctionRecord(round_no, rep.agent, participants, bids, winner, rep.t_coll))
        log.debug("round %d: auction %s bids %s winner %s", round_no, participants, bids, winner)
        key = world.key()
        if key in seen and not cycle:
            log.warning("plan configuration repeated in round %d; coordination may be cycling", round_no)
            cycle = True
        seen.add(key)
    else:
        # budget spent: one last check so a final successful round still counts
        resolved = not any(world.detect(a, [b for b in world.order if b != a]).flag for a in world.order)
    if not resolved:
        log.warning("AUC unresolved after %d rounds", cfg.max_rounds)
    report = RunReport(
        Protocol.AUC, cfg.resolution, resolved, len(records), agent_rounds, dict(world.plans), records, cycle
    )
    return dict(world.plans), report, records


def coordinate(agents: List[Agent], cfg: CoordinationConfig):
    """Dispatch on ``cfg.protocol``; returns ``(plans, report)``."""
    if cfg.protocol is Protocol.FP:
        return coordinate_fp(agents, cfg)
    plans, report, _ = coordinate_auc(agents, cfg)
    return plans, report


def verify_plans(agents: List[Agent], plans: Dict[int, Plan], cfg: CoordinationConfig) -> Dict[int, DetectionReport]:
    """Detect every agent against all others under ``plans``."""
    world = _World([replace(a, plan=plans[a.id]) for a in agents], cfg)
    return {a: world.detect(a, [b for b in world.order if b != a]) for a in world.order}


__all__ = [
    "Agent",
    "Protocol",
    "Resolution",
    "CoordinationConfig",
    "AuctionRecord",
    "RunReport",
    "compute_bid",
    "select_winner",
    "coordinate_fp",
    "coordinate_auc",
    "coordinate",
    "verify_plans",
]
