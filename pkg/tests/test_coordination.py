import numpy as np
import pytest

from stochcoll.config import bundled_scenario, load
from stochcoll.coordination import (
    Agent,
    CoordinationConfig,
    _World,
    compute_bid,
    coordinate,
    coordinate_auc,
    coordinate_fp,
    select_winner,
    verify_plans,
)
from stochcoll.errors import InvalidArgumentError
from stochcoll.sde import AgentDynamics, MomentFunctions, Plan

from .conftest import static_agent


def exp1(**over):
    cfg = load(bundled_scenario("exp1"))
    return cfg.build_agents(), cfg.coordination_config(**over)


def parked(i, pos, tf=2.0):
    dyn, plan = static_agent(pos, 1e-4, gain=5.0, tf=tf)
    return Agent(i, dyn, plan, [(tf, pos)])


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        CoordinationConfig(max_rounds=0)
    with pytest.raises(InvalidArgumentError):
        CoordinationConfig(protocol="round-robin")
    assert CoordinationConfig(protocol="FP").protocol.value == "fp"


def test_single_agent_fp():
    a = parked(1, [0.0, 0.0])
    plans, rep = coordinate_fp([a], CoordinationConfig(protocol="fp"))
    assert plans[1] is a.plan and rep.rounds == 0 and rep.resolved


def test_far_apart_agents_unchanged():
    agents = [parked(1, [0.0, 0.0]), parked(2, [10.0, 10.0])]
    for proto in ("fp", "auc"):
        plans, rep = coordinate(agents, CoordinationConfig(protocol=proto))
        assert rep.resolved and rep.rounds == 0
        assert all(plans[a.id] is a.plan for a in agents)
    _, rep, records = coordinate_auc(agents, CoordinationConfig())
    assert records == []


def test_exp1_fp_wait_lower_priority_waits():
    agents, cfg = exp1(protocol="fp")
    plans, rep = coordinate(agents, cfg)
    assert rep.resolved
    assert plans[1] is agents[0].plan  # non-interference
    assert len(plans[2]) > len(agents[1].plan)
    assert rep.agent_rounds[1] == 0 and rep.agent_rounds[2] >= 1
    assert not any(r.flag for r in verify_plans(agents, plans, cfg).values())


def test_exp1_auc_wait_reverses_priority():
    agents, cfg = exp1()
    plans, rep, records = coordinate_auc(agents, cfg)
    assert rep.resolved and 1 <= rep.rounds <= 10
    # agent 1 loses the first auction and waits; agent 2 keeps its plan
    assert records[0].winner == 2
    assert plans[2] is agents[1].plan
    assert len(plans[1]) > len(agents[0].plan)
    assert not any(r.flag for r in verify_plans(agents, plans, cfg).values())
    for rec in records:
        assert rec.winner in rec.participants
        assert rec.bids[rec.winner] == max(rec.bids.values())
        assert rec.winner == min(p for p, b in rec.bids.items() if b == rec.bids[rec.winner])


def test_reproducible():
    agents, cfg = exp1()
    p1, r1, rec1 = coordinate_auc(agents, cfg)
    p2, r2, rec2 = coordinate_auc(agents, cfg)
    assert [r.to_dict() for r in rec1] == [r.to_dict() for r in rec2]
    assert all(p1[a].same_as(p2[a]) for a in p1)


def test_select_winner_tie_rule():
    assert select_winner({3: 1.0, 1: 1.0, 2: 0.5}) == 1
    assert select_winner({1: -2.0, 2: 0.0}) == 2


def test_free_avoidance_bids_zero():
    agents = [parked(1, [0.0, 0.0]), parked(2, [10.0, 10.0])]
    world = _World(agents, CoordinationConfig())
    bid, plan = compute_bid(world, 1, [2])
    assert bid == pytest.approx(0.0, abs=1e-12)
    assert plan is agents[0].plan


def test_goal_miss_dominates_bid():
    agents, cfg = exp1()
    world = _World(agents, cfg)
    bid2, _ = compute_bid(world, 2, [1])
    assert bid2 > 0.5 * cfg.weights.w2  # waiting costs agent 2 its intermediate goal


def test_symmetric_agents_equal_bids():
    tf = 2.0
    agents = []
    for i, (x0, xf) in enumerate([([0.0, 5.0], [10.0, 5.0]), ([10.0, 5.0], [0.0, 5.0])], start=1):
        dyn = AgentDynamics(gains=5.0, noise=0.02, initial_mean=x0)
        agents.append(Agent(i, dyn, Plan([0.0, tf], [x0, xf], tf), [(tf, xf)]))
    world = _World(agents, CoordinationConfig())
    b1, _ = compute_bid(world, 1, [2])
    b2, _ = compute_bid(world, 2, [1])
    assert b1 == pytest.approx(b2, rel=1e-9)
    _, _, records = coordinate_auc(agents, CoordinationConfig())
    assert records[0].winner == 1


def test_exp2_auc_free_resolves():
    cfg = load(bundled_scenario("exp2"))
    agents = cfg.build_agents()
    ccfg = cfg.coordination_config()
    plans, rep = coordinate(agents, ccfg)
    assert rep.resolved
    assert not any(r.flag for r in verify_plans(agents, plans, ccfg).values())
    # the winner of the crossing keeps its straight plan; a loser leaves the x = 5 line
    moved = [a for a in agents if not plans[a.id].same_as(a.plan)]
    assert moved
    for a in moved:
        xs = MomentFunctions(a.dyn, plans[a.id]).mean(np.linspace(cfg.t0, cfg.tf, 301))[:, 0]
        assert np.max(np.abs(xs - 5.0)) > 0.5
