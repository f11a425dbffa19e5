import numpy as np
import pytest

from stochcoll.avoidance import (
    CollisionContext,
    CostWeights,
    arena_box,
    cost_coll,
    cost_miss,
    cost_traj,
    plan_cost,
    plan_cost_parts,
    resolve_free,
    resolve_wait,
)
from stochcoll.criterion import PairParams, make_pair_criterion, multi_agent_criterion
from stochcoll.detection import detect
from stochcoll.errors import InvalidArgumentError, PlanError
from stochcoll.sde import AgentDynamics, MomentFunctions, Plan, mean_at

from .conftest import static_agent


def mover(x0, xf, k=5.0, tf=2.0, noise=0.02):
    dyn = AgentDynamics(gains=k, noise=noise, initial_mean=x0)
    return dyn, Plan([0.0, tf], [x0, xf], tf)


def test_weights_validation():
    assert CostWeights() == CostWeights(10.0, 1e3, 1e6, 1.0)
    with pytest.raises(InvalidArgumentError):
        CostWeights(w1=-1)
    with pytest.raises(InvalidArgumentError):
        CostWeights(w2=float("inf"))
    with pytest.raises(InvalidArgumentError):
        CostWeights(lambda_hinge=0)


def test_cost_traj_examples():
    dyn, plan = static_agent([1.0, 2.0])
    assert cost_traj(dyn, plan) == pytest.approx(0.0, abs=1e-12)
    dyn = AgentDynamics(gains=10.0, noise=0.0, initial_mean=[0.0, 0.0])
    straight = Plan([0.0], [[3.0, 4.0]], 5.0)
    assert cost_traj(dyn, straight) == pytest.approx(5.0, abs=1e-2)
    detour = Plan([0.0, 2.0], [[0.0, 4.0], [3.0, 4.0]], 5.0)
    assert cost_traj(dyn, detour) > cost_traj(dyn, straight)


def test_cost_miss_examples():
    dyn, plan = static_agent([0.0, 0.0])
    assert cost_miss(dyn, plan, [(1.0, [0.0, 0.0])]) == pytest.approx(0.0, abs=1e-20)
    assert cost_miss(dyn, plan, [(1.0, [3.0, 4.0])]) == pytest.approx(25.0)
    dyn2 = AgentDynamics(gains=5.0, noise=0.02, initial_mean=[5.0, 0.0])
    p2 = Plan([0.0, 1.0, 2.0], [[5.0, 0.0], [5.0, 7.0], [0.0, 7.0]], 2.0)
    goals = [(1.0, [5.0, 7.0]), (2.0, [0.0, 7.0])]
    m1, m2 = mean_at(dyn2, p2, 1.0), mean_at(dyn2, p2, 2.0)
    expected = np.sum((m1 - [5, 7]) ** 2) + np.sum((m2 - [0, 7]) ** 2)
    assert cost_miss(dyn2, p2, goals) == pytest.approx(expected)


def test_cost_coll_examples():
    assert cost_coll(0.5) == 0
    assert cost_coll(-0.2, 10) == pytest.approx(2.0)
    assert cost_coll(0.0) == 0


def test_plan_cost_is_weighted_sum():
    dyn, plan = mover([0.0, 0.0], [3.0, 0.0])
    goals = [(2.0, [3.0, 1.0])]
    w = CostWeights(2.0, 3.0, 4.0)
    traj, miss, coll = plan_cost_parts(dyn, plan, goals, w)
    assert coll == 0
    assert plan_cost(dyn, plan, goals, w) == pytest.approx(2 * traj + 3 * miss)


# --- collision context -------------------------------------------------------

def _context(dyn, plan, opp, kind="cheb", delta=0.05):
    return CollisionContext(dyn, plan.t0, plan.tf, [(2, MomentFunctions(*opp), PairParams(delta, 1.0))], kind)


@pytest.mark.parametrize("kind", ["cheb", "whittle"])
def test_context_floor_bounds_true_minimum(kind):
    rng = np.random.default_rng(4)
    for _ in range(20):
        own = mover(rng.uniform(0, 10, 2), rng.uniform(0, 10, 2), k=rng.uniform(1, 8))
        opp = mover(rng.uniform(0, 10, 2), rng.uniform(0, 10, 2), k=rng.uniform(1, 8))
        ctx = _context(*own, opp, kind)
        g = make_pair_criterion(MomentFunctions(*own), MomentFunctions(*opp), PairParams(0.05, 1.0), kind, (1, 2))
        dense = float(np.min(g(np.linspace(0, 2, 20_001))))
        assert ctx.gamma_min(own[1]) <= dense + 1e-9


def test_empty_context_has_no_collision_cost():
    dyn, plan = mover([0.0, 0.0], [3.0, 0.0])
    ctx = CollisionContext(dyn, 0.0, 2.0, [])
    assert plan_cost_parts(dyn, plan, [], CostWeights(), ctx)[2] == 0


# --- WAIT ------------------------------------------------------------------

def test_wait_examples():
    plan = Plan([0.0, 2.0], [[5.0, 10.0], [5.0, 5.0]], 2.0)
    w = resolve_wait(plan, 1.0)
    assert list(w.times) == [0.0, 1.0, 2.0]
    np.testing.assert_array_equal(w.setpoints[1], [5.0, 10.0])
    clamped = resolve_wait(plan, 0.0)
    assert clamped.times[1] == pytest.approx(2e-3)


def test_successive_waits_delay_departure():
    dyn = AgentDynamics(gains=5.0, noise=0.02, initial_mean=[5.0, 10.0])
    plan = Plan([0.0, 2.0], [[5.0, 10.0], [5.0, 5.0]], 2.0)
    w1 = resolve_wait(plan, 0.5)
    w2 = resolve_wait(w1, 0.3)  # earlier conflict than the current hold: hold longer anyway
    ts = np.linspace(0, 2, 201)
    y0, y1, y2 = (MomentFunctions(dyn, p).mean(ts)[:, 1] for p in (plan, w1, w2))
    assert np.all(y1 >= y0 - 1e-12) and np.all(y2 >= y1 - 1e-12)
    assert np.any(y2 > y1 + 1e-6)
    for p in (w1, w2):
        assert np.all(np.diff(p.times) > 0) and p.times[0] == 0.0


def test_wait_exhausted_raises():
    plan = Plan([0.0, 1.999], [[0.0, 0.0], [0.0, 0.0]], 2.0)
    with pytest.raises(PlanError):
        resolve_wait(plan, 1.999)


def test_arena_box_never_collapses():
    lo, hi = arena_box([[0.0, 5.0], [10.0, 5.0]], 0.2)
    np.testing.assert_allclose(lo, [-2.0, 3.0])
    np.testing.assert_allclose(hi, [12.0, 7.0])


# --- FREE ------------------------------------------------------------------

def test_free_no_conflict_does_not_worsen():
    dyn, plan = mover([0.0, 0.0], [3.0, 0.0])
    goals = [(2.0, [3.0, 0.0])]
    w = CostWeights()
    out = resolve_free(plan, dyn, goals, w, None, arena_box([[0, 0], [3, 0]]), restarts=3, seed=1)
    assert plan_cost(dyn, out, goals, w) <= plan_cost(dyn, plan, goals, w) + 1e-9


def _crossing():
    own = mover([5.0, 0.0], [5.0, 10.0], tf=3.0)
    opp = static_agent([5.0, 5.0], 1e-3, gain=5.0, tf=3.0)
    return own, opp


def test_free_arcs_around_obstacle():
    (dyn, plan), opp = _crossing()
    goals = [(3.0, [5.0, 10.0])]
    ctx = _context(dyn, plan, opp, "whittle")
    w = CostWeights()
    box = arena_box([[5, 0], [5, 10]])
    out = resolve_free(plan, dyn, goals, w, ctx, box, restarts=10, seed=0)
    assert plan_cost(dyn, out, goals, w, ctx) < plan_cost(dyn, plan, goals, w, ctx)
    assert plan_cost_parts(dyn, out, goals, w, ctx)[2] == 0
    g = make_pair_criterion(MomentFunctions(dyn, out), MomentFunctions(*opp), PairParams(0.05, 1.0),
                            "whittle", (1, 2))
    assert not detect(1, [2], {2: multi_agent_criterion([g])}).flag
    # the detour leaves the straight line x = 5
    xs = MomentFunctions(dyn, out).mean(np.linspace(0, 3, 301))[:, 0]
    assert np.max(np.abs(xs - 5.0)) > 1.0


def test_free_deterministic_given_seed():
    (dyn, plan), opp = _crossing()
    goals = [(3.0, [5.0, 10.0])]
    ctx = _context(dyn, plan, opp, "whittle")
    box = arena_box([[5, 0], [5, 10]])
    a = resolve_free(plan, dyn, goals, CostWeights(), ctx, box, restarts=3, seed=5)
    b = resolve_free(plan, dyn, goals, CostWeights(), ctx, box, restarts=3, seed=5)
    assert a.same_as(b)


def test_free_monotone_acceptance():
    (dyn, plan), opp = _crossing()
    goals = [(3.0, [5.0, 10.0])]
    ctx = _context(dyn, plan, opp, "whittle")
    box = arena_box([[5, 0], [5, 10]])
    w = CostWeights()
    for seed in range(3):
        out = resolve_free(plan, dyn, goals, w, ctx, box, restarts=2, seed=seed, margin=0.0)
        assert plan_cost(dyn, out, goals, w, ctx) <= plan_cost(dyn, plan, goals, w, ctx) + 1e-9
