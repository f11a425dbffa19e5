"""Regenerate the bundled scenario files under src/stochcoll/scenarios."""

from pathlib import Path

import numpy as np

from stochcoll.config import AgentConfig, ScenarioConfig, serialize

OUT = Path(__file__).resolve().parents[1] / "src" / "stochcoll" / "scenarios"
GAIN, NOISE = 5.0, 0.02


def agent(i, start, plan, goals, gains=(GAIN, GAIN)):
    return AgentConfig(id=i, gains=[float(g) for g in gains], noise=[NOISE, NOISE], start=[float(v) for v in start],
                       plan=[(float(t), [float(v) for v in s]) for t, s in plan],
                       goals=[(float(t), [float(v) for v in g]) for t, g in goals])


def exp1():
    agents = [
        agent(1, (5, 10), [(0, (5, 10)), (2, (5, 5))], [(2, (5, 5))]),
        agent(2, (5, 0), [(0, (5, 0)), (1, (5, 7)), (2, (0, 7))], [(1, (5, 7)), (2, (0, 7))]),
    ]
    return ScenarioConfig(name="exp1", horizon=(0.0, 2.0), agents=agents, criterion="whittle",
                          protocol="auc", resolution="wait")


def exp2():
    agents = [
        agent(1, (5, 0), [(0, (5, 0)), (3, (5, 10))], [(3, (5, 10))]),
        agent(2, (5, 10), [(0, (5, 10)), (3, (5, 0))], [(3, (5, 0))]),
        agent(3, (3, 5), [(0, (3, 5)), (3, (3, 5))], [(3, (3, 5))]),
    ]
    return ScenarioConfig(name="exp2", horizon=(0.0, 3.0), agents=agents, criterion="whittle",
                          protocol="auc", resolution="free")


def exp3(n, radius=4.0, centre=(5.0, 5.0), seed=2015):
    rng = np.random.default_rng([seed, n])
    agents = []
    for i in range(n):
        ang = 2 * np.pi * i / n
        start = np.round(np.add(centre, radius * np.array([np.cos(ang), np.sin(ang)])), 6)
        goal = np.round(np.subtract(2 * np.asarray(centre), start), 6)
        gains = np.round(rng.uniform(2.0, 7.0, size=2), 4)
        agents.append(agent(i + 1, start, [(0, start), (4, goal)], [(4, goal)], gains))
    arena = [[centre[0] - radius, centre[1] - radius], [centre[0] + radius, centre[1] + radius]]
    return ScenarioConfig(name=f"exp3_n{n}", horizon=(0.0, 4.0), agents=agents, criterion="whittle",
                          protocol="auc", resolution="free", arena=arena)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    scenarios = [exp1(), exp2()] + [exp3(n) for n in range(1, 7)]
    for sc in scenarios:
        (OUT / f"{sc.name}.yaml").write_text(serialize(sc))
        print("wrote", sc.name)


if __name__ == "__main__":
    main()
