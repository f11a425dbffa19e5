"""Scenario configuration files (YAML).

Example::

    name: corridor
    horizon: [0.0, 2.0]
    delta: 0.05
    criterion: whittle
    protocol: auc
    resolution: wait
    sim: {n_draws: 100, dt: 0.001, master_seed: 0}
    agents:
      - id: 1
        gains: [5, 5]
        noise: [0.02, 0.02]
        start: [5, 10]
        plan: [[0, [5, 10]], [2, [5, 5]]]
        goals: [[2, [5, 5]]]

Validation errors carry the offending field path and source line.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Tuple

import yaml

from .avoidance import CostWeights
from .coordination import Agent, CoordinationConfig, Protocol, Resolution
from .criterion import CriterionKind
from .detection import DEFAULT_BUDGET, Detector
from .errors import ConfigError, StochCollError
from .montecarlo import SimConfig
from .sde import DEFAULT_INITIAL_VARIANCE, AgentDynamics, Plan


@dataclass
class AgentConfig:
    id: int
    gains: List[float]
    noise: List[float]
    start: List[float]
    plan: List[Tuple[float, List[float]]]
    goals: List[Tuple[float, List[float]]] = field(default_factory=list)
    drift: Optional[List[float]] = None
    initial_cov: Optional[List[float]] = None
    diameter: float = 1.0

    def dynamics(self) -> AgentDynamics:
        dim = len(self.start)
        return AgentDynamics(
            gains=self.gains,
            noise=self.noise,
            initial_mean=self.start,
            drift=self.drift if self.drift is not None else [0.0] * dim,
            initial_cov=self.initial_cov if self.initial_cov is not None else [DEFAULT_INITIAL_VARIANCE] * dim,
            diameter=self.diameter,
        )

    def to_agent(self, tf: float) -> Agent:
        times = [p[0] for p in self.plan]
        pts = [p[1] for p in self.plan]
        return Agent(self.id, self.dynamics(), Plan(times, pts, tf), [(t, g) for t, g in self.goals])


@dataclass
class ScenarioConfig:
    name: str
    horizon: Tuple[float, float]
    agents: List[AgentConfig]
    delta: float = 0.05
    split_delta: bool = True
    criterion: str = "cheb"
    detector: str = "adaptive"
    budget: int = DEFAULT_BUDGET
    protocol: str = "auc"
    resolution: str = "wait"
    max_rounds: int = 50
    seed: int = 0
    restarts: int = 10
    avoid_bystanders: bool = True
    weights: dict = field(default_factory=lambda: asdict(CostWeights()))
    sim: dict = field(default_factory=lambda: asdict(SimConfig()))
    arena: Optional[List[List[float]]] = None

    @property
    def t0(self):
        return self.horizon[0]

    @property
    def tf(self):
        return self.horizon[1]

    def build_agents(self) -> List[Agent]:
        return [a.to_agent(self.tf) for a in self.agents]

    def coordination_config(self, **overrides) -> CoordinationConfig:
        kw = dict(
            protocol=self.protocol,
            resolution=self.resolution,
            max_rounds=self.max_rounds,
            delta=self.delta,
            split_delta=self.split_delta,
            criterion=self.criterion,
            detector=self.detector,
            budget=self.budget,
            weights=CostWeights(**self.weights),
            seed=self.seed,
            restarts=self.restarts,
            avoid_bystanders=self.avoid_bystanders,
            box=None if self.arena is None else (tuple(self.arena[0]), tuple(self.arena[1])),
        )
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return CoordinationConfig(**kw)

    def sim_config(self, **overrides) -> SimConfig:
        kw = dict(self.sim)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return SimConfig(**kw)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "horizon": list(self.horizon),
            "delta": self.delta,
            "split_delta": self.split_delta,
            "criterion": self.criterion,
            "detector": self.detector,
            "budget": self.budget,
            "protocol": self.protocol,
            "resolution": self.resolution,
            "max_rounds": self.max_rounds,
            "seed": self.seed,
            "restarts": self.restarts,
            "avoid_bystanders": self.avoid_bystanders,
            "weights": dict(self.weights),
            "sim": dict(self.sim),
        }
        if self.arena is not None:
            out["arena"] = [list(c) for c in self.arena]
        agents = []
        for a in self.agents:
            d = {
                "id": a.id,
                "gains": list(a.gains),
                "noise": list(a.noise),
                "start": list(a.start),
                "plan": [[t, list(s)] for t, s in a.plan],
                "goals": [[t, list(g)] for t, g in a.goals],
                "diameter": a.diameter,
            }
            if a.drift is not None:
                d["drift"] = list(a.drift)
            if a.initial_cov is not None:
                d["initial_cov"] = list(a.initial_cov)
            agents.append(d)
        out["agents"] = agents
        return out


def serialize(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def _line_index(text: str):
    """Map field paths such as ``("agents", 0, "gains")`` to 1-based lines."""
    index = {}

    def walk(node, path):
        index[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, path + (k.value,))
                index[path + (k.value,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    root = yaml.compose(text)
    if root is not None:
        walk(root, ())
    return index


def _path_str(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


class _Reader:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, msg):
        raise ConfigError(msg, field=_path_str(path) or None, line=self.lines.get(tuple(path)))

    def get(self, data, path, key, kind, required=True, default=None):
        if key not in data:
            if required:
                self.fail(path, f"missing required field '{key}'")
            return default
        return self.convert(data[key], path + (key,), kind)

    def convert(self, value, path, kind):
        try:
            if kind == "float":
                if isinstance(value, bool):
                    raise TypeError
                v = float(value)
                if not math.isfinite(v):
                    raise ValueError
                return v
            if kind == "int":
                if isinstance(value, bool) or float(value) != int(value):
                    raise TypeError
                return int(value)
            if kind == "bool":
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind == "str":
                if not isinstance(value, (str, int)):
                    raise TypeError
                return str(value)
            if kind == "vec":
                if not isinstance(value, list) or not value:
                    raise TypeError
                return [self.convert(v, path + (i,), "float") for i, v in enumerate(value)]
        except (TypeError, ValueError):
            self.fail(path, f"expected {kind}, got {value!r}")
        raise AssertionError(kind)

    def timed(self, value, path):
        if not isinstance(value, list):
            self.fail(path, "expected a list of [time, [x, y, ...]] pairs")
        out = []
        for i, item in enumerate(value):
            p = path + (i,)
            if not isinstance(item, list) or len(item) != 2:
                self.fail(p, "expected [time, [x, y, ...]]")
            out.append((self.convert(item[0], p + (0,), "float"), self.convert(item[1], p + (1,), "vec")))
        return out


_TOP_KEYS = {f.name for f in fields(ScenarioConfig)}
_AGENT_KEYS = {f.name for f in fields(AgentConfig)}


def parse(text: str) -> ScenarioConfig:
    """Parse and validate scenario text; raises :class:`ConfigError`."""
    try:
        data = yaml.safe_load(text)
        lines = _line_index(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", line=None if mark is None else mark.line + 1) from None
    r = _Reader(lines)
    if not isinstance(data, dict):
        r.fail((), "scenario must be a mapping")
    for key in data:
        if key not in _TOP_KEYS:
            r.fail((key,), f"unknown field '{key}'")

    name = r.get(data, (), "name", "str", required=False, default="scenario")
    hz = data.get("horizon")
    if not isinstance(hz, list) or len(hz) != 2:
        r.fail(("horizon",), "horizon must be [t0, tf]")
    t0, tf = (r.convert(v, ("horizon", i), "float") for i, v in enumerate(hz))
    if not t0 < tf:
        r.fail(("horizon",), f"need t0 < tf, got [{t0}, {tf}]")

    kw = {}
    kw["delta"] = r.get(data, (), "delta", "float", required=False, default=0.05)
    if not 0 < kw["delta"] < 1:
        r.fail(("delta",), "delta must lie in (0, 1)")
    kw["split_delta"] = r.get(data, (), "split_delta", "bool", required=False, default=True)
    kw["avoid_bystanders"] = r.get(data, (), "avoid_bystanders", "bool", required=False, default=True)
    for key, enum_cls in (("criterion", CriterionKind), ("detector", Detector), ("protocol", Protocol),
                          ("resolution", Resolution)):
        if key in data:
            v = r.get(data, (), key, "str")
            try:
                enum_cls(v.lower()) if enum_cls is not Detector else Detector.parse(v)
            except (ValueError, StochCollError):
                r.fail((key,), f"invalid {key} {v!r}; choose from {[e.value for e in enum_cls]}")
            kw[key] = v.lower()
    for key in ("budget", "max_rounds", "seed", "restarts"):
        if key in data:
            kw[key] = r.get(data, (), key, "int")
            if key != "seed" and kw[key] < 1:
                r.fail((key,), f"{key} must be >= 1")

    if "weights" in data:
        w = data["weights"]
        if not isinstance(w, dict):
            r.fail(("weights",), "weights must be a mapping")
        wk = {}
        for key in w:
            if key not in ("w1", "w2", "w3", "lambda_hinge"):
                r.fail(("weights", key), f"unknown weight '{key}'")
            wk[key] = r.convert(w[key], ("weights", key), "float")
        try:
            kw["weights"] = asdict(CostWeights(**wk))
        except StochCollError as exc:
            r.fail(("weights",), str(exc))
    if "sim" in data:
        s = data["sim"]
        if not isinstance(s, dict):
            r.fail(("sim",), "sim must be a mapping")
        sk = {}
        for key in s:
            kind = {"n_draws": "int", "dt": "float", "master_seed": "int"}.get(key)
            if kind is None:
                r.fail(("sim", key), f"unknown sim field '{key}'")
            sk[key] = r.convert(s[key], ("sim", key), kind)
        try:
            kw["sim"] = asdict(SimConfig(**sk))
        except StochCollError as exc:
            r.fail(("sim",), str(exc))
    if "arena" in data:
        ar = data["arena"]
        if not isinstance(ar, list) or len(ar) != 2:
            r.fail(("arena",), "arena must be [[lower corner], [upper corner]]")
        kw["arena"] = [r.convert(c, ("arena", i), "vec") for i, c in enumerate(ar)]

    raw_agents = data.get("agents")
    if not isinstance(raw_agents, list) or not raw_agents:
        r.fail(("agents",), "scenario needs a non-empty 'agents' list")
    agents, seen = [], set()
    for i, ad in enumerate(raw_agents):
        p = ("agents", i)
        if not isinstance(ad, dict):
            r.fail(p, "agent entry must be a mapping")
        for key in ad:
            if key not in _AGENT_KEYS:
                r.fail(p + (key,), f"unknown agent field '{key}'")
        aid = r.get(ad, p, "id", "int")
        if aid in seen:
            r.fail(p + ("id",), f"duplicate agent id {aid}")
        seen.add(aid)
        if "plan" not in ad:
            r.fail(p, "missing required field 'plan'")
        a = AgentConfig(
            id=aid,
            gains=r.get(ad, p, "gains", "vec"),
            noise=r.get(ad, p, "noise", "vec"),
            start=r.get(ad, p, "start", "vec"),
            plan=r.timed(ad.get("plan"), p + ("plan",)),
            goals=r.timed(ad.get("goals", []), p + ("goals",)),
            drift=r.get(ad, p, "drift", "vec", required=False),
            initial_cov=r.get(ad, p, "initial_cov", "vec", required=False),
            diameter=r.get(ad, p, "diameter", "float", required=False, default=1.0),
        )
        if not a.plan:
            r.fail(p + ("plan",), "plan needs at least one setpoint")
        if abs(a.plan[0][0] - t0) > 1e-12:
            r.fail(p + ("plan", 0), f"plan must start at the horizon start {t0}")
        for j, (t, _) in enumerate(a.goals):
            if not t0 <= t <= tf:
                r.fail(p + ("goals", j), f"goal time {t} outside horizon")
        try:
            a.to_agent(tf)
        except StochCollError as exc:
            r.fail(p, str(exc))
        agents.append(a)
    dims = {len(a.start) for a in agents}
    if len(dims) > 1:
        r.fail(("agents",), "agents have different state dimensions")
    if kw.get("criterion") == "whittle" and dims != {2}:
        r.fail(("criterion",), "the whittle criterion needs 2-D agents")
    return ScenarioConfig(name=name, horizon=(t0, tf), agents=agents, **kw)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse(text)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``exp1``, ``exp3_n5``...)."""
    base = Path(__file__).with_name("scenarios")
    path = base / (name if name.endswith(".yaml") else f"{name}.yaml")
    if not path.exists():
        known = sorted(p.stem for p in base.glob("*.yaml"))
        raise ConfigError(f"no bundled scenario '{name}'; available: {known}")
    return path


__all__ = ["AgentConfig", "ScenarioConfig", "parse", "serialize", "load", "bundled_scenario"]
