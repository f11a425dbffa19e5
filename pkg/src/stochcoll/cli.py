"""Command line front end.

Subcommands::

    stochcoll run --config exp1 --out results/
    stochcoll detect --fig1
    stochcoll detect --config exp1 --agent 2
    stochcoll confidence --prior 0:0.5,1:0.1,2:0.4 --theta 0.99
    stochcoll validate-moments --gain 1 --noise 0.2

Exit codes: 0 success or resolved, 2 unresolved coordination or failed
validation, 1 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List


from .config import ScenarioConfig, bundled_scenario, load
from .coordination import Agent, RunReport, coordinate, verify_plans
from .criterion import PairParams, make_pair_criterion, multi_agent_criterion
from .errors import StochCollError
from .lipschitz import ScalarTarget, certify_adaptive, certify_naive
from .montecarlo import (
    MetricsRow,
    SimConfig,
    estimate_metrics,
    simulate_agents,
    simulate_paths,
    write_ensembles_csv,
    write_metrics_csv,
)
from .scp import ScpPrior, choose_k, lattice_confidence
from .sde import AgentDynamics, MomentFunctions, Plan

log = logging.getLogger("stochcoll")

EXIT_OK, EXIT_ERROR, EXIT_UNRESOLVED = 0, 1, 2
TRACE_FIELDS = ("phase", "agent", "t", "gamma")
ENSEMBLE_STRIDE = 10


def _setup_logging():
    level = os.environ.get("SR_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def resolve_config_path(value: str) -> Path:
    """A file path, or the name of a bundled scenario."""
    path = Path(value)
    if path.exists():
        return path
    return bundled_scenario(value)


@dataclass
class ScenarioResult:
    report: RunReport
    rows: List[MetricsRow]
    plans: Dict[int, Plan]
    initial: Dict[int, Plan]


def _method_label(report: RunReport) -> str:
    return f"{report.protocol.value.upper()}-{report.resolution.value.upper()}"


def _lambdas(agents: List[Agent]):
    out = {}
    for i, a in enumerate(agents):
        for b in agents[i + 1:]:
            out[tuple(sorted((a.id, b.id)))] = 0.5 * (a.dyn.diameter + b.dyn.diameter)
    return out


def _gamma_traces(agents, plans, cfg, n=512):
    """Multi-agent criterion of every agent against all others on a uniform grid."""
    world = {a.id: MomentFunctions(a.dyn, plans[a.id]) for a in agents}
    n_opp = max(len(agents) - 1, 1)
    delta = cfg.delta / n_opp if cfg.split_delta else cfg.delta
    out = {}
    for a in agents:
        crits = [
            make_pair_criterion(world[a.id], world[b.id], PairParams.for_agents(delta, a.dyn.diameter, b.dyn.diameter),
                                cfg.criterion, (a.id, b.id), with_lipschitz=False)
            for b in agents if b.id != a.id
        ]
        if crits:
            out[a.id] = multi_agent_criterion(crits).trace(n)
    return out


def run_scenario(config_path, out_dir, seed=None, protocol=None, resolution=None, criterion=None,
                 detector=None, draws=None, dt=None, plots=False) -> ScenarioResult:
    """Coordinate a scenario, simulate before and after, write all outputs."""
    cfg: ScenarioConfig = load(config_path)
    if seed is not None:
        cfg = replace(cfg, seed=seed, sim={**cfg.sim, "master_seed": seed})
    ccfg = cfg.coordination_config(protocol=protocol, resolution=resolution, criterion=criterion, detector=detector)
    sim = cfg.sim_config(n_draws=draws, dt=dt)
    agents = cfg.build_agents()
    initial = {a.id: a.plan for a in agents}
    goals = {a.id: a.goals for a in agents}
    lambdas = _lambdas(agents)

    plans, report = coordinate(agents, ccfg)
    label = _method_label(report)
    ens_none = simulate_agents(agents, initial, sim)
    ens_coord = simulate_agents(agents, plans, sim)
    rows = [
        estimate_metrics(ens_none, goals, lambdas, 0, "NONE"),
        estimate_metrics(ens_coord, goals, lambdas, report.rounds, label),
    ]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out / "metrics.csv", rows)
    write_ensembles_csv(out / "ensembles.csv", {"NONE": ens_none, label: ens_coord}, stride=ENSEMBLE_STRIDE)
    traces = {"initial": _gamma_traces(agents, initial, ccfg), "final": _gamma_traces(agents, plans, ccfg)}
    with open(out / "criterion_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for phase, per_agent in traces.items():
            for a, (ts, vals) in per_agent.items():
                for t, v in zip(ts, vals):
                    w.writerow([phase, a, f"{t:.6g}", f"{v:.9g}"])
    with open(out / "auction_log.jsonl", "w") as fh:
        for rec in report.auctions:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
        if not report.auctions:
            for a, r in sorted(report.agent_rounds.items()):
                fh.write(json.dumps({"agent": a, "rounds": r}, sort_keys=True) + "\n")
    summary = {
        "scenario": cfg.name,
        "method": label,
        "resolved": report.resolved,
        "rounds": report.rounds,
        "agent_rounds": {str(k): v for k, v in report.agent_rounds.items()},
        "cycle_detected": report.cycle_detected,
        "plans": {str(a): p.to_list() for a, p in sorted(plans.items())},
    }
    (out / "run_report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    if plots:
        _render_plots(out, {"NONE": ens_none, label: ens_coord}, goals, traces)
    return ScenarioResult(report, rows, plans, initial)


def _render_plots(out, ensembles, goals, traces):
    try:
        from . import plotting
    except ImportError:
        log.warning("matplotlib is not installed; skipping figures")
        return
    if next(iter(next(iter(ensembles.values())).values())).paths.shape[2] >= 2:
        plotting.plot_ensembles(ensembles, goals, out / "paths.png")
    for phase, per_agent in traces.items():
        plotting.plot_criterion_traces({f"agent {a}": tr for a, tr in per_agent.items()},
                                       out / f"criterion_{phase}.png")


def fig1_target() -> ScalarTarget:
    """``|sin t| cos t + 1/4`` on ``[0, 7]`` with Lipschitz constant 1."""
    return ScalarTarget(lambda t: abs(math.sin(t)) * math.cos(t) + 0.25, 0.0, 7.0, 1.0)


def _cmd_run(args) -> int:
    res = run_scenario(resolve_config_path(args.config), args.out, seed=args.seed, protocol=args.protocol,
                       resolution=args.resolution, criterion=args.criterion, detector=args.detector,
                       draws=args.draws, dt=args.dt, plots=args.plots)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(MetricsRow.FIELDS)
    for r in res.rows:
        w.writerow(r.as_row())
    if not res.report.resolved:
        print("coordination unresolved", file=sys.stderr)
        return EXIT_UNRESOLVED
    return EXIT_OK


def _cmd_detect(args) -> int:
    if args.fig1:
        target = fig1_target()
        method = args.detector or "adaptive"
        out = certify_naive(target) if method == "naive" else certify_adaptive(target)
        print(f"verdict={out.flag.value} witness={out.serialized_critical_time:.6f} evaluations={out.evaluations}")
        if args.out:
            with open(args.out, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("t", "value", "floor"))
                for row in out.trace_rows():
                    w.writerow([f"{v:.9g}" for v in row])
        return EXIT_OK
    if not args.config:
        print("error: detect needs --fig1 or --config", file=sys.stderr)
        return EXIT_ERROR
    cfg = load(resolve_config_path(args.config))
    ccfg = cfg.coordination_config(criterion=args.criterion, detector=args.detector)
    agents = cfg.build_agents()
    ids = [a.id for a in agents]
    targets = [args.agent] if args.agent is not None else ids
    reports = verify_plans(agents, {a.id: a.plan for a in agents}, ccfg)
    for a in targets:
        if a not in reports:
            print(f"error: unknown agent {a}", file=sys.stderr)
            return EXIT_ERROR
        r = reports[a]
        t_coll = "none" if r.t_coll is None else f"{r.t_coll:.6f}"
        print(f"agent={a} flag={int(r.flag)} t_coll={t_coll} conflicts={list(r.conflict_set)} "
              f"evaluations={r.evaluations} method={r.method.value}")
    if args.out:
        traces = _gamma_traces(agents, {a.id: a.plan for a in agents}, ccfg)
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_FIELDS)
            for a in targets:
                for t, v in zip(*traces[a]):
                    w.writerow(["initial", a, f"{t:.6g}", f"{v:.9g}"])
    return EXIT_OK


def parse_prior(text: str) -> ScpPrior:
    mass = {}
    for item in text.split(","):
        n, _, p = item.partition(":")
        mass[int(n)] = float(p)
    return ScpPrior(mass)


def _cmd_confidence(args) -> int:
    prior = parse_prior(args.prior)
    if args.k is not None:
        miss = lattice_confidence(prior, args.k)
        print(f"k={args.k} miss_probability={miss:.6g} confidence={1 - miss:.6g}")
        return EXIT_OK
    k = choose_k(prior, args.theta)
    print(f"k={k} miss_probability={lattice_confidence(prior, k):.6g}")
    return EXIT_OK


def validate_moments(gain=1.0, noise=0.2, mu0=0.0, c0=0.0, setpoint=1.0, t=1.0, draws=100_000, dt=1e-3, seed=0):
    """Closed-form mean and variance at ``t`` versus Euler-Maruyama.

    Returns rows ``(quantity, closed_form, empirical, tolerance, ok)``: the
    mean must agree within 3 standard errors, the variance within 5 %.
    """
    dyn = AgentDynamics(gains=gain, noise=noise, initial_mean=[mu0], initial_cov=c0)
    plan = Plan.start_to_goal([setpoint], [setpoint], 0.0, t)
    mom = MomentFunctions(dyn, plan)
    ens = simulate_paths(dyn, plan, SimConfig(draws, dt, seed), record_times=[t])
    x = ens.paths[:, -1, 0]
    m_cf, v_cf = float(mom.mean(t)[0]), float(mom.cov(t)[0])
    m_em, v_em = float(x.mean()), float(x.var(ddof=1))
    se = math.sqrt(v_em / draws)
    return [
        ("mean", m_cf, m_em, 3 * se, abs(m_em - m_cf) <= 3 * se),
        ("variance", v_cf, v_em, 0.05 * v_cf, abs(v_em - v_cf) <= 0.05 * v_cf),
    ]


def _cmd_validate(args) -> int:
    rows = validate_moments(args.gain, args.noise, args.mu0, args.c0, args.setpoint, args.t, args.draws, args.dt,
                            args.seed)
    print(f"{'quantity':<10}{'closed_form':>14}{'empirical':>14}{'tolerance':>12}  result")
    for name, cf, em, tol, ok in rows:
        print(f"{name:<10}{cf:>14.6f}{em:>14.6f}{tol:>12.2e}  {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_UNRESOLVED


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors share the generic error exit code
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stochcoll", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--criterion", choices=["cheb", "whittle"])
        sp.add_argument("--detector", choices=["naive", "adaptive", "grid"])

    r = sub.add_parser("run", help="coordinate a scenario and simulate it")
    r.add_argument("--config", required=True, help="scenario file or bundled name (exp1, exp2, exp3_n5, ...)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--protocol", choices=["fp", "auc"])
    r.add_argument("--resolution", choices=["wait", "free"])
    r.add_argument("--draws", type=int)
    r.add_argument("--dt", type=float)
    r.add_argument("--plots", action="store_true", help="also render PNG figures (needs matplotlib)")
    common(r)
    r.set_defaults(func=_cmd_run)

    d = sub.add_parser("detect", help="certification trace for one target")
    d.add_argument("--fig1", action="store_true", help="use |sin t| cos t + 1/4 on [0, 7]")
    d.add_argument("--config")
    d.add_argument("--agent", type=int)
    d.add_argument("--out", help="CSV trace file")
    common(d)
    d.set_defaults(func=_cmd_detect)

    c = sub.add_parser("confidence", help="grid size for a sign-change prior")
    c.add_argument("--prior", required=True, help="comma separated n:probability pairs")
    c.add_argument("--theta", type=float, default=0.99)
    c.add_argument("--k", type=int, help="report the miss probability for this k instead")
    c.set_defaults(func=_cmd_confidence)

    v = sub.add_parser("validate-moments", help="closed-form moments vs Euler-Maruyama")
    v.add_argument("--gain", type=float, default=1.0)
    v.add_argument("--noise", type=float, default=0.2)
    v.add_argument("--mu0", type=float, default=0.0)
    v.add_argument("--c0", type=float, default=0.0)
    v.add_argument("--setpoint", type=float, default=1.0)
    v.add_argument("--t", type=float, default=1.0)
    v.add_argument("--draws", type=int, default=100_000)
    v.add_argument("--dt", type=float, default=1e-3)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StochCollError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
