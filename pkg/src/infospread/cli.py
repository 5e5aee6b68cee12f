"""Command-line front end: presets for the reference experiments, config
loading with dotted-path overrides, and plot-data emission."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass


from . import analytics, engine
from .adaptation import AdaptationParams, compute_mu_ref
from .core import (DemandSegment, Scenario, ScenarioError, apply_overrides,
                   constant_demand, dump_scenario, scenario_from_dict,
                   scenario_to_dict, validate_scenario)


@dataclass(frozen=True)
class Preset:
    name: str
    scenario: Scenario
    description: str


def _sec5(deployment: str, mobility: str) -> Scenario:
    return Scenario(
        n_nodes=2000, area_side=500.0, radio_range=20.0,
        deployment=deployment, mobility=mobility, policy="rdd",
        initial_providers=200, cache_time=10.0,
        demand=constant_demand(0.0025, 10_000.0),
        adaptation=None, sim_time=10_000.0, obs_interval=10.0, runs=10,
    )


def _sec6() -> Scenario:
    demand = (
        DemandSegment.ramp(0.0, 2500.0, 0.0025, 0.01),
        DemandSegment.constant(2500.0, 10_000.0, 0.01),
        DemandSegment.ramp(10_000.0, 12_500.0, 0.01, 0.005),
        DemandSegment.constant(12_500.0, 20_000.0, 0.005),
    )
    return Scenario(
        n_nodes=2000, area_side=500.0, radio_range=20.0,
        deployment="stationary", mobility="static", policy="rdd",
        initial_providers=200, cache_time=100.0,
        demand=demand,
        adaptation=AdaptationParams(mu_ref=compute_mu_ref(2000, 200, 0.0025)),
        sim_time=20_000.0, obs_interval=10.0, runs=10,
    )


def builtin_presets() -> list[Preset]:
    presets = [
        Preset("paper-sec5-uniform-static", _sec5("uniform", "static"),
               "2000 static nodes placed uniformly, 200 copies, constant demand"),
        Preset("paper-sec5-stationary-static", _sec5("stationary", "static"),
               "2000 static nodes in the waypoint steady-state (center-weighted) layout"),
        Preset("paper-sec5-clustered-static", _sec5("clustered", "static"),
               "2000 static nodes in four clusters with bridge nodes"),
        Preset("paper-sec5-rwp-mobile", _sec5("stationary", "srwp"),
               "2000 waypoint-mobile nodes, mean speed 3 m/s, pause 10 s"),
        Preset("paper-sec5-randomtrip-mobile", _sec5("clustered", "random_trip"),
               "clustered nodes roaming four points of interest, 0.3 cluster-hop probability"),
        Preset("paper-sec6", _sec6(),
               "adaptive replication/drop under a four-phase demand profile, 20000 s"),
    ]
    for p in presets:
        validate_scenario(p.scenario)
    return presets


def find_preset(name: str) -> Preset:
    for p in builtin_presets():
        if p.name == name:
            return p
    raise ScenarioError("preset", f"unknown preset {name!r}")


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ScenarioError("set", f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="infospread",
                     description="Peer-to-peer information dissemination simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_args(p):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--preset", help="builtin preset name (see 'presets')")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-path override, e.g. policy=rwd")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--runs", type=int, help="override the scenario run count")

    p_run = sub.add_parser("run", help="execute a single run and write its CSVs")
    add_scenario_args(p_run)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--run-index", type=int, default=0)
    p_run.add_argument("--trace", action="store_true", help="write the per-copy event trace")

    p_batch = sub.add_parser("batch", help="execute a multi-run batch with aggregation")
    add_scenario_args(p_batch)
    p_batch.add_argument("--out", required=True, help="output directory")
    p_batch.add_argument("--parallel", type=int, default=1, help="worker processes")

    p_val = sub.add_parser("validate", help="check a configuration and exit")
    add_scenario_args(p_val)

    sub.add_parser("presets", help="list builtin presets")

    p_q = sub.add_parser("qpdf", help="dump the reference inter-distance density table")
    p_q.add_argument("--bins", type=int, default=200)
    p_q.add_argument("--out", help="write the table here instead of stdout")
    return parser


def resolve_scenario(args) -> Scenario:
    if args.config and args.preset:
        raise ScenarioError("config", "give either --config or --preset, not both")
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
    elif args.preset:
        base = scenario_to_dict(find_preset(args.preset).scenario)
    else:
        base = scenario_to_dict(Scenario())

    overrides = dict(_parse_override(o) for o in args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        overrides["runs"] = args.runs
    if overrides:
        base = apply_overrides(base, overrides)
    return validate_scenario(scenario_from_dict(base))


def _cmd_run(args) -> int:
    scenario = resolve_scenario(args)
    os.makedirs(args.out, exist_ok=True)
    dump_scenario(scenario, os.path.join(args.out, "scenario.resolved.json"))
    result = engine.run(scenario, run_index=args.run_index, out_dir=args.out,
                        collect_trace=args.trace)
    print(f"run {args.run_index}: {result.queries_issued} queries issued, "
          f"{result.queries_served} served, C(end)={int(result.series['providers'].values[-1])}")
    return 0


def _cmd_batch(args) -> int:
    scenario = resolve_scenario(args)
    batch = engine.run_batch(scenario, parallelism=args.parallel, out_dir=args.out)
    times, mean, half = batch.aggregates["providers"]
    print(f"{len(batch.results)} runs complete; final C(t) = "
          f"{mean[-1]:.1f} +/- {half[-1]:.1f}")
    return 0


def _cmd_validate(args) -> int:
    scenario = resolve_scenario(args)
    print(f"ok: {scenario.n_nodes} nodes, policy={scenario.policy}, "
          f"deployment={scenario.deployment}, mobility={scenario.mobility}")
    return 0


def _cmd_presets(_args) -> int:
    for p in builtin_presets():
        print(f"{p.name:32s} {p.description}")
    return 0


def _cmd_qpdf(args) -> int:
    if args.bins < 1:
        raise ScenarioError("bins", "must be at least 1")
    edges = analytics.bin_edges(args.bins)
    mids = 0.5 * (edges[:-1] + edges[1:])
    rows = zip(mids, analytics.q_pdf(mids))
    if args.out:
        analytics.write_csv(args.out, ["x", "q"], rows)
    else:
        print("x,q")
        for x, q in rows:
            print(f"{x:.12g},{q:.12g}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    commands = {
        "run": _cmd_run,
        "batch": _cmd_batch,
        "validate": _cmd_validate,
        "presets": _cmd_presets,
        "qpdf": _cmd_qpdf,
    }
    try:
        return commands[args.command](args)
    except ScenarioError as exc:
        print(f"invalid scenario - {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
