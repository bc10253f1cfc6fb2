"""Command line front end.

Three subcommands::

    wimcsim run        [config.json] [flags]   one simulation, text + CSV out
    wimcsim experiment  config.json  [flags]   a full experiment grid
    wimcsim validate    config.json            parse and check, no simulation

Flags override the config file field-wise. Exit codes: 0 success, 1
configuration error, 2 runtime error (deadlock or an internal invariant
violation).
"""

from __future__ import annotations

import argparse
import sys

from .config import (
    ConfigError,
    Fabric,
    config_from_spec,
    energy_from_spec,
    load_config_file,
)
from .config import RunParams
from .engine import DeadlockError, MetricsReport, Simulator
from .experiments import build_plan, run_experiment
from .fabric import FlowControlError
from .routing import RoutingMode
from .traffic import TrafficError, TrafficPattern, TrafficSpec

_MODE_MAP = {"single-tree": RoutingMode.SINGLE_TREE, "all-pairs": RoutingMode.ALL_PAIRS_SP}


def _add_override_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", help="architecture name, e.g. 4C4M:wireless")
    p.add_argument("--fabric", choices=[f.value for f in Fabric])
    p.add_argument("--load", type=float, help="injection load in flits/core/cycle")
    p.add_argument("--pmem", type=float, help="fraction of traffic addressed to memory")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path prefix")
    p.add_argument("--mode", choices=sorted(_MODE_MAP), help="routing mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wimcsim",
        description="cycle-accurate multichip interconnect fabric simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation")
    p_run.add_argument("config", nargs="?", help="JSON config file")
    p_run.add_argument("--cycles", type=int, help="total simulated cycles")
    p_run.add_argument("--warmup", type=int, help="warmup cycles excluded from stats")
    p_run.add_argument("--trace", help="trace file to replay instead of synthetic traffic")
    _add_override_flags(p_run)

    p_exp = sub.add_parser("experiment", help="run an experiment grid")
    p_exp.add_argument("config", help="JSON config file with an experiment block")
    p_exp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _add_override_flags(p_exp)

    p_val = sub.add_parser("validate", help="check a config file without simulating")
    p_val.add_argument("config")
    return parser


def _merged_raw(args) -> dict:
    raw = load_config_file(args.config) if args.config else {"arch": "4C4M:wireless"}
    if args.arch:
        raw["arch"] = args.arch
    if args.fabric:
        base = raw["arch"].split(":")[0]
        raw["arch"] = f"{base}:{args.fabric}"
    traffic = raw.setdefault("traffic", {})
    if args.load is not None:
        traffic["injection_load"] = args.load
    if args.pmem is not None:
        traffic["p_mem"] = args.pmem
    if args.seed is not None:
        raw.setdefault("overrides", {})["seed"] = args.seed
        traffic["seed"] = args.seed
    if args.mode:
        raw.setdefault("routing", {})["mode"] = _MODE_MAP[args.mode].value
    return raw


def _traffic_from_raw(raw: dict, trace_flag: str | None) -> TrafficSpec:
    t = raw.get("traffic", {})
    trace = trace_flag or t.get("trace_path")
    if trace:
        return TrafficSpec(
            pattern=TrafficPattern.TRACE_REPLAY,
            trace_path=trace,
            replicate_chips=t.get("replicate_chips", False),
            mem_replies=t.get("mem_replies", False),
            p_mem=t.get("p_mem", 0.2),
            seed=t.get("seed", 1),
        )
    return TrafficSpec(
        injection_load=t.get("injection_load", 0.1),
        p_mem=t.get("p_mem", 0.2),
        mem_replies=t.get("mem_replies", False),
        seed=t.get("seed", 1),
    )


def _cmd_run(args) -> int:
    raw = _merged_raw(args)
    config = config_from_spec(raw)
    runb = raw.get("run", {})
    rp = RunParams(
        total_cycles=args.cycles or runb.get("total_cycles", 10_000),
        warmup_cycles=args.warmup if args.warmup is not None else runb.get("warmup_cycles", 1_000),
    )
    mode = RoutingMode(raw.get("routing", {}).get("mode", "single_tree"))
    sim = Simulator(
        config,
        _traffic_from_raw(raw, args.trace),
        rp,
        energy=energy_from_spec(raw),
        routing_mode=mode,
    )
    report = sim.run()
    print(report.to_text(), end="")
    if args.out:
        with open(f"{args.out}.csv", "w", encoding="utf-8") as fh:
            fh.write(MetricsReport.csv_header() + "\n" + report.csv_row() + "\n")
        with open(f"{args.out}.txt", "w", encoding="utf-8") as fh:
            fh.write(report.to_text())
        print(f"wrote {args.out}.csv and {args.out}.txt")
    return 0


def _cmd_experiment(args) -> int:
    raw = _merged_raw(args)
    out = args.out or "experiment"
    results, gains = run_experiment(raw, out, jobs=args.jobs)
    print(f"wrote {results} and {gains}")
    return 0


def _cmd_validate(args) -> int:
    raw = load_config_file(args.config)
    config = config_from_spec(raw)
    energy_from_spec(raw)
    if "experiment" in raw:
        plan = build_plan(raw)
        print(f"ok: {raw['arch']}, experiment {plan.name} with {len(plan.cells)} cells")
    else:
        print(f"ok: {raw['arch']} ({config.total_cores} cores, {config.num_memories} stacks)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        return _cmd_validate(args)
    except (ConfigError, TrafficError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DeadlockError, FlowControlError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
