"""Experiment recipes: batched simulation cells with CSV output and
relative-gain summaries of the wireless fabric against a wired baseline.

Four experiment types are supported:

``fabric-compare``
    Every fabric at every (load, seed) on one architecture.
``chip-count-sweep``
    Wireless vs interposer while the chip count varies at a constant total
    core and memory budget (1x64, 4x16, 8x8 cores).
``mem-fraction-sweep``
    Wireless vs interposer as the memory share of traffic grows.
``trace-suite``
    Wireless vs interposer replaying bundled traces.

Gain rows use ``100*(baseline - wireless)/baseline`` for energy and latency
(improvement = reduction) and ``100*(wireless - baseline)/baseline`` for
bandwidth (improvement = increase).
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass, field
from typing import Any

from .config import ConfigError, RunParams, energy_from_spec, parse_arch
from .engine import MetricsReport, Simulator
from .routing import RoutingMode
from .traffic import TrafficPattern, TrafficSpec

GAIN_COLUMNS = [
    "experiment",
    "label",
    "arch",
    "load",
    "p_mem",
    "seed",
    "baseline_fabric",
    "bandwidth_gain_pct",
    "energy_gain_pct",
    "latency_gain_pct",
]


@dataclass(frozen=True)
class Cell:
    """One simulation in an experiment grid; pure data, safe to pickle."""

    arch: str
    fabric: str
    load: float = 0.1
    p_mem: float = 0.2
    seed: int = 1
    mode: str = "single_tree"
    total_cycles: int = 10_000
    warmup_cycles: int = 1_000
    trace_path: str | None = None
    replicate_chips: bool = False
    mem_replies: bool = False
    overrides: tuple[tuple[str, Any], ...] = ()
    energy: tuple[tuple[str, float], ...] = ()
    label: str = ""


def run_cell(cell: Cell) -> MetricsReport:
    overrides = dict(cell.overrides)
    overrides["seed"] = cell.seed
    config = parse_arch(f"{cell.arch}:{cell.fabric}", overrides)
    if cell.trace_path is not None:
        traffic = TrafficSpec(
            pattern=TrafficPattern.TRACE_REPLAY,
            trace_path=cell.trace_path,
            replicate_chips=cell.replicate_chips,
            mem_replies=cell.mem_replies,
            p_mem=cell.p_mem,
            seed=cell.seed,
        )
    else:
        traffic = TrafficSpec(
            injection_load=cell.load,
            p_mem=cell.p_mem,
            mem_replies=cell.mem_replies,
            seed=cell.seed,
        )
    sim = Simulator(
        config,
        traffic,
        RunParams(total_cycles=cell.total_cycles, warmup_cycles=cell.warmup_cycles),
        energy=energy_from_spec({"energy": dict(cell.energy)}),
        routing_mode=RoutingMode(cell.mode),
    )
    return sim.run()


def gain_row(
    experiment: str,
    label: str,
    baseline: MetricsReport,
    wireless: MetricsReport,
) -> str:
    """Percentage gains of the wireless run over a wired baseline run."""

    def pct_drop(b: float, w: float) -> float:
        return 100.0 * (b - w) / b if b else 0.0

    def pct_rise(b: float, w: float) -> float:
        return 100.0 * (w - b) / b if b else 0.0

    vals = [
        experiment,
        label,
        wireless.arch,
        f"{wireless.load:.6g}",
        f"{wireless.p_mem:.6g}",
        str(wireless.seed),
        baseline.fabric,
        f"{pct_rise(baseline.bandwidth_gbps_per_core, wireless.bandwidth_gbps_per_core):.4f}",
        f"{pct_drop(baseline.avg_packet_energy_pj, wireless.avg_packet_energy_pj):.4f}",
        f"{pct_drop(baseline.avg_latency_cycles, wireless.avg_latency_cycles):.4f}",
    ]
    return ",".join(vals)


@dataclass
class ExperimentPlan:
    name: str
    cells: list[Cell]
    # (label, baseline_index, wireless_index) triples into cells
    pairs: list[tuple[str, int, int]] = field(default_factory=list)


def build_plan(raw: dict[str, Any]) -> ExperimentPlan:
    """Expand a config-file dict (see ``load_config_file``) into cells."""
    exp = raw.get("experiment", {"type": "fabric-compare"})
    etype = exp.get("type", "fabric-compare")
    arch = raw["arch"].split(":")[0]
    traffic = raw.get("traffic", {})
    runb = raw.get("run", {})
    routing = raw.get("routing", {})
    base = dict(
        p_mem=traffic.get("p_mem", 0.2),
        mode=routing.get("mode", "single_tree"),
        total_cycles=runb.get("total_cycles", 10_000),
        warmup_cycles=runb.get("warmup_cycles", 1_000),
        mem_replies=traffic.get("mem_replies", False),
        overrides=tuple(sorted(raw.get("overrides", {}).items())),
        energy=tuple(sorted(raw.get("energy", {}).items())),
    )
    seeds = exp.get("seeds", [1, 2, 3])
    loads = exp.get("loads", [traffic.get("injection_load", 0.1)])

    cells: list[Cell] = []
    pairs: list[tuple[str, int, int]] = []

    def add(cell: Cell) -> int:
        cells.append(cell)
        return len(cells) - 1

    if etype == "fabric-compare":
        for load in loads:
            for seed in seeds:
                idx = {}
                for fab in ("substrate", "interposer", "wireless"):
                    idx[fab] = add(
                        Cell(arch=arch, fabric=fab, load=load, seed=seed,
                             label=f"{fab}/load={load}/seed={seed}", **base)
                    )
                pairs.append(
                    (f"load={load}/seed={seed}", idx["interposer"], idx["wireless"])
                )
    elif etype == "chip-count-sweep":
        points = exp.get(
            "points",
            [
                {"arch": "1C4M", "cores_per_chip": 64, "wi_density": 16},
                {"arch": "4C4M", "cores_per_chip": 16, "wi_density": 16},
                {"arch": "8C4M", "cores_per_chip": 8, "wi_density": 8},
            ],
        )
        for pt in points:
            ov = dict(base["overrides"])
            ov["cores_per_chip"] = pt["cores_per_chip"]
            if "wi_density" in pt:
                ov["wi_density"] = pt["wi_density"]
            kw = dict(base, overrides=tuple(sorted(ov.items())))
            for seed in seeds:
                b = add(Cell(arch=pt["arch"], fabric="interposer", load=loads[0],
                             seed=seed, label=f"{pt['arch']}/interposer/seed={seed}", **kw))
                wcell = Cell(arch=pt["arch"], fabric="wireless", load=loads[0],
                             seed=seed, label=f"{pt['arch']}/wireless/seed={seed}", **kw)
                # wi_density override only applies to the wireless fabric
                pairs.append((f"{pt['arch']}/seed={seed}", b, add(wcell)))
    elif etype == "mem-fraction-sweep":
        fractions = exp.get("p_mem", [0.2, 0.4, 0.6, 0.8])
        kw = {k: v for k, v in base.items() if k != "p_mem"}
        for pm in fractions:
            for seed in seeds:
                b = add(Cell(arch=arch, fabric="interposer", load=loads[0], p_mem=pm,
                             seed=seed, label=f"p_mem={pm}/interposer/seed={seed}", **kw))
                w = add(Cell(arch=arch, fabric="wireless", load=loads[0], p_mem=pm,
                             seed=seed, label=f"p_mem={pm}/wireless/seed={seed}", **kw))
                pairs.append((f"p_mem={pm}/seed={seed}", b, w))
    elif etype == "trace-suite":
        traces = exp.get("traces") or ([traffic["trace_path"]] if traffic.get("trace_path") else [])
        if not traces:
            raise ConfigError("trace-suite needs experiment.traces or traffic.trace_path")
        replicate = traffic.get("replicate_chips", True)
        for tr in traces:
            name = os.path.splitext(os.path.basename(tr))[0]
            for seed in seeds:
                b = add(Cell(arch=arch, fabric="interposer", seed=seed, trace_path=tr,
                             replicate_chips=replicate, label=f"{name}/interposer/seed={seed}", **base))
                w = add(Cell(arch=arch, fabric="wireless", seed=seed, trace_path=tr,
                             replicate_chips=replicate, label=f"{name}/wireless/seed={seed}", **base))
                pairs.append((f"{name}/seed={seed}", b, w))
    else:
        raise ConfigError(f"unknown experiment type {etype!r}")
    return ExperimentPlan(etype, cells, pairs)


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def run_experiment(
    raw: dict[str, Any], out_prefix: str, jobs: int = 1
) -> tuple[str, str]:
    """Run all cells of an experiment; returns (results csv, gains csv) paths.

    Cells are independent, so with ``jobs > 1`` they run in worker processes.
    Output rows keep the plan order regardless of completion order, and the
    files are written atomically once everything finished.
    """
    plan = build_plan(raw)
    if jobs > 1 and len(plan.cells) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(run_cell, plan.cells))
    else:
        reports = [run_cell(c) for c in plan.cells]

    results_path = f"{out_prefix}.csv"
    gains_path = f"{out_prefix}_gains.csv"
    _atomic_write(
        results_path,
        "\n".join([MetricsReport.csv_header()] + [r.csv_row() for r in reports]) + "\n",
    )
    gain_lines = [",".join(GAIN_COLUMNS)]
    for label, b, w in plan.pairs:
        gain_lines.append(gain_row(plan.name, label, reports[b], reports[w]))
    _atomic_write(gains_path, "\n".join(gain_lines) + "\n")
    return results_path, gains_path
