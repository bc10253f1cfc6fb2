"""The cycle loop: warmup/measurement windowing, metrics, saturation search.

A run executes ``total_cycles`` lockstep cycles. Packets injected during the
first ``warmup_cycles`` are excluded from latency and energy statistics;
throughput counts every flit ejected inside the measurement window. Latency
is tail-flit ejection cycle minus generation cycle.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from .config import EnergyParams, Fabric, LinkKind, RunParams, SystemConfig
from .energy import EnergyLedger
from .fabric import Network
from .mac import MacController
from .routing import (
    EdgeWeighting,
    ForwardingTable,
    RoutingMode,
    check_deadlock_freedom,
    compute_tables,
)
from .topology import Topology, build_topology
from .traffic import Injection, PacketClass, TrafficSpec, make_generator


class DeadlockError(RuntimeError):
    def __init__(self, message: str, snapshot: str):
        super().__init__(message)
        self.snapshot = snapshot


CSV_COLUMNS = [
    "arch",
    "fabric",
    "pattern",
    "load",
    "p_mem",
    "seed",
    "mode",
    "total_cycles",
    "warmup_cycles",
    "packets_injected",
    "packets_delivered",
    "flits_delivered_window",
    "throughput_flits_core_cycle",
    "bandwidth_gbps_per_core",
    "avg_latency_cycles",
    "avg_latency_ns",
    "avg_packet_energy_pj",
    "avg_packet_energy_with_control_pj",
    "energy_wireless_pj",
    "energy_serial_pj",
    "energy_wide_pj",
    "energy_wire_pj",
    "energy_switch_pj",
    "energy_control_pj",
    "energy_static_pj",
]


@dataclass
class MetricsReport:
    arch: str
    fabric: str
    pattern: str
    load: float
    p_mem: float
    seed: int
    mode: str
    total_cycles: int
    warmup_cycles: int
    packets_injected: int
    packets_delivered: int
    flits_delivered_window: int
    throughput_flits_core_cycle: float
    bandwidth_gbps_per_core: float
    avg_latency_cycles: float
    avg_latency_ns: float
    avg_packet_energy_pj: float
    avg_packet_energy_with_control_pj: float
    energy_categories: dict[str, float]
    class_counts: dict[str, int] = field(default_factory=dict)
    class_latency: dict[str, float] = field(default_factory=dict)
    latency_histogram: dict[int, int] = field(default_factory=dict)

    def csv_row(self) -> str:
        vals = [
            self.arch,
            self.fabric,
            self.pattern,
            f"{self.load:.6g}",
            f"{self.p_mem:.6g}",
            str(self.seed),
            self.mode,
            str(self.total_cycles),
            str(self.warmup_cycles),
            str(self.packets_injected),
            str(self.packets_delivered),
            str(self.flits_delivered_window),
            f"{self.throughput_flits_core_cycle:.8f}",
            f"{self.bandwidth_gbps_per_core:.6f}",
            f"{self.avg_latency_cycles:.4f}",
            f"{self.avg_latency_ns:.4f}",
            f"{self.avg_packet_energy_pj:.4f}",
            f"{self.avg_packet_energy_with_control_pj:.4f}",
        ] + [f"{self.energy_categories[c]:.3f}" for c in ("wireless", "serial", "wide", "wire", "switch", "control", "static")]
        return ",".join(vals)

    @staticmethod
    def csv_header() -> str:
        return ",".join(CSV_COLUMNS)

    def to_text(self) -> str:
        out = io.StringIO()
        print(f"architecture      : {self.arch} ({self.fabric})", file=out)
        print(f"traffic           : {self.pattern} load={self.load} p_mem={self.p_mem} seed={self.seed}", file=out)
        print(f"routing mode      : {self.mode}", file=out)
        print(f"cycles            : {self.total_cycles} (warmup {self.warmup_cycles})", file=out)
        print(f"packets           : injected={self.packets_injected} delivered={self.packets_delivered}", file=out)
        print(f"throughput        : {self.throughput_flits_core_cycle:.6f} flits/core/cycle", file=out)
        print(f"bandwidth per core: {self.bandwidth_gbps_per_core:.4f} Gbps", file=out)
        print(f"avg packet latency: {self.avg_latency_cycles:.2f} cycles ({self.avg_latency_ns:.2f} ns)", file=out)
        print(f"avg packet energy : {self.avg_packet_energy_pj:.2f} pJ "
              f"({self.avg_packet_energy_with_control_pj:.2f} pJ incl. control)", file=out)
        print("energy by category:", file=out)
        for cat, pj in self.energy_categories.items():
            print(f"  {cat:<9}: {pj:.1f} pJ", file=out)
        if self.class_counts:
            print("per traffic class :", file=out)
            for k, cnt in self.class_counts.items():
                lat = self.class_latency.get(k, 0.0)
                print(f"  {k:<15}: {cnt} packets, avg latency {lat:.2f} cycles", file=out)
        return out.getvalue()


class Simulator:
    """One deterministic simulation: (config, traffic, seed) fixes every metric."""

    def __init__(
        self,
        config: SystemConfig,
        traffic: TrafficSpec,
        run_params: RunParams | None = None,
        energy: EnergyParams | None = None,
        routing_mode: RoutingMode = RoutingMode.SINGLE_TREE,
        weighting: EdgeWeighting | None = None,
        allow_cyclic_routes: bool = False,
        event_trace: list | None = None,
    ):
        self.config = config
        self.traffic = traffic
        self.run_params = run_params or RunParams()
        self.topo: Topology = build_topology(config)
        self.table: ForwardingTable = compute_tables(
            self.topo, weighting, routing_mode, seed=config.seed
        )
        if routing_mode is RoutingMode.ALL_PAIRS_SP and not allow_cyclic_routes:
            ok, witness = check_deadlock_freedom(self.table, self.topo)
            if not ok:
                raise DeadlockError(
                    "all-pairs shortest-path routes contain a cyclic channel "
                    "dependency; pass allow_cyclic_routes=True to simulate anyway",
                    snapshot=f"witness cycle: {witness}",
                )
        self.ledger = EnergyLedger(energy or EnergyParams())
        self.net = Network(self.topo, self.table, self.ledger, event_trace)
        self.mac = (
            MacController(self.net, self.topo)
            if config.fabric is Fabric.WIRELESS and self.topo.wi_nodes
            else None
        )
        self.generator = make_generator(traffic, self.topo)
        if traffic.mem_replies:
            self.net.on_delivery = self._maybe_reply

    def _maybe_reply(self, pkt, cycle: int) -> None:
        if pkt.klass is PacketClass.CORE_TO_MEMORY:
            self.net.new_packet(
                pkt.dst, pkt.src, pkt.length, PacketClass.MEMORY_TO_CORE, cycle
            )

    def run(self) -> MetricsReport:
        rp = self.run_params
        net = self.net
        injectors = list(net.injectors.values())
        flits_at_warmup = 0
        for t in range(rp.total_cycles):
            if t == rp.warmup_cycles:
                flits_at_warmup = net.flits_ejected
            if self.mac is not None:
                self.mac.step(t)
            net.arrivals_phase(t)
            for inj in self.generator.step(t):
                net.new_packet(inj.src, inj.dst, inj.length, inj.klass, t)
            for injector in injectors:
                injector.step(t)
            net.switch_phase(t)
            net.commit_phase(t)
            if rp.debug_checks and t % 64 == 0:
                net.check_conservation()
                net.check_credits()
            if (
                net.in_network > 0
                and t - net.last_movement > rp.deadlock_threshold
            ):
                raise DeadlockError(
                    f"no flit movement for {t - net.last_movement} cycles at cycle {t}",
                    snapshot=self._snapshot(t),
                )
        net.check_conservation()
        net.check_credits()
        if self.ledger.params.switch_static_pw:
            self.ledger.charge_pj(
                None,
                self.ledger.params.switch_static_pw
                * self.topo.num_switches
                * rp.total_cycles,
                "static",
            )
        if self.mac is not None and self.ledger.params.wi_sleep_pw:
            self.ledger.charge_pj(
                None,
                self.ledger.params.wi_sleep_pw * sum(self.mac.sleep_cycles),
                "static",
            )
        return self._report(net.flits_ejected - flits_at_warmup)

    def _snapshot(self, t: int) -> str:
        lines = [f"cycle {t}: {self.net.in_network} flits in network"]
        for sw in self.net.switches:
            for group in sw.in_vc_groups:
                for vc in group:
                    if vc.occupancy() or vc.pid is not None:
                        lines.append(
                            f"  switch {sw.id} vc{vc.vc_index}: pkt={vc.pid} "
                            f"occ={vc.occupancy()} state={vc.state}"
                        )
            if len(lines) > 40:
                lines.append("  ...")
                break
        return "\n".join(lines)

    def _report(self, flits_window: int) -> MetricsReport:
        rp = self.run_params
        cfg = self.config
        net = self.net
        window = rp.total_cycles - rp.warmup_cycles
        cores = max(1, cfg.total_cores)
        throughput = flits_window / (cores * window)
        bandwidth = throughput * cfg.flit_bits * cfg.clock_ghz  # Gbps per core

        measured = [
            p
            for p in net.delivered
            if p.gen_cycle >= rp.warmup_cycles and p.delivered_cycle < rp.total_cycles
        ]
        latencies = [p.delivered_cycle - p.gen_cycle for p in measured]
        avg_lat = sum(latencies) / len(latencies) if latencies else 0.0
        avg_lat_ns = avg_lat / cfg.clock_ghz if latencies else 0.0
        if measured:
            avg_e = self.ledger.avg_packet_energy([p.pid for p in measured])
            avg_e_ctrl = avg_e + self.ledger.category_totals["control"] / len(measured)
        else:
            avg_e = avg_e_ctrl = 0.0

        class_counts: dict[str, int] = {}
        class_lat_sum: dict[str, float] = {}
        hist: dict[int, int] = {}
        for p, lat in zip(measured, latencies):
            k = p.klass.value
            class_counts[k] = class_counts.get(k, 0) + 1
            class_lat_sum[k] = class_lat_sum.get(k, 0.0) + lat
            bucket = (lat // 50) * 50
            hist[bucket] = hist.get(bucket, 0) + 1

        return MetricsReport(
            arch=f"{cfg.num_chips}C{cfg.num_memories}M",
            fabric=cfg.fabric.value,
            pattern=self.traffic.pattern.value,
            load=self.traffic.injection_load,
            p_mem=self.traffic.p_mem,
            seed=cfg.seed,
            mode=self.table.mode.value,
            total_cycles=rp.total_cycles,
            warmup_cycles=rp.warmup_cycles,
            packets_injected=len(net.packets),
            packets_delivered=len(net.delivered),
            flits_delivered_window=flits_window,
            throughput_flits_core_cycle=throughput,
            bandwidth_gbps_per_core=bandwidth,
            avg_latency_cycles=avg_lat,
            avg_latency_ns=avg_lat_ns,
            avg_packet_energy_pj=avg_e,
            avg_packet_energy_with_control_pj=avg_e_ctrl,
            energy_categories=dict(self.ledger.category_totals),
            class_counts=class_counts,
            class_latency={
                k: class_lat_sum[k] / class_counts[k] for k in class_counts
            },
            latency_histogram=hist,
        )


def run(
    config: SystemConfig,
    traffic: TrafficSpec,
    run_params: RunParams | None = None,
    **kwargs,
) -> MetricsReport:
    """Build and execute a single simulation."""
    return Simulator(config, traffic, run_params, **kwargs).run()


def zero_load_latency(topo: Topology, table: ForwardingTable, src_ep: int, dst_ep: int) -> int:
    """Analytic unloaded packet latency for a wired route.

    Raises ValueError for routes using the wireless channel, whose timing is
    governed by the MAC schedule instead of a closed form.
    """
    cfg = topo.config
    src_sw = topo.endpoint_switch[src_ep]
    dst_sw = topo.endpoint_switch[dst_ep]
    path = table.route(src_sw, dst_sw) if src_sw != dst_sw else [src_sw]
    costs = []  # outgoing link cycles per traversed switch
    for u, v in zip(path, path[1:]):
        link = None
        for w, l in topo.adjacency[u]:
            if w == v:
                link = l
                break
        assert link is not None
        if link.kind is LinkKind.WIRELESS:
            raise ValueError("zero_load_latency is undefined over the wireless channel")
        costs.append(link.traversal_cycles)
    costs.append(1)  # the ejection link at the destination switch

    # Per-flit recurrence: the header pays the 3-stage pipeline at every
    # switch; body flits move in their arrival cycle, paced by the outgoing
    # link's occupancy. On all-1-cycle paths this reduces to
    # hops*(3+1) + (L-1).
    length = cfg.packet_flits
    arrival = list(range(length))  # injection, one flit per cycle
    for c in costs:
        st = [arrival[0] + 3]
        for m in range(1, length):
            st.append(max(arrival[m], st[m - 1] + c))
        arrival = [t + c for t in st]
    return arrival[-1]


@dataclass
class SweepResult:
    loads: list[float]
    reports: list[MetricsReport]
    saturation_throughput: float
    knee_load: float | None


def saturation_sweep(
    config: SystemConfig,
    loads: list[float],
    traffic: TrafficSpec | None = None,
    run_params: RunParams | None = None,
    **kwargs,
) -> SweepResult:
    """Run ascending loads; saturation throughput is the delivered
    flits/core/cycle at the highest load. The knee is the first load whose
    latency exceeds three times the lowest-load latency (the zero-load proxy).
    """
    if loads != sorted(loads):
        raise ValueError("loads must be ascending")
    base = traffic or TrafficSpec()
    reports = []
    for load in loads:
        spec = TrafficSpec(
            pattern=base.pattern,
            injection_load=load,
            p_mem=base.p_mem,
            trace_path=base.trace_path,
            replicate_chips=base.replicate_chips,
            mem_replies=base.mem_replies,
            seed=base.seed,
        )
        reports.append(run(config, spec, run_params, **kwargs))
    baseline = reports[0].avg_latency_cycles or 1.0
    knee = None
    for load, rep in zip(loads, reports):
        if rep.avg_latency_cycles > 3 * baseline:
            knee = load
            break
    return SweepResult(
        loads=list(loads),
        reports=reports,
        saturation_throughput=reports[-1].throughput_flits_core_cycle,
        knee_load=knee,
    )
