"""Cycle-accurate switch fabric: 3-stage pipelined switches, virtual-channel
buffers with credit backpressure, wormhole switching, and link serialization.

Pipeline stages are route-compute (header only), VC allocation (header only)
and combined switch-allocation/traversal. Within a cycle the stages are
evaluated in reverse order (SA/ST, then VA, then RC) so a flit advances at
most one stage per cycle without per-flit timestamps. Wormhole lets a VC hold
only contiguous flits of a single packet, so buffers are stored as a
``(packet, head_seq, tail_seq)`` window instead of per-flit queues.

Cross-switch effects (credit returns, VC releases, link deliveries) commit at
cycle end or later, so results are independent of switch evaluation order.
"""

from __future__ import annotations

from .config import Fabric as FabricKind
from .config import LinkKind, SystemConfig
from .energy import EnergyLedger
from .routing import ForwardingTable
from .topology import Topology
from .traffic import PacketClass

IDLE, ROUTED, ACTIVE = 0, 1, 2

# Output port kinds.
P_LINK, P_EJECT, P_WIRELESS = 0, 1, 2


class FlowControlError(AssertionError):
    """Credit or buffer accounting went inconsistent (an engine bug)."""


class PacketRecord:
    __slots__ = (
        "pid",
        "src",
        "dst",
        "length",
        "klass",
        "gen_cycle",
        "inject_done_cycle",
        "delivered_cycle",
        "next_eject_seq",
        "flits_ejected",
    )

    def __init__(self, pid: int, src: int, dst: int, length: int, klass: PacketClass, gen_cycle: int):
        self.pid = pid
        self.src = src
        self.dst = dst
        self.length = length
        self.klass = klass
        self.gen_cycle = gen_cycle
        self.inject_done_cycle = -1
        self.delivered_cycle = -1
        self.next_eject_seq = 0
        self.flits_ejected = 0


class InVC:
    """One input-side virtual channel: a bounded window of one packet."""

    __slots__ = (
        "switch",
        "vc_index",
        "pid",
        "head_seq",
        "tail_seq",
        "state",
        "out_port",
        "out_vc",
        "dst_wi",
        "up_out_port",
    )

    def __init__(self, switch: "Switch", vc_index: int):
        self.switch = switch
        self.vc_index = vc_index
        self.pid: int | None = None
        self.head_seq = 0
        self.tail_seq = 0
        self.state = IDLE
        self.out_port: OutPort | None = None
        self.out_vc = -1
        self.dst_wi: int | None = None
        self.up_out_port: OutPort | None = None

    def occupancy(self) -> int:
        return self.tail_seq - self.head_seq


class OutputVC:
    """Wireless egress buffer: flits staged for transmission over the air."""

    __slots__ = ("index", "pid", "dst_wi", "length", "head_seq", "tail_seq")

    def __init__(self, index: int):
        self.index = index
        self.pid: int | None = None
        self.dst_wi: int | None = None
        self.length = 0
        self.head_seq = 0
        self.tail_seq = 0

    def occupancy(self) -> int:
        return self.tail_seq - self.head_seq


class OutPort:
    __slots__ = (
        "switch",
        "kind",
        "link_kind",
        "lc",
        "category",
        "dst_switch",
        "dst_invcs",
        "out_vcs",
        "endpoint",
        "credits",
        "free_vcs",
        "active",
        "rr",
        "va_queue",
        "busy_until",
    )

    def __init__(self, switch: "Switch", kind: int, lc: int, num_vcs: int, depth: int):
        self.switch = switch
        self.kind = kind
        self.link_kind: LinkKind | None = None
        self.lc = lc
        self.category: str | None = None
        self.dst_switch: int = -1
        self.dst_invcs: list[InVC] | None = None
        self.out_vcs: list[OutputVC] | None = None
        self.endpoint: int = -1
        self.credits = [depth] * num_vcs
        self.free_vcs = list(range(num_vcs))
        self.active: list[InVC] = []
        self.rr = 0
        self.va_queue: list[InVC] = []
        self.busy_until = 0


class Switch:
    __slots__ = ("id", "in_vc_groups", "out_ports", "rc_queue", "rc_pending", "route", "wireless_out", "wireless_in")

    def __init__(self, sid: int):
        self.id = sid
        self.in_vc_groups: list[list[InVC]] = []
        self.out_ports: list[OutPort] = []
        self.rc_queue: list[InVC] = []
        self.rc_pending: list[InVC] = []
        # endpoint id -> (out_port, dst_wi or None)
        self.route: dict[int, tuple[OutPort, int | None]] = {}
        self.wireless_out: OutPort | None = None
        self.wireless_in: list[InVC] | None = None

    def new_in_port(self, num_vcs: int) -> list[InVC]:
        vcs = [InVC(self, v) for v in range(num_vcs)]
        self.in_vc_groups.append(vcs)
        return vcs


class Injector:
    """Feeds an endpoint's packets into its switch's local input port, one
    flit per cycle, one packet per VC at a time."""

    __slots__ = ("network", "endpoint", "vcs", "queue", "cur_vc", "cur_seq", "cur_pkt")

    def __init__(self, network: "Network", endpoint: int, vcs: list[InVC]):
        self.network = network
        self.endpoint = endpoint
        self.vcs = vcs
        self.queue: list[PacketRecord] = []
        self.cur_vc: InVC | None = None
        self.cur_seq = 0
        self.cur_pkt: PacketRecord | None = None

    def step(self, t: int) -> None:
        if self.cur_pkt is None:
            if not self.queue:
                return
            vc = next(
                (v for v in self.vcs if v.state == IDLE and v.pid is None and v.occupancy() == 0),
                None,
            )
            if vc is None:
                return
            self.cur_pkt = self.queue.pop(0)
            self.cur_vc = vc
            self.cur_seq = 0
        pkt, vc = self.cur_pkt, self.cur_vc
        if vc.occupancy() >= self.network.depth:
            return
        self.network.push_flit(vc, pkt.pid, self.cur_seq, t)
        self.cur_seq += 1
        if self.cur_seq == pkt.length:
            pkt.inject_done_cycle = t
            self.cur_pkt = None
            self.cur_vc = None

    def backlog(self) -> int:
        pending = sum(p.length for p in self.queue)
        if self.cur_pkt is not None:
            pending += self.cur_pkt.length - self.cur_seq
        return pending


class Network:
    """The wired fabric plus per-switch state; the wireless MAC drives the
    air interface through push_flit/pop hooks."""

    def __init__(
        self,
        topo: Topology,
        table: ForwardingTable,
        ledger: EnergyLedger,
        event_trace: list | None = None,
    ):
        cfg: SystemConfig = topo.config
        self.topo = topo
        self.table = table
        self.ledger = ledger
        self.config = cfg
        self.depth = cfg.vc_depth_flits
        self.num_vcs = cfg.vcs_per_port
        self.flit_bits = cfg.flit_bits
        self.event_trace = event_trace

        self.packets: list[PacketRecord] = []
        self.arrivals: dict[int, list] = {}
        self.eject_bucket: dict[int, list] = {}
        self._credit_returns: list[tuple[OutPort, int]] = []
        self._vc_releases: list[tuple[OutPort, int]] = []

        self.flits_pushed = 0
        self.flits_ejected = 0
        self.in_network = 0
        self.last_movement = 0
        self.delivered: list[PacketRecord] = []
        self.on_delivery = None  # callback(pkt, cycle), e.g. memory replies

        self.switches = [Switch(s) for s in range(topo.num_switches)]
        self._wire_links()
        self._wire_endpoints()
        self._build_routes()

    # -- construction -----------------------------------------------------

    def _wire_links(self) -> None:
        cfg = self.config
        wireless = cfg.fabric is FabricKind.WIRELESS
        if wireless:
            for s in self.topo.wi_nodes:
                sw = self.switches[s]
                op = OutPort(sw, P_WIRELESS, 1, self.num_vcs, self.depth)
                op.out_vcs = [OutputVC(v) for v in range(self.num_vcs)]
                sw.out_ports.append(op)
                sw.wireless_out = op
                sw.wireless_in = sw.new_in_port(self.num_vcs)
        self._link_ports: dict[tuple[int, int], OutPort] = {}
        for link in self.topo.links:
            if link.kind is LinkKind.WIRELESS:
                continue
            for u, v in ((link.a, link.b), (link.b, link.a)):
                swu, swv = self.switches[u], self.switches[v]
                op = OutPort(swu, P_LINK, link.traversal_cycles, self.num_vcs, self.depth)
                op.link_kind = link.kind
                op.category = EnergyLedger.link_category(link.kind.value)
                op.dst_switch = v
                in_vcs = swv.new_in_port(self.num_vcs)
                for vc in in_vcs:
                    vc.up_out_port = op
                op.dst_invcs = in_vcs
                swu.out_ports.append(op)
                self._link_ports[(u, v)] = op

    def _wire_endpoints(self) -> None:
        self.injectors: dict[int, Injector] = {}
        self._eject_ports: dict[int, OutPort] = {}
        for sw_id, endpoints in self.topo.switch_endpoints.items():
            sw = self.switches[sw_id]
            for ep in endpoints:
                op = OutPort(sw, P_EJECT, 1, self.num_vcs, self.depth)
                op.endpoint = ep
                sw.out_ports.append(op)
                self._eject_ports[ep] = op
                vcs = sw.new_in_port(self.num_vcs)
                self.injectors[ep] = Injector(self, ep, vcs)

    def _build_routes(self) -> None:
        for sw in self.switches:
            for ep in self.topo.endpoints:
                dst_sw = self.topo.endpoint_switch[ep]
                if dst_sw == sw.id:
                    sw.route[ep] = (self._eject_ports[ep], None)
                    continue
                link = self.table.next_hop(sw.id, dst_sw)
                nxt = link.b if link.a == sw.id else link.a
                if link.kind is LinkKind.WIRELESS:
                    assert sw.wireless_out is not None
                    sw.route[ep] = (sw.wireless_out, nxt)
                else:
                    sw.route[ep] = (self._link_ports[(sw.id, nxt)], None)

    # -- packet API -------------------------------------------------------

    def new_packet(self, src: int, dst: int, length: int, klass: PacketClass, cycle: int) -> PacketRecord:
        pkt = PacketRecord(len(self.packets), src, dst, length, klass, cycle)
        self.packets.append(pkt)
        self.injectors[src].queue.append(pkt)
        return pkt

    # -- flit movement ----------------------------------------------------

    def push_flit(self, vc: InVC, pid: int, seq: int, t: int, wireless: bool = False) -> None:
        """Commit a flit into an input VC buffer (injection, link arrival, or
        wireless delivery)."""
        if vc.pid is None:
            if seq != 0:
                raise FlowControlError(
                    f"flit seq {seq} of packet {pid} arrived at an idle VC"
                )
            vc.pid = pid
            vc.head_seq = 0
            vc.tail_seq = 0
        elif vc.pid != pid or seq != vc.tail_seq:
            raise FlowControlError(
                f"out-of-order flit: packet {pid} seq {seq} at VC holding "
                f"packet {vc.pid} tail {vc.tail_seq}"
            )
        vc.tail_seq += 1
        if vc.occupancy() > self.depth:
            raise FlowControlError(f"VC buffer overflow at switch {vc.switch.id}")
        # Headers wait one cycle before route compute: arrival and RC are
        # distinct pipeline cycles, giving 3 + link_cycles per hop unloaded.
        if seq == 0 and vc.state == IDLE:
            vc.switch.rc_pending.append(vc)
        if wireless:
            self.ledger.charge_hop(pid, self.flit_bits, "wireless")
        elif vc.up_out_port is None:
            # Injection push: the flit enters the network here.
            self.flits_pushed += 1
            self.in_network += 1
        self.last_movement = t
        if self.event_trace is not None:
            self.event_trace.append((t, vc.switch.id, f"recv p{pid}.{seq}"))

    # -- cycle phases -----------------------------------------------------

    def arrivals_phase(self, t: int) -> None:
        for ev in self.arrivals.pop(t, ()):
            kind, target, pid, seq = ev
            if kind == 0:  # wired link delivery into an input VC
                self.push_flit(target, pid, seq, t)
            elif kind == 2:  # wireless air delivery into a bound input VC
                self.push_flit(target, pid, seq, t, wireless=True)
            else:  # staging into a wireless output VC
                ovc: OutputVC = target
                if ovc.pid != pid or seq != ovc.tail_seq:
                    raise FlowControlError("wireless output VC sequencing error")
                ovc.tail_seq += 1
                if ovc.occupancy() > self.depth:
                    raise FlowControlError("wireless output VC overflow")
        for ep, pid, seq in self.eject_bucket.pop(t, ()):
            pkt = self.packets[pid]
            if seq != pkt.next_eject_seq:
                raise FlowControlError(
                    f"out-of-order ejection: packet {pid} seq {seq}, expected "
                    f"{pkt.next_eject_seq}"
                )
            pkt.next_eject_seq += 1
            pkt.flits_ejected += 1
            self.flits_ejected += 1
            self.in_network -= 1
            self.last_movement = t
            if seq == pkt.length - 1:
                pkt.delivered_cycle = t
                self.delivered.append(pkt)
                if self.on_delivery is not None:
                    self.on_delivery(pkt, t)

    def switch_phase(self, t: int) -> None:
        ledger = self.ledger
        bits = self.flit_bits
        arrivals = self.arrivals
        for sw in self.switches:
            # Stage 3: switch allocation + traversal (one winner per output).
            for op in sw.out_ports:
                act = op.active
                if not act or op.busy_until > t:
                    continue
                n = len(act)
                rr = op.rr % n
                eject = op.kind == P_EJECT
                winner = None
                widx = 0
                for i in range(n):
                    vc = act[(rr + i) % n]
                    if vc.head_seq >= vc.tail_seq:
                        continue
                    if eject or op.credits[vc.out_vc] > 0:
                        winner = vc
                        widx = (rr + i) % n
                        break
                if winner is None:
                    continue
                vc = winner
                seq = vc.head_seq
                vc.head_seq = seq + 1
                pid = vc.pid
                pkt = self.packets[pid]
                is_tail = seq == pkt.length - 1
                op.busy_until = t + op.lc
                self.last_movement = t
                ledger.charge_hop(pid, bits, "switch")
                if op.category is not None:
                    ledger.charge_hop(pid, bits, op.category)
                if eject:
                    self.eject_bucket.setdefault(t + op.lc, []).append((op.endpoint, pid, seq))
                elif op.kind == P_WIRELESS:
                    op.credits[vc.out_vc] -= 1
                    arrivals.setdefault(t + op.lc, []).append((1, op.out_vcs[vc.out_vc], pid, seq))
                else:
                    if op.credits[vc.out_vc] <= 0:
                        raise FlowControlError("negative credit")
                    op.credits[vc.out_vc] -= 1
                    arrivals.setdefault(t + op.lc, []).append((0, op.dst_invcs[vc.out_vc], pid, seq))
                if vc.up_out_port is not None:
                    self._credit_returns.append((vc.up_out_port, vc.vc_index))
                if self.event_trace is not None:
                    self.event_trace.append((t, sw.id, f"xfer p{pid}.{seq}"))
                if is_tail:
                    act.remove(vc)
                    op.rr = widx % len(act) if act else 0
                    if vc.up_out_port is not None:
                        self._vc_releases.append((vc.up_out_port, vc.vc_index))
                    vc.state = IDLE
                    vc.pid = None
                    vc.head_seq = 0
                    vc.tail_seq = 0
                    vc.out_port = None
                    vc.out_vc = -1
                    vc.dst_wi = None
                else:
                    op.rr = (widx + 1) % n

            # Stage 2: VC allocation for routed headers.
            for op in sw.out_ports:
                q = op.va_queue
                if not q:
                    continue
                if op.kind == P_EJECT:
                    for vc in q:
                        vc.state = ACTIVE
                        vc.out_vc = -1
                        op.active.append(vc)
                    q.clear()
                else:
                    while q and op.free_vcs:
                        vc = q.pop(0)
                        v = op.free_vcs.pop(0)
                        vc.state = ACTIVE
                        vc.out_vc = v
                        op.active.append(vc)
                        if op.kind == P_WIRELESS:
                            ovc = op.out_vcs[v]
                            if ovc.pid is not None:
                                raise FlowControlError("wireless output VC reuse")
                            pkt = self.packets[vc.pid]
                            ovc.pid = vc.pid
                            ovc.dst_wi = vc.dst_wi
                            ovc.length = pkt.length
                            ovc.head_seq = 0
                            ovc.tail_seq = 0

            # Stage 1: route compute for headers that arrived before this cycle.
            q = sw.rc_queue
            if q:
                for vc in q:
                    pkt = self.packets[vc.pid]
                    op, dst_wi = sw.route[pkt.dst]
                    vc.state = ROUTED
                    vc.out_port = op
                    vc.dst_wi = dst_wi
                    op.va_queue.append(vc)
                q.clear()
            if sw.rc_pending:
                sw.rc_queue, sw.rc_pending = sw.rc_pending, sw.rc_queue

    def commit_phase(self, t: int) -> None:
        for op, v in self._credit_returns:
            op.credits[v] += 1
            if op.credits[v] > self.depth:
                raise FlowControlError(f"credit overflow on switch {op.switch.id}")
        self._credit_returns.clear()
        for op, v in self._vc_releases:
            # Keep the free list sorted so VA hands out the lowest VC first.
            lo, hi = 0, len(op.free_vcs)
            while lo < hi:
                mid = (lo + hi) // 2
                if op.free_vcs[mid] < v:
                    lo = mid + 1
                else:
                    hi = mid
            op.free_vcs.insert(lo, v)
        self._vc_releases.clear()

    # -- checks -----------------------------------------------------------

    def buffered_flits(self) -> int:
        total = 0
        for sw in self.switches:
            for group in sw.in_vc_groups:
                for vc in group:
                    total += vc.occupancy()
            if sw.wireless_out is not None:
                for ovc in sw.wireless_out.out_vcs:
                    total += ovc.occupancy()
        return total

    def in_flight_flits(self) -> int:
        return sum(len(v) for v in self.arrivals.values()) + sum(
            len(v) for v in self.eject_bucket.values()
        )

    def check_conservation(self) -> None:
        in_net = self.buffered_flits() + self.in_flight_flits()
        if self.flits_pushed != self.flits_ejected + in_net:
            raise FlowControlError(
                f"flit conservation violated: pushed={self.flits_pushed} "
                f"ejected={self.flits_ejected} in_network={in_net}"
            )
        if self.in_network != in_net:
            raise FlowControlError(
                f"in-network counter drift: {self.in_network} vs {in_net}"
            )

    def check_credits(self) -> None:
        for sw in self.switches:
            for op in sw.out_ports:
                for c in op.credits:
                    if not 0 <= c <= self.depth:
                        raise FlowControlError(
                            f"credit {c} out of range at switch {sw.id}"
                        )
