"""Broadcast control-packet MAC for the shared mm-wave channel.

WIs take turns in ascending id order. At its turn a WI broadcasts a control
packet listing up to one (DestWI, PktID, NumFlits) tuple per occupied egress
VC; every WI computes the same window duration from the tuples, the named
destinations stay awake, everyone else sleeps for the data phase, and the
next WI in sequence starts when the window ends. Partial packets are allowed:
NumFlits covers only what is buffered and what the destination can accept, so
a wormhole packet may cross the channel in several fragments that the
destination reassembles in one VC keyed by PktID.

Receive-side overflow is prevented by credit mirroring: each control packet
publishes the sender's receive-VC bindings and free slots, and all WIs debit
the shared mirror for every announced tuple. The mirrored estimate is never
larger than the true free space, so announced flits always fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .fabric import FlowControlError, IDLE, Network, OutputVC
from .topology import Topology


class ProtocolViolation(AssertionError):
    """The credit mirror allowed something the real receiver cannot take."""


@dataclass(frozen=True)
class PhyParams:
    control_packet_cycles: int = 5
    flit_airtime: int = 5


@dataclass(frozen=True)
class ControlPacket:
    cycle: int
    sender: int  # WI switch id
    tuples: tuple[tuple[int, int, int], ...]  # (dest_wi, pkt_id, num_flits)


@dataclass(frozen=True)
class Window:
    start: int
    data_start: int
    end: int
    sender: int
    tuples: tuple[tuple[int, int, int], ...]
    sleepers: tuple[int, ...]


def transmission_duration(cp: ControlPacket, phy: PhyParams) -> int:
    """Window length in cycles: control airtime plus per-flit data airtime."""
    return phy.control_packet_cycles + phy.flit_airtime * sum(n for _, _, n in cp.tuples)


class MacController:
    """Owns the single shared channel; every mutation happens at the start of
    a cycle, before the switch phases run."""

    def __init__(self, net: Network, topo: Topology):
        cfg = topo.config
        self.net = net
        self.order: list[int] = list(topo.wi_nodes)
        self.phy = PhyParams(cfg.control_packet_cycles, cfg.flit_airtime)
        self.depth = cfg.vc_depth_flits
        self.flit_bits = cfg.flit_bits
        # Shared mirror of every WI's receive VCs: [bound_pid | None, free_slots]
        self.mirror: dict[int, list[list]] = {
            s: [[None, self.depth] for _ in range(cfg.vcs_per_port)] for s in self.order
        }
        self.next_turn = 0
        self.turn_idx = 0
        self.turn_counts = [0] * len(self.order)
        self.sleep_cycles = [0] * len(self.order)
        self._pop_bucket: dict[int, list] = {}
        # Flits off the air but not yet landed: (dst_wi, vc) -> [count, pid].
        # A window's last delivery coincides with the next turn's start cycle,
        # so the turn's snapshot must subtract these or it overstates space.
        self._in_flight: dict[tuple[int, int], list] = {}
        self._expiry: dict[int, list[tuple[int, int]]] = {}
        self.control_packets: list[ControlPacket] = []
        self.windows: list[Window] = []

    def step(self, t: int) -> None:
        for when in [k for k in self._expiry if k < t]:
            for key in self._expiry.pop(when):
                entry = self._in_flight[key]
                entry[0] -= 1
                if entry[0] == 0:
                    del self._in_flight[key]
        for ovc, op, seq, dst_invc in self._pop_bucket.pop(t, ()):
            self._pop(ovc, op, seq, dst_invc, t)
        if self.order and t == self.next_turn:
            self._start_turn(t)

    # -- transmission window ---------------------------------------------

    def _start_turn(self, t: int) -> None:
        w = len(self.order)
        k = self.turn_idx % w
        sender = self.order[k]
        self.turn_counts[k] += 1
        sw = self.net.switches[sender]

        self._publish(sender)
        tuples, schedule = self._build_control_packet(sw)
        cp = ControlPacket(t, sender, tuple(tuples))
        self.control_packets.append(cp)
        self.net.ledger.charge_hop(None, self.flit_bits, "control")
        duration = transmission_duration(cp, self.phy)

        flit_slot = 0
        for ovc, dst_invc, n in schedule:
            for j in range(n):
                dep = t + self.phy.control_packet_cycles + self.phy.flit_airtime * flit_slot
                seq = ovc.head_seq + j
                self._pop_bucket.setdefault(dep, []).append(
                    (ovc, sw.wireless_out, seq, dst_invc)
                )
                flit_slot += 1

        awake = {sender} | {d for d, _, _ in tuples}
        sleepers = tuple(s for s in self.order if s not in awake)
        data_cycles = duration - self.phy.control_packet_cycles
        for i, s in enumerate(self.order):
            if s in sleepers:
                self.sleep_cycles[i] += data_cycles
        self.windows.append(Window(t, t + self.phy.control_packet_cycles, t + duration, sender, tuple(tuples), sleepers))

        self.next_turn = t + duration
        self.turn_idx += 1

    def _publish(self, sender: int) -> None:
        """Refresh the shared mirror with the sender's true receive state.

        Windows never overlap, so there are no in-flight wireless flits at a
        turn boundary and the published snapshot is exact.
        """
        sw = self.net.switches[sender]
        packets = self.net.packets
        mir = self.mirror[sender]
        for v, invc in enumerate(sw.wireless_in):
            inflight = self._in_flight.get((sender, v))
            if invc.pid is not None and invc.tail_seq < packets[invc.pid].length:
                mir[v][0] = invc.pid  # bound until the tail flit arrives
            elif inflight is not None:
                mir[v][0] = inflight[1]  # binding rides with in-flight flits
            else:
                mir[v][0] = None
            mir[v][1] = (
                self.depth
                - invc.occupancy()
                - (inflight[0] if inflight is not None else 0)
            )

    def _build_control_packet(self, sw) -> tuple[list, list]:
        """Select tuples from occupied egress VCs, debiting the mirror.

        NumFlits = min(flits buffered for the packet, mirrored free slots at
        the destination VC); zero-flit tuples are omitted; an empty tuple
        list is a legal idle turn.
        """
        tuples: list[tuple[int, int, int]] = []
        schedule: list[tuple[OutputVC, object, int]] = []
        for ovc in sw.wireless_out.out_vcs:
            if ovc.pid is None:
                continue
            buffered = ovc.occupancy()
            if buffered == 0:
                continue
            mird = self.mirror[ovc.dst_wi]
            bvc = next((v for v, (bp, _) in enumerate(mird) if bp == ovc.pid), None)
            if bvc is None:
                bvc = next(
                    (v for v, (bp, fr) in enumerate(mird) if bp is None and fr == self.depth),
                    None,
                )
                if bvc is None:
                    continue  # destination has no reservable VC yet
                dst_invc = self.net.switches[ovc.dst_wi].wireless_in[bvc]
                if (
                    dst_invc.pid is not None
                    or dst_invc.occupancy()
                    or dst_invc.state != IDLE
                    or (ovc.dst_wi, bvc) in self._in_flight
                ):
                    raise ProtocolViolation(
                        f"mirror reserved busy VC {bvc} at WI {ovc.dst_wi}"
                    )
                mird[bvc][0] = ovc.pid
            n = min(buffered, mird[bvc][1])
            if n <= 0:
                continue
            mird[bvc][1] -= n
            dst_invc = self.net.switches[ovc.dst_wi].wireless_in[bvc]
            inflight = self._in_flight.get((ovc.dst_wi, bvc))
            true_free = (
                self.depth
                - dst_invc.occupancy()
                - (inflight[0] if inflight is not None else 0)
            )
            if true_free < n:
                raise ProtocolViolation(
                    f"mirror over-committed VC {bvc} at WI {ovc.dst_wi}"
                )
            tuples.append((ovc.dst_wi, ovc.pid, n))
            schedule.append((ovc, dst_invc, n))
        return tuples, schedule

    def _pop(self, ovc: OutputVC, op, seq: int, dst_invc, t: int) -> None:
        """Take one flit off the air: it leaves the egress buffer now and
        lands in the destination VC one airtime later."""
        if ovc.head_seq != seq:
            raise FlowControlError("wireless egress pop out of order")
        ovc.head_seq += 1
        arrive = t + self.phy.flit_airtime
        self.net.arrivals.setdefault(arrive, []).append((2, dst_invc, ovc.pid, seq))
        key = (dst_invc.switch.id, dst_invc.vc_index)
        entry = self._in_flight.setdefault(key, [0, ovc.pid])
        entry[0] += 1
        entry[1] = ovc.pid
        self._expiry.setdefault(arrive, []).append(key)
        op.credits[ovc.index] += 1
        if op.credits[ovc.index] > self.depth:
            raise FlowControlError("wireless egress credit overflow")
        self.net.last_movement = t
        if seq == ovc.length - 1:
            if ovc.occupancy() != 0:
                raise FlowControlError("flits beyond the tail in an egress VC")
            ovc.pid = None
            ovc.dst_wi = None
            ovc.head_seq = 0
            ovc.tail_seq = 0
            free = op.free_vcs
            lo, hi = 0, len(free)
            while lo < hi:
                mid = (lo + hi) // 2
                if free[mid] < ovc.index:
                    lo = mid + 1
                else:
                    hi = mid
            free.insert(lo, ovc.index)
