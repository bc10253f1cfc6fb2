"""Shared-channel MAC: window durations, mutual exclusion, fairness,
fragmentation, and sleep accounting.

Duration oracle (5-cycle control phase, 5 cycles per data flit):
  idle turn                      -> 5
  one 16-flit announcement       -> 5 + 16*5  = 85
  eight 16-flit announcements    -> 5 + 128*5 = 645
"""

import pytest

from wimcsim.config import parse_arch, RunParams
from wimcsim.engine import Simulator
from wimcsim.mac import ControlPacket, PhyParams, transmission_duration
from wimcsim.traffic import TrafficSpec


def test_duration_oracle():
    phy = PhyParams()
    assert transmission_duration(ControlPacket(0, 0, ()), phy) == 5
    assert transmission_duration(ControlPacket(0, 0, ((1, 0, 16),)), phy) == 85
    eight = tuple((d, d, 16) for d in range(8))
    assert transmission_duration(ControlPacket(0, 0, eight), phy) == 645
    assert transmission_duration(ControlPacket(0, 0, ((1, 0, 3), (2, 1, 5))), phy) == 45


@pytest.fixture(scope="module")
def wireless_sim():
    config = parse_arch("4C4M:wireless")
    sim = Simulator(
        config,
        TrafficSpec(injection_load=0.1, seed=2),
        RunParams(total_cycles=10_000, warmup_cycles=1_000, debug_checks=True),
    )
    sim.run()
    return sim


def test_mutual_exclusion(wireless_sim):
    # Windows tile the timeline with no overlap: each starts when the
    # previous one ends, so there is never a second simultaneous transmitter.
    windows = wireless_sim.mac.windows
    assert len(windows) > 20
    for prev, cur in zip(windows, windows[1:]):
        assert cur.start == prev.end
    for w in windows:
        assert w.end - w.start == 5 + 5 * sum(n for _, _, n in w.tuples)


def test_round_robin_fairness(wireless_sim):
    counts = wireless_sim.mac.turn_counts
    assert max(counts) - min(counts) <= 1


def test_control_packet_shape(wireless_sim):
    cfg = wireless_sim.config
    order = set(wireless_sim.mac.order)
    for cp in wireless_sim.mac.control_packets:
        assert len(cp.tuples) <= cfg.vcs_per_port
        for dst, pid, n in cp.tuples:
            assert dst in order and dst != cp.sender
            assert 1 <= n <= cfg.vc_depth_flits


def test_packets_fragmented_across_windows(wireless_sim):
    # A 64-flit packet cannot fit one 16-deep VC window, so some packet id
    # must be announced in several control packets.
    # A tree route may cross the air twice (via an intermediate WI), so count
    # announced flits per (sender, packet): never more than the packet length,
    # and full packets need >= 4 windows each.
    seen: dict[tuple[int, int], int] = {}
    frags: dict[tuple[int, int], int] = {}
    for cp in wireless_sim.mac.control_packets:
        for _, pid, n in cp.tuples:
            key = (cp.sender, pid)
            seen[key] = seen.get(key, 0) + n
            frags[key] = frags.get(key, 0) + 1
    assert seen, "no wireless transfers at all"
    lengths = {pid: wireless_sim.net.packets[pid].length for _, pid in seen}
    for (sender, pid), total in seen.items():
        assert total <= lengths[pid]
    assert max(seen.values()) == 64  # at least one full packet crossed
    assert any(v >= 4 for v in frags.values())


def test_lossless_reassembly(wireless_sim):
    # In-order per-packet ejection is asserted inside the fabric; here every
    # delivered packet must be sequence-complete.
    delivered = wireless_sim.net.delivered
    assert delivered
    for pkt in delivered:
        assert pkt.flits_ejected == pkt.length
        assert pkt.next_eject_seq == pkt.length


def test_sleep_accounting(wireless_sim):
    mac = wireless_sim.mac
    expected = [0] * len(mac.order)
    for w in mac.windows:
        data = (w.end - w.start) - 5
        for s in w.sleepers:
            expected[mac.order.index(s)] += data
    assert mac.sleep_cycles == expected
    for w in mac.windows:
        awake = {w.sender} | {d for d, _, _ in w.tuples}
        assert not awake & set(w.sleepers)


def test_wireless_energy_charged_per_flit(wireless_sim):
    # Every flit that crossed the air was charged 32 bits at 2.3 pJ/bit.
    total_air_flits = sum(
        n for cp in wireless_sim.mac.control_packets for _, _, n in cp.tuples
    )
    # Flits still in flight at the end have been charged on delivery only, so
    # the ledger may lag the announcements by at most one window's worth.
    charged = wireless_sim.ledger.category_totals["wireless"] / (32 * 2.3)
    assert charged == pytest.approx(total_air_flits, abs=8 * 16)
    # Control energy: one 32-bit control packet per window.
    assert wireless_sim.ledger.category_totals["control"] == pytest.approx(
        len(wireless_sim.mac.control_packets) * 32 * 2.3
    )
