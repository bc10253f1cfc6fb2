"""Topology construction against brute-force placement and counting oracles."""

import itertools

import pytest

from wimcsim.config import Fabric, LinkKind, mesh_dims, parse_arch
from wimcsim.topology import build_topology, hop_sum, place_wis


def brute_force_mad(rows, cols, members):
    """Oracle: the member minimizing total hop distance to every mesh switch,
    ties broken by lowest (row, col)."""
    def total(rc):
        r, c = rc
        return sum(abs(r - rr) + abs(c - cc) for rr in range(rows) for cc in range(cols))
    return min(members, key=lambda rc: (total(rc), rc))


def test_hop_sum_matches_brute_force():
    for rows, cols in [(4, 4), (2, 4), (8, 8), (3, 5)]:
        for rc in itertools.product(range(rows), range(cols)):
            oracle = sum(
                abs(rc[0] - rr) + abs(rc[1] - cc)
                for rr in range(rows)
                for cc in range(cols)
            )
            assert hop_sum(rc, rows, cols) == oracle


@pytest.mark.parametrize("cores,density", [(16, 16), (16, 4), (64, 16), (8, 8), (64, 64)])
def test_place_wis_matches_brute_force(cores, density):
    rows, cols = mesh_dims(cores)
    placements = place_wis(cores, density)
    assert len(placements) == cores // density
    # Recover each cluster and check its representative against the oracle.
    from wimcsim.topology import _cluster_dims

    cr, cc = _cluster_dims(rows, cols, density)
    expected = []
    for r0 in range(0, rows, cr):
        for c0 in range(0, cols, cc):
            members = [(r, c) for r in range(r0, r0 + cr) for c in range(c0, c0 + cc)]
            expected.append(brute_force_mad(rows, cols, members))
    assert placements == expected


def test_place_wis_single_wi_is_central():
    # 4x4 mesh: hop-sum minimum is the 2x2 centre block; lowest (row,col) wins.
    assert place_wis(16, 16) == [(1, 1)]
    # 8x8 mesh: same argument at (3, 3).
    assert place_wis(64, 64) == [(3, 3)]


def test_place_wis_rejects_bad_density():
    with pytest.raises(Exception):
        place_wis(16, 5)


def link_census(topo):
    counts = {}
    for link in topo.links:
        counts[link.kind] = counts.get(link.kind, 0) + 1
    return counts


def test_substrate_4c4m_link_counts():
    topo = build_topology(parse_arch("4C4M:substrate"))
    counts = link_census(topo)
    # 4 chips x 4x4 mesh: 24 internal wires each; 3 inter-chip serial links;
    # one wide I/O link per stack.
    assert counts[LinkKind.MESH_WIRE] == 4 * 24
    assert counts[LinkKind.SERIAL_IO] == 3
    assert counts[LinkKind.WIDE_IO] == 4
    assert LinkKind.WIRELESS not in counts
    assert topo.wi_nodes == []


def test_interposer_4c4m_link_counts():
    topo = build_topology(parse_arch("4C4M:interposer"))
    counts = link_census(topo)
    # 3 chip gaps x 4 rows, plus 4 stacks x 4 facing rows.
    assert counts[LinkKind.INTERPOSER_WIRE] == 3 * 4 + 4 * 4
    assert counts[LinkKind.MESH_WIRE] == 4 * 24
    assert LinkKind.SERIAL_IO not in counts


def test_wireless_4c4m_wi_clique():
    topo = build_topology(parse_arch("4C4M:wireless"))
    counts = link_census(topo)
    # 4 chip WIs + 4 memory WIs = 8 nodes, C(8,2) = 28 clique edges.
    assert len(topo.wi_nodes) == 8
    assert counts[LinkKind.WIRELESS] == 28
    assert counts[LinkKind.MESH_WIRE] == 4 * 24
    # No wired inter-chip or memory links.
    assert LinkKind.SERIAL_IO not in counts
    assert LinkKind.WIDE_IO not in counts
    # WI order is ascending switch id: chip WIs first, then memory switches.
    assert topo.wi_nodes == sorted(topo.wi_nodes)
    assert topo.wi_nodes[-4:] == [64, 65, 66, 67]


def test_wireless_wi_density_four():
    topo = build_topology(parse_arch("4C4M:wireless", {"wi_density": 4}))
    assert len(topo.wi_nodes) == 4 * 4 + 4


def test_node_id_scheme():
    topo = build_topology(parse_arch("4C4M:wireless"))
    assert topo.num_switches == 4 * 16 + 4
    assert topo.core_ids == list(range(68, 68 + 64))
    assert len(topo.mem_channel_ids) == 16
    # Every core endpoint attaches to its own switch.
    for i, core in enumerate(topo.core_ids):
        assert topo.endpoint_switch[core] == i
    # Memory channels share their stack's base switch.
    for stack in topo.memory_stacks:
        for ch in stack.channels:
            assert topo.endpoint_switch[ch] == stack.base_switch


def test_memory_split_left_right():
    topo = build_topology(parse_arch("4C4M:substrate"))
    sides = [s.side for s in topo.memory_stacks]
    assert sides == ["left", "left", "right", "right"]
    topo3 = build_topology(parse_arch("2C3M:substrate"))
    assert [s.side for s in topo3.memory_stacks] == ["left", "left", "right"]


def test_build_is_deterministic():
    a = build_topology(parse_arch("4C4M:wireless"))
    b = build_topology(parse_arch("4C4M:wireless"))
    assert [(l.a, l.b, l.kind) for l in a.links] == [(l.a, l.b, l.kind) for l in b.links]
    assert a.wi_nodes == b.wi_nodes


@pytest.mark.parametrize(
    "arch",
    ["1C4M:wireless", "4C4M:substrate", "4C4M:interposer", "4C4M:wireless",
     "8C4M:interposer", "2C2M:substrate"],
)
def test_all_fabrics_connected(arch):
    overrides = {"cores_per_chip": 8} if arch.startswith("8C") else None
    topo = build_topology(parse_arch(arch, overrides))  # raises if disconnected
    assert topo.num_switches > 0
