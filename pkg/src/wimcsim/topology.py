"""Topology construction: chip meshes, memory stacks, WI placement, fabrics.

Node id scheme: global contiguous ids, chip switches first (row-major within
each chip), then memory base switches; core endpoints and memory channel
endpoints follow in separate ranges. The ascending WI id order doubles as the
wireless MAC turn sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .config import ConfigError, Fabric, LinkKind, SystemConfig, mesh_dims


class NodeKind(Enum):
    SWITCH = "switch"
    MEM_SWITCH = "mem_switch"
    CORE = "core"
    MEM_CHANNEL = "mem_channel"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    chip: int  # chip index, or stack index for memory nodes
    row: int = -1
    col: int = -1


@dataclass(frozen=True)
class Link:
    id: int
    a: int
    b: int
    kind: LinkKind
    bits_per_cycle: float
    traversal_cycles: int
    energy_pj_per_bit: float


@dataclass(frozen=True)
class MemoryStack:
    id: int
    num_layers: int
    num_channels: int
    base_switch: int
    wi: int | None
    channels: tuple[int, ...]
    side: str  # "left" or "right"


@dataclass
class Topology:
    config: SystemConfig
    nodes: list[Node]
    links: list[Link]
    wi_nodes: list[int]  # switch ids hosting WIs, MAC sequence order
    memory_stacks: list[MemoryStack]
    num_switches: int  # chip switches + memory base switches
    core_ids: list[int]
    mem_channel_ids: list[int]
    endpoint_switch: dict[int, int] = field(default_factory=dict)
    switch_endpoints: dict[int, list[int]] = field(default_factory=dict)
    adjacency: dict[int, list[tuple[int, Link]]] = field(default_factory=dict)

    @property
    def endpoints(self) -> list[int]:
        return self.core_ids + self.mem_channel_ids

    def switch_of(self, endpoint: int) -> int:
        return self.endpoint_switch[endpoint]


def hop_sum(coord: tuple[int, int], rows: int, cols: int) -> int:
    """Total hop distance from a switch to every switch of a rows x cols mesh."""
    r, c = coord
    return cols * sum(abs(r - rr) for rr in range(rows)) + rows * sum(
        abs(c - cc) for cc in range(cols)
    )


def _cluster_dims(rows: int, cols: int, density: int) -> tuple[int, int]:
    """Most-square (a, b) with a*b == density, a | rows, b | cols."""
    best: tuple[int, int] | None = None
    for a in range(1, density + 1):
        if density % a:
            continue
        b = density // a
        if rows % a == 0 and cols % b == 0:
            if best is None or abs(a - b) < abs(best[0] - best[1]):
                best = (a, b)
    if best is None:
        raise ConfigError(
            f"wi_density {density} does not tile a {rows}x{cols} mesh"
        )
    return best


def place_wis(cores_per_chip: int, wi_density: int) -> list[tuple[int, int]]:
    """WI switch coordinates for one chip mesh.

    The mesh is partitioned into contiguous rectangular clusters of
    ``wi_density`` switches; each cluster contributes the member switch with
    the minimum total hop distance to all switches of the chip mesh, ties
    broken by lowest (row, col).
    """
    if wi_density < 1 or cores_per_chip % wi_density:
        raise ConfigError(
            f"wi_density {wi_density} must divide cores_per_chip {cores_per_chip}"
        )
    rows, cols = mesh_dims(cores_per_chip)
    cr, cc = _cluster_dims(rows, cols, wi_density)
    placements = []
    for r0 in range(0, rows, cr):
        for c0 in range(0, cols, cc):
            members = [
                (r, c) for r in range(r0, r0 + cr) for c in range(c0, c0 + cc)
            ]
            placements.append(
                min(members, key=lambda rc: (hop_sum(rc, rows, cols), rc))
            )
    return placements


def _boundary_rows_by_centrality(rows: int) -> list[int]:
    """Row indices of a boundary column ordered centre-out, low row first."""
    centre = (rows - 1) / 2
    return sorted(range(rows), key=lambda r: (abs(r - centre), r))


def build_topology(config: SystemConfig) -> Topology:
    """Expand a SystemConfig into the node/link graph.

    Chips are laid out in a single row; memory stacks split ceil(Y/2) on the
    left of the chip array and the rest on the right. Fabric-specific
    inter-chip and memory links are added on top of the per-chip meshes.
    """
    x, y = config.num_chips, config.num_memories
    n = config.cores_per_chip
    rows, cols = mesh_dims(n)
    fabric = config.fabric

    nodes: list[Node] = []
    links: list[Link] = []

    def sw_id(chip: int, r: int, c: int) -> int:
        return chip * n + r * cols + c

    for chip in range(x):
        for r in range(rows):
            for c in range(cols):
                nodes.append(Node(sw_id(chip, r, c), NodeKind.SWITCH, chip, r, c))

    mem_sw_base = x * n
    for m in range(y):
        nodes.append(Node(mem_sw_base + m, NodeKind.MEM_SWITCH, m))
    num_switches = x * n + y

    core_base = num_switches
    core_ids = []
    for s in range(x * n):
        node = nodes[s]
        cid = core_base + s
        nodes.append(Node(cid, NodeKind.CORE, node.chip, node.row, node.col))
        core_ids.append(cid)

    chan_base = core_base + x * n
    mem_channel_ids = []
    stack_channels: list[tuple[int, ...]] = []
    for m in range(y):
        chans = tuple(chan_base + m * config.mem_channels + k for k in range(config.mem_channels))
        for k, ch in enumerate(chans):
            nodes.append(Node(ch, NodeKind.MEM_CHANNEL, m))
        stack_channels.append(chans)
        mem_channel_ids.extend(chans)

    def add_link(a: int, b: int, kind: LinkKind) -> None:
        params = config.link_params[kind]
        links.append(
            Link(
                len(links),
                a,
                b,
                kind,
                params.bandwidth_gbps / config.clock_ghz,
                config.link_cycles(kind),
                params.energy_pj_per_bit,
            )
        )

    # Per-chip 2D meshes.
    for chip in range(x):
        for r in range(rows):
            for c in range(cols):
                if c + 1 < cols:
                    add_link(sw_id(chip, r, c), sw_id(chip, r, c + 1), LinkKind.MESH_WIRE)
                if r + 1 < rows:
                    add_link(sw_id(chip, r, c), sw_id(chip, r + 1, c), LinkKind.MESH_WIRE)

    # Memory stacks: ceil(Y/2) on the left of the chip row, the rest right.
    n_left = (y + 1) // 2
    sides = ["left"] * n_left + ["right"] * (y - n_left)
    centre_rows = _boundary_rows_by_centrality(rows)
    centre_row = centre_rows[0]

    # WI placement (wireless fabric only).
    wi_nodes: list[int] = []
    if fabric is Fabric.WIRELESS:
        coords = place_wis(n, config.wi_density)
        for chip in range(x):
            wi_nodes.extend(sw_id(chip, r, c) for r, c in coords)
        wi_nodes.extend(mem_sw_base + m for m in range(y))

    # Fabric-specific links.
    if fabric is Fabric.SUBSTRATE:
        for chip in range(x - 1):
            add_link(
                sw_id(chip, centre_row, cols - 1),
                sw_id(chip + 1, centre_row, 0),
                LinkKind.SERIAL_IO,
            )
        for m in range(y):
            row = centre_rows[(m if sides[m] == "left" else m - n_left) % rows]
            if sides[m] == "left":
                add_link(mem_sw_base + m, sw_id(0, row, 0), LinkKind.WIDE_IO)
            else:
                add_link(mem_sw_base + m, sw_id(x - 1, row, cols - 1), LinkKind.WIDE_IO)
    elif fabric is Fabric.INTERPOSER:
        for chip in range(x - 1):
            for r in range(rows):
                add_link(
                    sw_id(chip, r, cols - 1), sw_id(chip + 1, r, 0), LinkKind.INTERPOSER_WIRE
                )
        for m in range(y):
            for r in range(rows):
                if sides[m] == "left":
                    add_link(mem_sw_base + m, sw_id(0, r, 0), LinkKind.INTERPOSER_WIRE)
                else:
                    add_link(mem_sw_base + m, sw_id(x - 1, r, cols - 1), LinkKind.INTERPOSER_WIRE)
    else:  # wireless: clique over WIs, no inter-chip or memory wires
        for i in range(len(wi_nodes)):
            for j in range(i + 1, len(wi_nodes)):
                add_link(wi_nodes[i], wi_nodes[j], LinkKind.WIRELESS)

    memory_stacks = [
        MemoryStack(
            m,
            config.mem_layers,
            config.mem_channels,
            mem_sw_base + m,
            mem_sw_base + m if fabric is Fabric.WIRELESS else None,
            stack_channels[m],
            sides[m],
        )
        for m in range(y)
    ]

    endpoint_switch = {core_base + s: s for s in range(x * n)}
    for m in range(y):
        for ch in stack_channels[m]:
            endpoint_switch[ch] = mem_sw_base + m
    switch_endpoints: dict[int, list[int]] = {s: [] for s in range(num_switches)}
    for ep, sw in endpoint_switch.items():
        switch_endpoints[sw].append(ep)

    adjacency: dict[int, list[tuple[int, Link]]] = {s: [] for s in range(num_switches)}
    for link in links:
        adjacency[link.a].append((link.b, link))
        adjacency[link.b].append((link.a, link))

    topo = Topology(
        config=config,
        nodes=nodes,
        links=links,
        wi_nodes=wi_nodes,
        memory_stacks=memory_stacks,
        num_switches=num_switches,
        core_ids=core_ids,
        mem_channel_ids=mem_channel_ids,
        endpoint_switch=endpoint_switch,
        switch_endpoints=switch_endpoints,
        adjacency=adjacency,
    )
    _check_connected(topo)
    return topo


def _check_connected(topo: Topology) -> None:
    if topo.num_switches == 0:
        return
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v, _ in topo.adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != topo.num_switches:
        missing = sorted(set(range(topo.num_switches)) - seen)
        raise ConfigError(
            f"topology is disconnected; unreachable switches: {missing[:8]}"
        )
