"""Workload generation: uniform random synthetic traffic and trace replay.

Trace format: one record per line, whitespace- or comma-separated::

    <inject_cycle> <src_core> <dst> <length_flits>

``dst`` is either a core index or ``M<j>`` for a memory reference; ``#``
starts a comment. Records must be sorted by inject cycle. A chip-replication
option maps a single-chip trace onto every chip of a multichip target with
memory references spread round-robin over the shared stacks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .topology import Topology


class TrafficError(ValueError):
    pass


class TrafficPattern(Enum):
    UNIFORM_RANDOM = "uniform_random"
    TRACE_REPLAY = "trace_replay"


class PacketClass(Enum):
    CORE_TO_CORE = "core_to_core"
    CORE_TO_MEMORY = "core_to_memory"
    MEMORY_TO_CORE = "memory_to_core"


@dataclass(frozen=True)
class TrafficSpec:
    pattern: TrafficPattern = TrafficPattern.UNIFORM_RANDOM
    injection_load: float = 0.1  # flits/core/cycle
    p_mem: float = 0.2
    trace_path: str | None = None
    replicate_chips: bool = False
    mem_replies: bool = False
    seed: int = 1

    def __post_init__(self) -> None:
        if self.pattern is TrafficPattern.UNIFORM_RANDOM:
            if not 0.0 < self.injection_load <= 1.0:
                raise TrafficError(
                    f"injection_load must be in (0, 1], got {self.injection_load}"
                )
            if not 0.0 <= self.p_mem <= 1.0:
                raise TrafficError(f"p_mem must be in [0, 1], got {self.p_mem}")
        elif self.trace_path is None:
            raise TrafficError("trace replay needs a trace_path")


@dataclass(frozen=True)
class TraceRecord:
    inject_cycle: int
    src: int  # core index in the trace's own core space
    dst: int | str  # core index or "M<j>"
    length_flits: int


@dataclass(frozen=True)
class Injection:
    src: int  # endpoint id
    dst: int  # endpoint id
    length: int
    klass: PacketClass


def load_trace(path: str | Path) -> list[TraceRecord]:
    """Parse and validate a trace file; errors name the offending line."""
    records: list[TraceRecord] = []
    last_cycle = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 4:
                raise TrafficError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                cycle = int(parts[0])
                src = int(parts[1])
                dst: int | str = parts[2] if parts[2].startswith("M") else int(parts[2])
                length = int(parts[3])
            except ValueError as exc:
                raise TrafficError(f"{path}:{lineno}: {exc}") from exc
            if isinstance(dst, str):
                try:
                    int(dst[1:])
                except ValueError:
                    raise TrafficError(
                        f"{path}:{lineno}: bad memory reference {dst!r}"
                    ) from None
            if cycle < last_cycle:
                raise TrafficError(f"{path}:{lineno}: records not sorted by cycle")
            if length < 1:
                raise TrafficError(f"{path}:{lineno}: length_flits must be >= 1")
            if src < 0:
                raise TrafficError(f"{path}:{lineno}: negative src core id")
            last_cycle = cycle
            records.append(TraceRecord(cycle, src, dst, length))
    return records


class UniformRandomGenerator:
    """Per-core Bernoulli injectors, flit-normalized.

    Each core injects a full packet with per-cycle probability
    ``load / packet_flits`` so the offered load in flits/core/cycle equals
    the configured injection load. Destinations: with probability ``p_mem``
    a uniform memory channel, otherwise a uniform core other than the source.
    RNG substreams are split per core so the sequence is independent of
    evaluation order.
    """

    def __init__(self, spec: TrafficSpec, topo: Topology):
        self.spec = spec
        self.topo = topo
        cfg = topo.config
        self.p_inject = spec.injection_load / cfg.packet_flits
        self.length = cfg.packet_flits
        self.cores = topo.core_ids
        self.channels = topo.mem_channel_ids
        self.p_mem = spec.p_mem if self.channels else 0.0
        self._rngs = [
            random.Random((spec.seed * 0x9E3779B1 + i * 0x85EBCA77) & 0xFFFFFFFF)
            for i in range(len(self.cores))
        ]

    def step(self, cycle: int) -> list[Injection]:
        out: list[Injection] = []
        for i, src in enumerate(self.cores):
            rng = self._rngs[i]
            if rng.random() >= self.p_inject:
                continue
            if self.p_mem and rng.random() < self.p_mem:
                dst = self.channels[rng.randrange(len(self.channels))]
                out.append(Injection(src, dst, self.length, PacketClass.CORE_TO_MEMORY))
            else:
                j = rng.randrange(len(self.cores) - 1)
                if j >= i:
                    j += 1
                out.append(
                    Injection(src, self.cores[j], self.length, PacketClass.CORE_TO_CORE)
                )
        return out


class TraceReplayGenerator:
    """Replays validated trace records against a concrete topology."""

    def __init__(self, spec: TrafficSpec, topo: Topology):
        self.topo = topo
        records = load_trace(spec.trace_path)
        cfg = topo.config
        n = cfg.cores_per_chip
        channels = topo.mem_channel_ids
        self._schedule: dict[int, list[Injection]] = {}

        def map_record(rec: TraceRecord, chip: int) -> Injection:
            src_idx = chip * n + rec.src
            if src_idx >= len(topo.core_ids):
                raise TrafficError(f"trace src {rec.src} out of range for target")
            src = topo.core_ids[src_idx]
            if isinstance(rec.dst, str):
                if not channels:
                    raise TrafficError("trace has memory references but target has no stacks")
                j = int(rec.dst[1:])
                dst = channels[(j + chip) % len(channels)]
                klass = PacketClass.CORE_TO_MEMORY
            else:
                dst_idx = chip * n + rec.dst if spec.replicate_chips else rec.dst
                if dst_idx >= len(topo.core_ids):
                    raise TrafficError(f"trace dst {rec.dst} out of range for target")
                dst = topo.core_ids[dst_idx]
                klass = PacketClass.CORE_TO_CORE
            if src == dst:
                raise TrafficError("trace contains a self-addressed record")
            return Injection(src, dst, rec.length_flits, klass)

        chips = range(cfg.num_chips) if spec.replicate_chips else (0,)
        for rec in records:
            for chip in chips:
                if not spec.replicate_chips and rec.src >= len(topo.core_ids):
                    raise TrafficError(f"trace src {rec.src} out of range for target")
                inj = map_record(rec, chip) if spec.replicate_chips else map_record(rec, 0)
                self._schedule.setdefault(rec.inject_cycle, []).append(inj)
        self.num_records = sum(len(v) for v in self._schedule.values())

    def step(self, cycle: int) -> list[Injection]:
        return self._schedule.get(cycle, [])


def make_generator(spec: TrafficSpec, topo: Topology):
    if spec.pattern is TrafficPattern.UNIFORM_RANDOM:
        return UniformRandomGenerator(spec, topo)
    return TraceReplayGenerator(spec, topo)
