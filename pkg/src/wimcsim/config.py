"""System configuration: architecture naming, defaults, and config files.

Architectures are named ``<X>C<Y>M:<fabric>`` where X is the number of
multicore processor chips, Y the number of in-package memory stacks, and
fabric one of ``substrate``, ``interposer``, ``wireless``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any


class ConfigError(ValueError):
    """Raised for malformed architecture names or invalid overrides."""


class Fabric(Enum):
    SUBSTRATE = "substrate"
    INTERPOSER = "interposer"
    WIRELESS = "wireless"


class LinkKind(Enum):
    MESH_WIRE = "mesh_wire"
    INTERPOSER_WIRE = "interposer_wire"
    SERIAL_IO = "serial_io"
    WIDE_IO = "wide_io"
    WIRELESS = "wireless"


@dataclass(frozen=True)
class LinkParams:
    """Per-link-kind physical parameters."""

    bandwidth_gbps: float
    energy_pj_per_bit: float


# Wired/wireless I/O constants: mesh wires are 32-bit single-cycle links at
# the 2.5 GHz system clock (80 Gbps), the serial chip-to-chip I/O runs at
# 15 Gbps / 5 pJ/bit, the 128-bit wide memory I/O at 128 Gbps / 6.5 pJ/bit,
# and the mm-wave transceiver sustains 16 Gbps at 2.3 pJ/bit.
DEFAULT_LINK_PARAMS: dict[LinkKind, LinkParams] = {
    LinkKind.MESH_WIRE: LinkParams(80.0, 0.45),
    LinkKind.INTERPOSER_WIRE: LinkParams(80.0, 0.45),
    LinkKind.SERIAL_IO: LinkParams(15.0, 5.0),
    LinkKind.WIDE_IO: LinkParams(128.0, 6.5),
    LinkKind.WIRELESS: LinkParams(16.0, 2.3),
}


@dataclass
class EnergyParams:
    """Per-bit energy rates used by the accounting ledger.

    The I/O and wireless rates come from published transceiver figures; the
    switch and mesh-wire rates are representative 65 nm values and are
    configuration knobs, not ground truth.
    """

    wireless_pj_per_bit: float = 2.3
    wideio_pj_per_bit: float = 6.5
    serialio_pj_per_bit: float = 5.0
    mesh_wire_pj_per_bit: float = 0.45
    interposer_wire_pj_per_bit: float = 0.45
    switch_dynamic_pj_per_bit: float = 0.98
    switch_static_pw: float = 0.0
    wi_sleep_pw: float = 0.0

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ConfigError(f"energy rate {name} must be >= 0, got {value}")

    def link_rate(self, kind: LinkKind) -> float:
        return {
            LinkKind.MESH_WIRE: self.mesh_wire_pj_per_bit,
            LinkKind.INTERPOSER_WIRE: self.interposer_wire_pj_per_bit,
            LinkKind.SERIAL_IO: self.serialio_pj_per_bit,
            LinkKind.WIDE_IO: self.wideio_pj_per_bit,
            LinkKind.WIRELESS: self.wireless_pj_per_bit,
        }[kind]


@dataclass
class RunParams:
    """Cycle budget for one simulation: warmup transients are discarded."""

    total_cycles: int = 10_000
    warmup_cycles: int = 1_000
    drain: bool = False
    deadlock_threshold: int = 5_000
    debug_checks: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.warmup_cycles < self.total_cycles:
            raise ConfigError(
                f"warmup_cycles ({self.warmup_cycles}) must be < total_cycles "
                f"({self.total_cycles})"
            )


@dataclass
class SystemConfig:
    num_chips: int = 4
    num_memories: int = 4
    fabric: Fabric = Fabric.WIRELESS
    cores_per_chip: int = 16
    wi_density: int | None = None  # cores per WI; defaults to one WI per chip
    chip_edge_mm: float = 10.0
    flit_bits: int = 32
    packet_flits: int = 64
    vcs_per_port: int = 8
    vc_depth_flits: int = 16
    clock_ghz: float = 2.5
    mem_layers: int = 4
    mem_channels: int = 4
    control_packet_cycles: int = 5
    link_params: dict[LinkKind, LinkParams] = field(
        default_factory=lambda: dict(DEFAULT_LINK_PARAMS)
    )
    seed: int = 1

    def __post_init__(self) -> None:
        if self.wi_density is None:
            self.wi_density = self.cores_per_chip
        self.validate()

    def validate(self) -> None:
        if self.num_chips < 1:
            raise ConfigError("num_chips must be >= 1")
        if self.num_memories < 0:
            raise ConfigError("num_memories must be >= 0")
        if self.cores_per_chip < 1:
            raise ConfigError("cores_per_chip must be >= 1")
        if self.wi_density < 1 or self.cores_per_chip % self.wi_density != 0:
            raise ConfigError(
                f"wi_density ({self.wi_density}) must divide cores_per_chip "
                f"({self.cores_per_chip})"
            )
        if self.vcs_per_port < 1:
            raise ConfigError("vcs_per_port must be >= 1")
        if self.vc_depth_flits < 1:
            raise ConfigError("vc_depth_flits must be >= 1")
        if self.packet_flits < 1:
            raise ConfigError("packet_flits must be >= 1")
        if self.flit_bits < 1:
            raise ConfigError("flit_bits must be >= 1")
        if self.clock_ghz <= 0:
            raise ConfigError("clock_ghz must be > 0")
        r, c = mesh_dims(self.cores_per_chip)
        if r * c != self.cores_per_chip:
            raise ConfigError(f"cores_per_chip {self.cores_per_chip} has no mesh layout")

    def link_cycles(self, kind: LinkKind) -> int:
        """Flit traversal cycles: ceil(flit_bits / bits-per-cycle)."""
        bits_per_cycle = self.link_params[kind].bandwidth_gbps / self.clock_ghz
        return max(1, math.ceil(self.flit_bits / bits_per_cycle))

    @property
    def flit_airtime(self) -> int:
        return self.link_cycles(LinkKind.WIRELESS)

    @property
    def total_cores(self) -> int:
        return self.num_chips * self.cores_per_chip

    @property
    def wis_per_chip(self) -> int:
        return self.cores_per_chip // self.wi_density

    @property
    def total_wis(self) -> int:
        return self.num_chips * self.wis_per_chip + self.num_memories


def mesh_dims(n: int) -> tuple[int, int]:
    """Mesh rows x cols for n switches: the most square factorization.

    Perfect squares give square meshes; other counts (e.g. 8 cores per chip
    in an 8-chip / 64-core system) fall back to the nearest rectangle.
    """
    r = int(math.isqrt(n))
    while r > 1 and n % r != 0:
        r -= 1
    return r, n // r


_ARCH_RE = re.compile(r"^(\d+)C(\d+)M:(substrate|interposer|wireless)$", re.IGNORECASE)

_OVERRIDE_FIELDS = {
    "num_chips",
    "num_memories",
    "cores_per_chip",
    "wi_density",
    "chip_edge_mm",
    "flit_bits",
    "packet_flits",
    "vcs_per_port",
    "vc_depth_flits",
    "clock_ghz",
    "mem_layers",
    "mem_channels",
    "control_packet_cycles",
    "seed",
}


def parse_arch(name: str, overrides: dict[str, Any] | None = None) -> SystemConfig:
    """Build a fully defaulted SystemConfig from an ``XCYM:fabric`` name.

    Overrides replace defaults field-wise; unknown keys and invariant
    violations raise ConfigError.
    """
    m = _ARCH_RE.match(name.strip())
    if not m:
        raise ConfigError(
            f"malformed architecture name {name!r}; expected '<X>C<Y>M:<fabric>'"
        )
    x, y = int(m.group(1)), int(m.group(2))
    if x < 1:
        raise ConfigError("architecture needs at least one chip")
    fabric = Fabric(m.group(3).lower())

    fields: dict[str, Any] = {"num_chips": x, "num_memories": y, "fabric": fabric}
    overrides = dict(overrides or {})
    link_params = dict(DEFAULT_LINK_PARAMS)
    if "link_params" in overrides:
        for kind_name, params in overrides.pop("link_params").items():
            kind = LinkKind(kind_name) if not isinstance(kind_name, LinkKind) else kind_name
            if isinstance(params, dict):
                params = LinkParams(**params)
            link_params[kind] = params
    for key, value in overrides.items():
        if key not in _OVERRIDE_FIELDS:
            raise ConfigError(f"unknown override key {key!r}")
        fields[key] = value
    fields["link_params"] = link_params
    try:
        return SystemConfig(**fields)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path: str) -> dict[str, Any]:
    """Load and structurally validate a JSON experiment config file.

    Schema (all blocks optional except ``arch``)::

        {
          "arch": "4C4M:wireless",
          "overrides": {"cores_per_chip": 16, ...},
          "link_params": {"serial_io": {"bandwidth_gbps": 15, "energy_pj_per_bit": 5.0}},
          "energy": {"switch_dynamic_pj_per_bit": 0.98, ...},
          "traffic": {"pattern": "uniform_random", "injection_load": 0.1,
                      "p_mem": 0.2, "trace_path": null, "replicate_chips": false,
                      "mem_replies": false},
          "run": {"total_cycles": 10000, "warmup_cycles": 1000},
          "routing": {"mode": "single_tree", "weighting": "hop_count"},
          "experiment": {"type": "fabric-compare", "loads": [...], "seeds": [...]}
        }
    """
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "arch" not in raw:
        raise ConfigError(f"{path}: missing required key 'arch'")
    return raw


def config_from_spec(raw: dict[str, Any]) -> SystemConfig:
    """Expand a loaded config-file dict into a SystemConfig."""
    overrides = dict(raw.get("overrides", {}))
    if "link_params" in raw:
        overrides["link_params"] = raw["link_params"]
    return parse_arch(raw["arch"], overrides)


def energy_from_spec(raw: dict[str, Any]) -> EnergyParams:
    block = raw.get("energy", {})
    unknown = set(block) - set(vars(EnergyParams()))
    if unknown:
        raise ConfigError(f"unknown energy keys: {sorted(unknown)}")
    return EnergyParams(**block)


def with_fabric(config: SystemConfig, fabric: Fabric) -> SystemConfig:
    """Copy of a config with a different interconnect fabric."""
    return replace(config, fabric=fabric, link_params=dict(config.link_params))
