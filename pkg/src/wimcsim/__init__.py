"""Cycle-accurate simulator for multichip 2.5D packages with wireless,
interposer, and substrate interconnect fabrics."""

from .config import (
    Fabric,
    LinkKind,
    LinkParams,
    SystemConfig,
    EnergyParams,
    RunParams,
    parse_arch,
    load_config_file,
)
from .topology import Topology, build_topology, place_wis
from .routing import (
    EdgeWeighting,
    ForwardingTable,
    RoutingMode,
    WeightMode,
    compute_tables,
    check_deadlock_freedom,
)
from .traffic import TrafficSpec, TrafficPattern, TraceRecord, load_trace
from .energy import EnergyLedger
from .engine import Simulator, MetricsReport, DeadlockError, run, saturation_sweep

__version__ = "0.1.0"

__all__ = [
    "Fabric",
    "LinkKind",
    "LinkParams",
    "SystemConfig",
    "EnergyParams",
    "RunParams",
    "parse_arch",
    "load_config_file",
    "Topology",
    "build_topology",
    "place_wis",
    "EdgeWeighting",
    "ForwardingTable",
    "RoutingMode",
    "WeightMode",
    "compute_tables",
    "check_deadlock_freedom",
    "TrafficSpec",
    "TrafficPattern",
    "TraceRecord",
    "load_trace",
    "EnergyLedger",
    "Simulator",
    "MetricsReport",
    "DeadlockError",
    "run",
    "saturation_sweep",
]
