"""Simulator for symbol-synchronous flooding with pulse-based OOK."""

from .core import ConfigError, SimConfig, Waveform, dbm_to_watts, validate_config, watts_to_dbm
from .engine import PacketTrace, run_packet, run_trials
from .topology import Topology, build_grid, hop_count, pairwise_distance

__all__ = [
    "ConfigError",
    "PacketTrace",
    "SimConfig",
    "Topology",
    "Waveform",
    "build_grid",
    "dbm_to_watts",
    "hop_count",
    "pairwise_distance",
    "run_packet",
    "run_trials",
    "validate_config",
    "watts_to_dbm",
]
