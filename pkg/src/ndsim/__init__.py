"""Discrete-event simulator and verifier for secure neighbor discovery under relay attacks."""

from .engine import Session, Simulator, Trace, causal_chain, simulate
from .model import (
    SPEED_OF_LIGHT,
    ChannelParams,
    LinkSchedule,
    NlosMap,
    NodeSpec,
    Obstacle,
    Position,
    Role,
    WorldConfig,
    build_schedule_from_geometry,
    distance,
    link_up_over,
    propagation_delay,
)
from .protocols import Protocol, ProtocolConfig
from .scenario import Scenario, load_scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT",
    "ChannelParams",
    "LinkSchedule",
    "NlosMap",
    "NodeSpec",
    "Obstacle",
    "Position",
    "Protocol",
    "ProtocolConfig",
    "Role",
    "Scenario",
    "Session",
    "Simulator",
    "Trace",
    "WorldConfig",
    "build_schedule_from_geometry",
    "causal_chain",
    "distance",
    "link_up_over",
    "load_scenario",
    "propagation_delay",
    "run_scenario",
    "simulate",
]
