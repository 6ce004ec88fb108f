"""Mutual authentication for body-area sensor networks: a zero-knowledge
challenge/response with a commitment, plus a seeded network simulator,
attack harness and cost model."""

from .crypto import (
    DecryptError,
    IntervalError,
    ParameterError,
    ProtocolParams,
    extract_interval,
    modexp,
    seal,
    unseal,
)
from .protocol import DecodeError, NodeState, SinkState, decode, encode, node_step, sink_step
from .netsim import Scenario, Trace, default_topology, honest_scenario, run
from .adversary import run_attack
from .costmodel import comm_cost, memory_footprint, modmul_cost
from .scenario import ScenarioError, load_scenario

__version__ = "0.1.0"

__all__ = [
    "DecryptError", "IntervalError", "ParameterError", "ProtocolParams", "extract_interval",
    "modexp", "seal", "unseal",
    "DecodeError", "NodeState", "SinkState", "decode", "encode", "node_step", "sink_step",
    "Scenario", "Trace", "default_topology", "honest_scenario", "run",
    "run_attack",
    "comm_cost", "memory_footprint", "modmul_cost",
    "ScenarioError", "load_scenario",
]
