"""Fluid-flow BitTorrent broadcast simulator."""

from .choke import ChokeState, choke_round
from .config import SwarmConfig, TransferLedger
from .engine import SimulationError, run_broadcast
from .peers import peer_graph, select_peer_set
from .pieces import NotInterested, select_fragment
from .rates import FlowRates, max_min_rates, recompute_rates

__all__ = [
    "ChokeState",
    "FlowRates",
    "NotInterested",
    "SimulationError",
    "SwarmConfig",
    "TransferLedger",
    "choke_round",
    "max_min_rates",
    "peer_graph",
    "recompute_rates",
    "run_broadcast",
    "select_fragment",
    "select_peer_set",
]
