"""Degrees of freedom of two-source two-sink layered multihop networks.

Modules
-------
network   layered networks, the file format, pattern words
classify  sum-DoF classification (exact values or brackets)
bounds    outer-bound inequalities and the exact LP
synth     linear schemes over symbol extensions and their verification
sim       finite-SNR rates and high-SNR slope estimates
flow      max-flow routing for wired networks
cli       command-line front end
"""

__version__ = "0.1.0"

from .bounds import DofInequality, max_sum_dof, upper_bound
from .classify import DofBracket, DofValue, classify_general, classify_two_relay, is_case_c
from .flow import WiredGraph, max_flow_routing, verify_routing
from .network import (
    LayeredNetwork,
    NetworkFormatError,
    canonicalize,
    generic_min_cut,
    make_network,
    network_from_word,
    parse_network,
    pattern_word,
    serialize_network,
)
from .sim import estimate_dof, simulate_rate
from .synth import ChannelRealization, LinearScheme, synthesize, verify_scheme

__all__ = [
    "__version__",
    "DofInequality",
    "max_sum_dof",
    "upper_bound",
    "DofBracket",
    "DofValue",
    "classify_general",
    "classify_two_relay",
    "is_case_c",
    "WiredGraph",
    "max_flow_routing",
    "verify_routing",
    "LayeredNetwork",
    "NetworkFormatError",
    "canonicalize",
    "generic_min_cut",
    "make_network",
    "network_from_word",
    "parse_network",
    "pattern_word",
    "serialize_network",
    "estimate_dof",
    "simulate_rate",
    "ChannelRealization",
    "LinearScheme",
    "synthesize",
    "verify_scheme",
]
