"""Surface-code long-distance entanglement on a 2D quantum network: simulation and analysis."""
from .analysis import (
    FidelityReport,
    SimConfig,
    ThresholdFit,
    TrialBatch,
    entanglement_rate,
    estimate_logical_error_rate,
    estimate_threshold,
    final_state_noise,
    fit_threshold_line,
    long_chain_error,
    operational_threshold,
)
from .decoder import MatchingGraph, Pairing, brute_force_matching, build_matching_graph, logical_outcome, mwpm
from .faults import enumerate_fault_classes
from .noise import EffectiveRates, ErrorHistory, PhysicalNoise, channel_only_rates, full_rates, sample_round_errors
from .protocol import DetectionEventSet, SyndromeHistory, detection_events, run_protocol
from .topology import Network, NodeColor, NodeCoord, build_network, build_torus_block, dual_sector

__version__ = "0.1.0"
