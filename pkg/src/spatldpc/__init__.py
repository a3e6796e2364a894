"""5G NR LDPC rate matching, message-passing decoding and SPAT puncturing-pattern search."""

from .channel import llr, modulate, snr_db_to_sigma2, transmit, trial_rng
from .decoder import DecoderConfig, build_graph, decode, hard_decide
from .ldpc import ParityCheckMatrix, build_encoder, encode, lift, load_base_graph, syndrome
from .optimizer import SpatConfig, objective, spat_optimize
from .ratematch import (
    PuncturingPattern,
    baseline_first_n_pattern,
    default_pattern,
    rate_match,
    read_pattern,
    write_pattern,
)
from .simulate import TrialBudget, bce, bce_vs_iterations, link_for, simulate_point, snr_operating_point, sweep

__version__ = "0.1.0"

__all__ = [
    "DecoderConfig", "ParityCheckMatrix", "PuncturingPattern", "SpatConfig", "TrialBudget",
    "baseline_first_n_pattern", "bce", "bce_vs_iterations", "build_encoder", "build_graph",
    "decode", "default_pattern", "encode", "hard_decide", "lift", "link_for", "llr",
    "load_base_graph", "modulate", "objective", "rate_match", "read_pattern",
    "simulate_point", "snr_db_to_sigma2", "snr_operating_point", "spat_optimize", "sweep",
    "syndrome", "transmit", "trial_rng", "write_pattern",
]
