from .model import (
    NEG_INF,
    Evidence,
    Network,
    NetworkKind,
    NetworkValidationError,
    ancestral_sample,
    ancestral_samples,
    cond_log_prob,
    evidence_patterns,
    joint_log_prob,
)
from .io import NetworkFormatError, load_network, save_network

__all__ = [
    "NEG_INF",
    "Evidence",
    "Network",
    "NetworkKind",
    "NetworkValidationError",
    "NetworkFormatError",
    "ancestral_sample",
    "ancestral_samples",
    "cond_log_prob",
    "evidence_patterns",
    "joint_log_prob",
    "load_network",
    "save_network",
]
