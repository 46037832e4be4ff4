from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from networks.model import Evidence, Network


class BoundError(ValueError):
    """Raised when a bound cannot be applied to the given network or parameters."""


@dataclass
class BoundOptions:
    """Coordinate-descent settings for the upper bounds."""

    tol: float = 1e-8
    max_sweeps: int = 200
    xi_max: float = 1e6
    trace: bool = False
    use_legendre: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("Tolerance must be positive")
        if not isinstance(self.max_sweeps, int) or self.max_sweeps <= 0:
            raise ValueError("max_sweeps must be a positive integer")
        if self.xi_max <= 0:
            raise ValueError("xi_max must be positive")


@dataclass
class LowerBoundOpts:
    """
    Mean-field settings.

    sigmoid_expectation_mode: 'exact' enumerates each node's parent
    configurations, 'aux' uses the auxiliary log(1+e^z) bound.
    expansion_tail adds the certified remainder of the truncated noisy-OR
    expansion; without it the truncated expression is only an approximation.
    """

    sigmoid_expectation_mode: str = "exact"
    expansion_terms: int = 16
    use_quadratic: bool = False
    expansion_tail: bool = True
    tol: float = 1e-8
    max_sweeps: int = 200
    fan_in_cap: int = 20
    trace: bool = False

    def __post_init__(self):
        if self.sigmoid_expectation_mode not in ("exact", "aux"):
            raise ValueError("sigmoid_expectation_mode must be 'exact' or 'aux'")
        if not isinstance(self.expansion_terms, int) or self.expansion_terms < 1:
            raise ValueError("expansion_terms must be an integer >= 1")
        if self.tol <= 0:
            raise ValueError("Tolerance must be positive")
        if not isinstance(self.max_sweeps, int) or self.max_sweeps <= 0:
            raise ValueError("max_sweeps must be a positive integer")


@dataclass
class VariationalState:
    xi: np.ndarray
    lam: Optional[np.ndarray] = None


@dataclass
class UpperBoundResult:
    log_bound: float
    sweeps: int
    converged: bool
    final_state: VariationalState
    trace: List[Tuple[int, str, float]] = field(default_factory=list)
    degenerate: bool = False
    xi_cap_hit: bool = False


@dataclass
class MeanFieldState:
    """Factorized Q: one Bernoulli mean per unassigned node, in ascending node order."""

    hidden: Tuple[int, ...]
    mu: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.mu.shape != (len(self.hidden),):
            raise ValueError(f"Expected {len(self.hidden)} means, got shape {self.mu.shape}")
        if np.any(~((self.mu >= 0) & (self.mu <= 1))):
            raise ValueError("Mean-field parameters must lie in [0, 1]")


@dataclass
class LowerBoundResult:
    log_bound: float
    sweeps: int
    converged: bool
    final_mu: MeanFieldState
    trace: List[Tuple[int, float]] = field(default_factory=list)


class BaseBound(ABC):
    def __init__(self, net: Network, evidence: Evidence):
        self.name = "Base Bound"
        self.net = net
        self.evidence = evidence

    @abstractmethod
    def evaluate(self, *params) -> float:
        pass

    @abstractmethod
    def optimize(self):
        pass
