"""Parameter priors for random two-level networks and the per-trial random streams."""
from dataclasses import dataclass

import numpy as np

from networks.model import Network, NetworkKind


@dataclass(frozen=True)
class PriorSpec:
    """Gaussian(sigma) weights for sigmoid networks, Dirichlet(phi) link probabilities for noisy-OR."""

    family: str
    value: float

    def __post_init__(self):
        self.validate_parameters()

    def validate_parameters(self):
        if self.family not in ("gaussian", "dirichlet"):
            raise ValueError(f"Unknown prior family {self.family!r}; expected 'gaussian' or 'dirichlet'")
        if not np.isfinite(self.value) or self.value <= 0:
            raise ValueError(f"Prior parameter must be a positive real, got {self.value}")

    @classmethod
    def parse(cls, text: str) -> "PriorSpec":
        """Parses 'gaussian:<sigma>' or 'dirichlet:<phi>'."""
        family, sep, value = text.partition(":")
        if not sep:
            raise ValueError(f"Prior must look like 'gaussian:<sigma>' or 'dirichlet:<phi>', got {text!r}")
        try:
            number = float(value)
        except ValueError:
            raise ValueError(f"Prior parameter {value!r} is not a number") from None
        return cls(family.strip().lower(), number)

    @property
    def kind(self) -> NetworkKind:
        return NetworkKind.SIGMOID if self.family == "gaussian" else NetworkKind.NOISY_OR

    def check_kind(self, kind):
        if NetworkKind.parse(kind) is not self.kind:
            raise ValueError(f"A {self.family} prior applies to {self.kind.value} networks only")

    def __str__(self):
        return f"{self.family}:{self.value:g}"


def sample_parameters(prior: PriorSpec, shape, rng: np.random.Generator):
    """
    Weight matrix of the given shape plus L2 priors, all set to 1/2.

    Dirichlet weights are theta = -log(1 - q) = -log(u)/phi, computed
    directly so that q close to 1 does not lose precision.
    """
    if prior.family == "gaussian":
        theta = rng.normal(0.0, prior.value, size=shape)
    else:
        u = 1.0 - rng.random(shape)
        theta = -np.log(u) / prior.value
    return theta, np.full(shape[1], 0.5)


def complete_bipartite(kind, theta, l2_priors, leak=None) -> Network:
    """n1 x m complete bipartite network; L2 ids 0..m-1, L1 ids m..m+n1-1."""
    return Network.bipartite(kind, theta, l2_priors, leak=leak)


def trial_rng(base_seed: int, cell: int, trial: int) -> np.random.Generator:
    """Independent PCG64 stream for each (base seed, cell, trial) triple."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(base_seed), int(cell), int(trial)])))
