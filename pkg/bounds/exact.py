"""Brute-force inference on small networks, used as ground truth for the bounds."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, logsumexp, xlogy

from networks.model import NEG_INF, Evidence, Network, NetworkKind, ancestral_samples
from .base import BoundError

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_CAP = 25
CHUNK_BITS = 16


class EnumerationLimitError(ValueError):
    """Raised when exact enumeration would exceed the configured cap."""


class ZeroProbabilityError(BoundError):
    """Raised when a posterior is requested for evidence of probability zero."""


@dataclass(frozen=True)
class MarginalResult:
    log_marginal: float
    enumerated_states: int


def bit_chunks(width: int, chunk_bits: int = CHUNK_BITS):
    """Yields all 2^width bit patterns as int8 arrays of shape (chunk, width), in counting order."""
    total = 1 << width
    step = 1 << min(width, chunk_bits)
    shifts = np.arange(width, dtype=np.int64)
    for start in range(0, total, step):
        codes = np.arange(start, min(start + step, total), dtype=np.int64)
        yield ((codes[:, None] >> shifts) & 1).astype(np.int8)


def _hidden_nodes(net: Network, ev: Evidence, order: Optional[Sequence[int]], cap: int):
    ev.check(net)
    hidden = ev.hidden(net)
    if order is not None:
        if sorted(order) != sorted(hidden):
            raise ValueError("Enumeration order must be a permutation of the unassigned nodes")
        hidden = tuple(order)
    if len(hidden) > cap:
        raise EnumerationLimitError(
            f"{len(hidden)} unassigned nodes exceed the enumeration cap of {cap}; use the bounds instead"
        )
    return list(hidden)


def _completions(net: Network, ev: Evidence, hidden):
    base = np.zeros(net.n, dtype=np.int8)
    for node, bit in ev.assignments.items():
        base[node] = bit
    for bits in bit_chunks(len(hidden)):
        states = np.tile(base, (len(bits), 1))
        states[:, hidden] = bits
        yield states, bits


def exact_log_marginal(
    net: Network, ev: Evidence, cap: int = DEFAULT_ENUMERATION_CAP, order: Optional[Sequence[int]] = None
) -> MarginalResult:
    hidden = _hidden_nodes(net, ev, order, cap)
    acc = NEG_INF
    with np.errstate(divide="ignore", invalid="ignore"):
        for states, _ in _completions(net, ev, hidden):
            acc = np.logaddexp(acc, logsumexp(net.log_prob_batch(states)))
    return MarginalResult(log_marginal=min(float(acc), 0.0), enumerated_states=1 << len(hidden))


def posterior_marginals(net: Network, ev: Evidence, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """P(S_j = 1 | ev) for every unassigned node, in ascending node order."""
    hidden = _hidden_nodes(net, ev, None, cap)
    total = NEG_INF
    on = np.full(len(hidden), NEG_INF)
    with np.errstate(divide="ignore", invalid="ignore"):
        for states, bits in _completions(net, ev, hidden):
            lp = net.log_prob_batch(states)
            total = np.logaddexp(total, logsumexp(lp))
            if hidden:
                spread = np.broadcast_to(lp[:, None], bits.shape)
                on = np.logaddexp(on, logsumexp(spread, axis=0, b=bits))
    if total == NEG_INF:
        raise ZeroProbabilityError("Evidence has probability zero; its posterior is undefined")
    return np.clip(np.exp(on - total), 0.0, 1.0)


def _log_q(bits: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return (xlogy(bits, mu) + xlogy(1 - bits, 1.0 - mu)).sum(axis=1)


def kl_q_to_posterior(mu, net: Network, ev: Evidence, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """KL(Q || P(hidden | ev)) for the factorized Q with means ``mu`` over the unassigned nodes."""
    hidden = _hidden_nodes(net, ev, None, cap)
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    if mu.shape != (len(hidden),):
        raise ValueError(f"Expected {len(hidden)} mean-field parameters, got shape {mu.shape}")
    if np.any((mu < 0) | (mu > 1)):
        raise ValueError("Mean-field parameters must lie in [0, 1]")
    log_z = exact_log_marginal(net, ev, cap).log_marginal
    if log_z == NEG_INF:
        raise ZeroProbabilityError("Evidence has probability zero; KL to the posterior is undefined")
    kl = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for states, bits in _completions(net, ev, hidden):
            log_q = _log_q(bits, mu)
            support = log_q > NEG_INF
            if not np.any(support):
                continue
            log_post = net.log_prob_batch(states[support]) - log_z
            if np.any(log_post == NEG_INF):
                return float("inf")
            kl += float(np.sum(np.exp(log_q[support]) * (log_q[support] - log_post)))
    return max(kl, 0.0)


def _conditional_of(net: Network, node: int, parent_bits: np.ndarray, bit: int) -> np.ndarray:
    pa = list(net.parents[node])
    z = parent_bits @ net.weights[node, pa]
    on = expit(z) if net.kind is NetworkKind.SIGMOID else -np.expm1(-z)
    return on if bit == 1 else 1.0 - on


def sigma_std(
    net: Network,
    ev: Evidence,
    mode: str = "exact",
    samples: int = 100_000,
    rng: Optional[np.random.Generator] = None,
    fan_in_cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """
    Largest standard deviation, over L1 nodes, of P(S_i | pa[i]) with S_i fixed to its
    evidence bit, the variance taken under the prior over the L2 layer.
    """
    ev.check(net, require_l1=True)
    if mode not in ("exact", "monte_carlo"):
        raise ValueError("mode must be 'exact' or 'monte_carlo'")

    worst = 0.0
    if mode == "exact":
        for node in net.l1:
            pa = list(net.parents[node])
            if not pa:
                continue
            if len(pa) > fan_in_cap:
                raise EnumerationLimitError(
                    f"Node {node} has fan-in {len(pa)} above the exact sigma_std cap {fan_in_cap}"
                )
            p = net.prior[pa]
            first = second = 0.0
            for bits in bit_chunks(len(pa)):
                w = np.exp(_log_q(bits, p))
                c = _conditional_of(net, node, bits, ev.assignments[node])
                first += float(w @ c)
                second += float(w @ (c * c))
            worst = max(worst, np.sqrt(max(second - first * first, 0.0)))
    else:
        rng = rng if rng is not None else np.random.default_rng()
        states = ancestral_samples(net, rng, samples)
        for node in net.l1:
            pa = list(net.parents[node])
            if not pa:
                continue
            c = _conditional_of(net, node, states[:, pa].astype(float), ev.assignments[node])
            worst = max(worst, float(np.std(c)))
    return float(min(worst, 0.5))
