import heapq
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_expit, xlogy

logger = logging.getLogger(__name__)

NEG_INF = float("-inf")


class NetworkValidationError(ValueError):
    """Raised when a network violates one of its structural invariants."""


class NetworkKind(str, Enum):
    SIGMOID = "sigmoid"
    NOISY_OR = "noisy_or"

    @classmethod
    def parse(cls, value) -> "NetworkKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            raise NetworkValidationError(
                f"Unknown network kind {value!r}; expected 'sigmoid' or 'noisy_or'"
            ) from None


class Network:
    """
    Binary belief network with sigmoid or noisy-OR conditionals.

    Nodes are dense integers 0..n-1. Weights are held as a dense matrix with
    ``weights[i, j] = theta_ij`` for the edge j -> i; for noisy-OR networks
    theta_ij = -log(1 - q_ij) in nats. Roots carry a prior P(S_j = 1).
    Instances are immutable once constructed.
    """

    def __init__(
        self,
        kind,
        n: int,
        edges: Iterable[Tuple[int, int, float]],
        root_priors: Mapping[int, float],
        layers: Optional[Tuple[Sequence[int], Sequence[int]]] = None,
    ):
        self.kind = NetworkKind.parse(kind)
        edges = [(int(c), int(p), float(t)) for c, p, t in edges]
        root_priors = {int(k): float(v) for k, v in root_priors.items()}
        self.validate_parameters(n, edges, root_priors)

        self.n = int(n)
        weights = np.zeros((self.n, self.n))
        adjacency = np.zeros((self.n, self.n), dtype=bool)
        parents = [[] for _ in range(self.n)]
        children = [[] for _ in range(self.n)]
        for child, parent, theta in sorted(edges):
            weights[child, parent] = theta
            adjacency[child, parent] = True
            parents[child].append(parent)
            children[parent].append(child)

        self.parents = tuple(tuple(p) for p in parents)
        self.children = tuple(tuple(c) for c in children)
        self.weights = weights
        self.adjacency = adjacency
        self.is_root = np.array([len(p) == 0 for p in self.parents], dtype=bool)

        missing = [i for i in range(self.n) if self.is_root[i] and i not in root_priors]
        if missing:
            raise NetworkValidationError(f"Root nodes {missing} have no prior")
        extra = [i for i in root_priors if not self.is_root[i]]
        if extra:
            raise NetworkValidationError(f"Nodes {extra} have parents but were given a root prior")

        self.root_priors = dict(sorted(root_priors.items()))
        self.prior = np.zeros(self.n)
        for node, p in self.root_priors.items():
            self.prior[node] = p

        self.order = self._topological_order()
        self.layers = self._validate_layers(layers) if layers is not None else None

        for arr in (self.weights, self.adjacency, self.is_root, self.prior):
            arr.setflags(write=False)

    def validate_parameters(self, n, edges, root_priors):
        if not isinstance(n, (int, np.integer)) or n <= 0:
            raise NetworkValidationError("Node count must be a positive integer")
        seen = set()
        for child, parent, theta in edges:
            if not (0 <= child < n and 0 <= parent < n):
                raise NetworkValidationError(f"Edge {parent}->{child} references a node outside 0..{n - 1}")
            if (child, parent) in seen:
                raise NetworkValidationError(f"Duplicate edge {parent}->{child}")
            seen.add((child, parent))
            if not np.isfinite(theta):
                raise NetworkValidationError(
                    f"Edge {parent}->{child} has non-finite weight {theta} (q = 1 links are not supported)"
                )
            if self.kind is NetworkKind.NOISY_OR and theta < 0:
                raise NetworkValidationError(
                    f"Edge {parent}->{child} has negative noisy-OR weight theta={theta}"
                )
        for node, p in root_priors.items():
            if not 0 <= node < n:
                raise NetworkValidationError(f"Prior given for unknown node {node}")
            if not 0.0 <= p <= 1.0:
                raise NetworkValidationError(f"Prior of node {node} is {p}, outside [0, 1]")

    def _topological_order(self) -> Tuple[int, ...]:
        indegree = [len(p) for p in self.parents]
        ready = [i for i in range(self.n) if indegree[i] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            node = heapq.heappop(ready)
            order.append(node)
            for child in self.children[node]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    heapq.heappush(ready, child)
        if len(order) != self.n:
            cyclic = sorted(i for i in range(self.n) if indegree[i] > 0)
            raise NetworkValidationError(f"Cycle detected among nodes {cyclic}")
        return tuple(order)

    def _validate_layers(self, layers):
        l1, l2 = (tuple(sorted(int(i) for i in layer)) for layer in layers)
        s1, s2 = set(l1), set(l2)
        if len(s1) != len(l1) or len(s2) != len(l2):
            raise NetworkValidationError("Layer lists contain duplicate nodes")
        both = sorted(s1 & s2)
        if both:
            raise NetworkValidationError(f"Nodes {both} are in both L1 and L2")
        uncovered = sorted(set(range(self.n)) - s1 - s2)
        if uncovered:
            raise NetworkValidationError(f"Nodes {uncovered} are in neither layer")
        for child in range(self.n):
            for parent in self.parents[child]:
                if not (parent in s2 and child in s1):
                    raise NetworkValidationError(
                        f"Edge {parent}->{child} does not go from L2 to L1"
                    )
        not_roots = [j for j in l2 if not self.is_root[j]]
        if not_roots:
            raise NetworkValidationError(f"L2 nodes {not_roots} are not roots")
        return l1, l2

    @classmethod
    def bipartite(cls, kind, theta, l2_priors, leak=None) -> "Network":
        """
        Two-level network from a |L1| x |L2| weight matrix. L2 nodes get ids
        0..m-1 and L1 nodes ids m..m+n1-1.
        """
        theta = np.asarray(theta, dtype=float)
        n1, m = theta.shape
        edges = [(m + i, j, theta[i, j]) for i in range(n1) for j in range(m)]
        priors = {j: float(p) for j, p in enumerate(np.broadcast_to(l2_priors, (m,)))}
        net = cls(kind, m + n1, edges, priors, layers=(range(m, m + n1), range(m)))
        return net.with_leak(leak) if leak is not None else net

    @property
    def is_bipartite(self) -> bool:
        return self.layers is not None

    @property
    def l1(self) -> Tuple[int, ...]:
        return self.layers[0] if self.layers else ()

    @property
    def l2(self) -> Tuple[int, ...]:
        return self.layers[1] if self.layers else ()

    def edges(self):
        for child in range(self.n):
            for parent in self.parents[child]:
                yield child, parent, float(self.weights[child, parent])

    def fan_in(self, node: int) -> int:
        return len(self.parents[node])

    def with_leak(self, theta0: float) -> "Network":
        """Adds an always-on root (prior 1) feeding every non-root node."""
        leak = self.n
        targets = self.l1 if self.is_bipartite else [i for i in range(self.n) if not self.is_root[i]]
        edges = list(self.edges()) + [(i, leak, float(theta0)) for i in targets]
        priors = dict(self.root_priors)
        priors[leak] = 1.0
        layers = (self.l1, self.l2 + (leak,)) if self.is_bipartite else None
        return Network(self.kind, self.n + 1, edges, priors, layers)

    def scaled(self, factor: float) -> "Network":
        edges = [(c, p, t * factor) for c, p, t in self.edges()]
        return Network(self.kind, self.n, edges, self.root_priors, self.layers)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.n == other.n
            and self.parents == other.parents
            and np.array_equal(self.weights, other.weights)
            and self.root_priors == other.root_priors
            and self.layers == other.layers
        )

    def __repr__(self):
        shape = f"{len(self.l2)}->{len(self.l1)} bipartite" if self.is_bipartite else "DAG"
        return f"Network(kind={self.kind.value}, n={self.n}, {shape})"

    def node_log_probs(self, states) -> np.ndarray:
        """Per-node conditional log-probabilities for a batch of full states, shape (B, n)."""
        s = np.atleast_2d(np.asarray(states, dtype=float))
        if s.shape[1] != self.n:
            raise ValueError(f"State length {s.shape[1]} does not match node count {self.n}")
        z = s @ self.weights.T
        out = np.empty_like(z)
        roots = self.is_root
        p = self.prior[roots]
        out[:, roots] = xlogy(s[:, roots], p) + xlogy(1.0 - s[:, roots], 1.0 - p)
        inner = ~roots
        si, zi = s[:, inner], z[:, inner]
        if self.kind is NetworkKind.SIGMOID:
            out[:, inner] = log_expit((2.0 * si - 1.0) * zi)
        else:
            with np.errstate(divide="ignore"):
                log_on = np.log(-np.expm1(-zi))
            out[:, inner] = np.where(si > 0.5, log_on, -zi)
        return out

    def log_prob_batch(self, states) -> np.ndarray:
        return self.node_log_probs(states).sum(axis=1)

    def prob_on(self, states) -> np.ndarray:
        """P(S_i = 1 | pa[i]) for every node of each state in the batch."""
        s = np.atleast_2d(np.asarray(states, dtype=float))
        z = s @ self.weights.T
        if self.kind is NetworkKind.SIGMOID:
            on = expit(z)
        else:
            on = -np.expm1(-z)
        return np.where(self.is_root, self.prior, on)


@dataclass(frozen=True)
class Evidence:
    """Observed bits for a subset of nodes."""

    assignments: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for node, bit in self.assignments.items():
            if int(bit) not in (0, 1) or float(bit) != int(bit):
                raise ValueError(f"Evidence for node {node} must be 0 or 1, got {bit!r}")
            clean[int(node)] = int(bit)
        object.__setattr__(self, "assignments", dict(sorted(clean.items())))

    @classmethod
    def from_state(cls, state, nodes) -> "Evidence":
        return cls({int(i): int(state[i]) for i in nodes})

    @classmethod
    def constant(cls, nodes, bit: int) -> "Evidence":
        return cls({int(i): bit for i in nodes})

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(self.assignments)

    def hidden(self, net: Network) -> Tuple[int, ...]:
        return tuple(i for i in range(net.n) if i not in self.assignments)

    def check(self, net: Network, require_l1: bool = False):
        unknown = [i for i in self.assignments if not 0 <= i < net.n]
        if unknown:
            raise ValueError(f"Evidence references unknown nodes {unknown}")
        if require_l1:
            if not net.is_bipartite:
                raise ValueError("Network has no bipartite layer declaration")
            if set(self.assignments) != set(net.l1):
                raise ValueError("Evidence must assign exactly the L1 nodes")

    def all_zero(self) -> bool:
        return not any(self.assignments.values())


def validate_state(net: Network, state) -> np.ndarray:
    bits = np.asarray(state)
    if bits.shape != (net.n,):
        raise ValueError(f"Full state must have length {net.n}, got shape {bits.shape}")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("Full state entries must be 0 or 1")
    return bits.astype(np.int8)


def cond_log_prob(net: Network, i: int, state) -> float:
    """log P(S_i | pa[i]); noisy-OR on-nodes with no active parent give -inf."""
    bits = validate_state(net, state)
    return float(net.node_log_probs(bits[None, :])[0, i])


def joint_log_prob(net: Network, state) -> float:
    bits = validate_state(net, state)
    return float(net.log_prob_batch(bits[None, :])[0])


def ancestral_samples(net: Network, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draws ``size`` joint states by sampling nodes in topological order."""
    states = np.zeros((size, net.n), dtype=np.int8)
    for node in net.order:
        if net.is_root[node]:
            p = np.full(size, net.prior[node])
        else:
            pa = list(net.parents[node])
            z = states[:, pa] @ net.weights[node, pa]
            p = expit(z) if net.kind is NetworkKind.SIGMOID else -np.expm1(-z)
        states[:, node] = rng.random(size) < p
    return states


def ancestral_sample(net: Network, rng: np.random.Generator) -> np.ndarray:
    return ancestral_samples(net, rng, 1)[0]


def evidence_patterns(net: Network):
    """Yields every assignment of the L1 layer."""
    l1 = net.l1
    for code in range(2 ** len(l1)):
        yield Evidence({node: (code >> k) & 1 for k, node in enumerate(l1)})
