"""
Mean-field lower bounds on log-marginals for generic sigmoid and noisy-OR DAGs.

The bound is sum_i E_Q[log P(S_i | pa[i])] + H(Q) for a factorized Q with
means mu over the unassigned nodes; evidence nodes enter with their fixed
bits. Internally every objective works on the full-length mean vector
("mubar"), which holds mu for hidden nodes and the observed bit elsewhere.
"""
import logging

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, log_expit, xlogy

from networks.model import NEG_INF, Evidence, Network, NetworkKind
from .base import BaseBound, LowerBoundOpts, LowerBoundResult, MeanFieldState
from .exact import EnumerationLimitError, bit_chunks
from .transforms import binary_entropy, quad_curvature

logger = logging.getLogger(__name__)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def entropy_q(mu) -> float:
    """Entropy of the factorized Bernoulli distribution with means ``mu``, in nats."""
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    return float(np.sum(binary_entropy(mu)))


class _Objective:
    """E_Q[log P] as a function of mubar, with cheap re-evaluation of one node's family."""

    linear = False

    def __init__(self, net: Network, opts: LowerBoundOpts):
        self.net = net
        self.opts = opts
        self.W = np.array(net.weights)
        self.A = np.array(net.adjacency)
        self.roots = np.flatnonzero(net.is_root)
        self.inner = np.flatnonzero(~net.is_root)

    def refresh(self, mubar):
        pass

    def commit(self, mubar, j, m):
        pass

    def root_terms(self, mu, nodes):
        p = self.net.prior[nodes]
        return xlogy(mu, p) + xlogy(1.0 - mu, 1.0 - p)

    def inner_terms(self, mubar, nodes, j=None, m=None):
        raise NotImplementedError

    def total(self, mubar) -> float:
        value = self.root_terms(mubar[self.roots], self.roots).sum()
        if len(self.inner):
            value += self.inner_terms(mubar, self.inner).sum()
        return float(value)

    def family(self, mubar, j, m) -> float:
        """Every term that depends on mubar[j], evaluated with mubar[j] = m."""
        if self.net.is_root[j]:
            own = self.root_terms(np.array([m]), np.array([j]))
            nodes = np.array(self.net.children[j], dtype=int)
        else:
            own = 0.0
            nodes = np.array((j,) + self.net.children[j], dtype=int)
        value = float(np.sum(own))
        if len(nodes):
            with np.errstate(invalid="ignore"):
                value += float(np.sum(self.inner_terms(mubar, nodes, j, m)))
        return value


class _SigmoidExactObjective(_Objective):
    """Per-node expectations by enumerating parent configurations."""

    linear = True

    def __init__(self, net, opts):
        super().__init__(net, opts)
        self.log_on, self.log_off = {}, {}
        for i in self.inner:
            pa = list(net.parents[i])
            if len(pa) > opts.fan_in_cap:
                raise EnumerationLimitError(
                    f"Node {i} has fan-in {len(pa)} above the exact-expectation cap {opts.fan_in_cap}; "
                    "use the auxiliary mode"
                )
            z = np.concatenate([bits @ self.W[i, pa] for bits in bit_chunks(len(pa))])
            self.log_on[i] = log_expit(z)
            self.log_off[i] = log_expit(-z)

    @staticmethod
    def config_weights(mu_pa) -> np.ndarray:
        # bit k of the configuration index is parent k, matching bit_chunks
        w = np.ones(1)
        for mu in mu_pa:
            w = np.concatenate([w * (1.0 - mu), w * mu])
        return w

    def inner_terms(self, mubar, nodes, j=None, m=None):
        if j is not None:
            mubar = mubar.copy()
            mubar[j] = m
        out = np.empty(len(nodes))
        for k, i in enumerate(nodes):
            w = self.config_weights(mubar[list(self.net.parents[i])])
            out[k] = mubar[i] * (w @ self.log_on[i]) + (1.0 - mubar[i]) * (w @ self.log_off[i])
        return out


class _SigmoidAuxObjective(_Objective):
    """
    E[log(1 + e^z)] <= eta E[z] + log(E[e^(-eta z)] + E[e^((1-eta) z)]),
    with one eta per node, re-optimized on every refresh.
    """

    def __init__(self, net, opts):
        super().__init__(net, opts)
        self.eta = np.full(net.n, 0.5)

    @staticmethod
    def _log_factor(mu, t_theta):
        with np.errstate(divide="ignore"):
            return np.logaddexp(np.log1p(-mu), np.log(mu) + t_theta)

    def _log_mgf(self, mubar, t, rows):
        F = self._log_factor(mubar[None, :], t[:, None] * self.W[rows])
        return np.where(self.A[rows], F, 0.0).sum(axis=1)

    def _eta_objective(self, mubar, eta, rows):
        lin = self.W[rows] @ mubar
        return eta * lin + np.logaddexp(self._log_mgf(mubar, -eta, rows), self._log_mgf(mubar, 1.0 - eta, rows))

    def _optimize_eta(self, mubar):
        rows = self.inner
        lo, hi = np.zeros(len(rows)), np.ones(len(rows))
        for _ in range(60):
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            left = self._eta_objective(mubar, x1, rows) <= self._eta_objective(mubar, x2, rows)
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
        candidate = 0.5 * (lo + hi)
        keep = self._eta_objective(mubar, candidate, rows) <= self._eta_objective(mubar, self.eta[rows], rows)
        self.eta[rows] = np.where(keep, candidate, self.eta[rows])

    def refresh(self, mubar):
        if len(self.inner):
            self._optimize_eta(mubar)
        self.lin = self.W @ mubar
        all_nodes = np.arange(self.net.n)
        self.lm_neg = self._log_mgf(mubar, -self.eta, all_nodes)
        self.lm_pos = self._log_mgf(mubar, 1.0 - self.eta, all_nodes)

    def _shifted(self, mubar, nodes, j, m):
        w, adj = self.W[nodes, j], self.A[nodes, j]
        eta = self.eta[nodes]
        old, new = mubar[j], m
        lin = self.lin[nodes] + w * (new - old)
        d_neg = self._log_factor(new, -eta * w) - self._log_factor(old, -eta * w)
        d_pos = self._log_factor(new, (1.0 - eta) * w) - self._log_factor(old, (1.0 - eta) * w)
        return lin, self.lm_neg[nodes] + np.where(adj, d_neg, 0.0), self.lm_pos[nodes] + np.where(adj, d_pos, 0.0)

    def inner_terms(self, mubar, nodes, j=None, m=None):
        mi = mubar[nodes]
        if j is None:
            lin, lm_neg, lm_pos = self.lin[nodes], self.lm_neg[nodes], self.lm_pos[nodes]
        else:
            mi = np.where(nodes == j, m, mi)
            lin, lm_neg, lm_pos = self._shifted(mubar, nodes, j, m)
        eta = self.eta[nodes]
        return mi * lin - eta * lin - np.logaddexp(lm_neg, lm_pos)

    def commit(self, mubar, j, m):
        nodes = np.arange(self.net.n)
        self.lin, self.lm_neg, self.lm_pos = self._shifted(mubar, nodes, j, m)


class _NoisyOrObjective(_Objective):
    """
    Expansion-based bound on E_Q[S_i log(1 - e^{-z_i})] with
    X_i^(k) = prod_j (mu_j e^{-2^k theta_ij} + 1 - mu_j) kept as per-level
    zero counts and log sums so single-coordinate changes are cheap.
    The last level is Z_i, the Q-probability that no positive-weight parent is on.
    """

    def __init__(self, net, opts, quadratic=False, tail=True, curvature=True):
        super().__init__(net, opts)
        self.N = opts.expansion_terms
        self.quadratic = quadratic
        self.tail = tail
        self.curvature = curvature
        scales = np.ldexp(1.0, np.arange(self.N + 1))
        levels = np.exp(-self.W[:, :, None] * scales)
        never = (self.W == 0.0)[:, :, None].astype(float)
        self.E = np.concatenate([levels, never], axis=2)
        positive = np.where(self.A & (self.W > 0), self.W, np.inf)
        x_min = positive.min(axis=1)
        with np.errstate(divide="ignore"):
            self.tail_const = np.log(-np.expm1(-np.ldexp(x_min, self.N)))

    @staticmethod
    def _factor(mu, e):
        f = mu * e + (1.0 - mu)
        zero = f <= 0.0
        with np.errstate(divide="ignore"):
            return zero.astype(int), np.where(zero, 0.0, np.log(np.where(zero, 1.0, f)))

    def refresh(self, mubar):
        zc, lf = self._factor(mubar[None, :, None], self.E)
        self.zc = zc.sum(axis=1)
        self.ls = lf.sum(axis=1)
        self.lin = self.W @ mubar

    def _shifted(self, mubar, nodes, j, m):
        e = self.E[nodes, j, :]
        z_old, l_old = self._factor(mubar[j], e)
        z_new, l_new = self._factor(m, e)
        return (
            self.zc[nodes] + z_new - z_old,
            self.ls[nodes] + l_new - l_old,
            self.lin[nodes] + self.W[nodes, j] * (m - mubar[j]),
        )

    def commit(self, mubar, j, m):
        nodes = np.arange(self.net.n)
        self.zc, self.ls, self.lin = self._shifted(mubar, nodes, j, m)

    def inner_terms(self, mubar, nodes, j=None, m=None):
        mi = mubar[nodes]
        if j is None:
            zc, ls, lin = self.zc[nodes], self.ls[nodes], self.lin[nodes]
        else:
            mi = np.where(nodes == j, m, mi)
            zc, ls, lin = self._shifted(mubar, nodes, j, m)
        N = self.N
        X = np.minimum(np.exp(np.where(zc > 0, NEG_INF, ls)), 1.0)
        on = -np.log1p(X[:, :N]).sum(axis=1)
        if self.quadratic and self.curvature:
            Xk, Xk1 = X[:, :N], X[:, 1:N + 1]
            a = np.where(Xk < 1.0, quad_curvature(np.minimum(Xk, 1.0)), 0.0)
            on = on + (a * np.maximum(Xk1 - Xk * Xk, 0.0)).sum(axis=1)
        if self.tail:
            on = on + (1.0 - X[:, N + 1]) * self.tail_const[nodes]
            on = np.where(zc[:, N + 1] == 0, NEG_INF, on)
        with np.errstate(invalid="ignore"):
            on_part = np.where(mi > 0, mi * on, 0.0)
        return on_part - (1.0 - mi) * lin


def make_objective(net: Network, opts: LowerBoundOpts, curvature: bool = True) -> _Objective:
    if net.kind is NetworkKind.SIGMOID:
        if opts.sigmoid_expectation_mode == "exact":
            return _SigmoidExactObjective(net, opts)
        return _SigmoidAuxObjective(net, opts)
    return _NoisyOrObjective(net, opts, quadratic=opts.use_quadratic, tail=opts.expansion_tail, curvature=curvature)


class MeanFieldLowerBound(BaseBound):
    """Coordinate ascent on a factorized Q for any sigmoid or noisy-OR DAG."""

    def __init__(self, net: Network, evidence: Evidence, opts: LowerBoundOpts = None, curvature: bool = True):
        super().__init__(net, evidence)
        self.name = "Mean-Field Lower Bound"
        self.opts = opts or LowerBoundOpts()
        evidence.check(net)
        self.hidden = evidence.hidden(net)
        self.objective = make_objective(net, self.opts, curvature)
        self.pinned = {
            j: float(net.prior[j]) for j in self.hidden if net.is_root[j] and net.prior[j] in (0.0, 1.0)
        }
        self.free = [j for j in self.hidden if j not in self.pinned]

    def full_mu(self, mu) -> np.ndarray:
        mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
        if mu.shape != (len(self.hidden),):
            raise ValueError(f"Expected {len(self.hidden)} means, got shape {mu.shape}")
        if np.any(~((mu >= 0) & (mu <= 1))):
            raise ValueError("Mean-field parameters must lie in [0, 1]")
        mubar = np.zeros(self.net.n)
        for node, bit in self.evidence.assignments.items():
            mubar[node] = bit
        mubar[list(self.hidden)] = mu
        return mubar

    def _value(self, mubar) -> float:
        with np.errstate(invalid="ignore"):
            return self.objective.total(mubar) + entropy_q(mubar[list(self.hidden)])

    def evaluate(self, mu) -> float:
        mubar = self.full_mu(mu)
        self.objective.refresh(mubar)
        return self._value(mubar)

    def initial_mu(self) -> np.ndarray:
        mubar = self.full_mu(np.full(len(self.hidden), 0.5))
        for j, p in self.pinned.items():
            mubar[j] = p
        if self.net.kind is NetworkKind.NOISY_OR:
            # start where every node assumed on has a parent that is surely on
            hidden = set(self.free)
            for j in self.net.order:
                if j not in hidden:
                    continue
                if self.net.is_root[j]:
                    mubar[j] = 1.0
                else:
                    pa = list(self.net.parents[j])
                    covered = np.any((mubar[pa] == 1.0) & (self.net.weights[j, pa] > 0))
                    mubar[j] = 1.0 if covered else 0.0
        return mubar

    def _coordinate(self, mubar, j):
        obj = self.objective

        def f(m):
            return obj.family(mubar, j, m) + float(binary_entropy(m))

        old = mubar[j]
        current = f(old)
        e0, e1 = obj.family(mubar, j, 0.0), obj.family(mubar, j, 1.0)
        if np.isfinite(e0) and np.isfinite(e1):
            if obj.linear:
                slope = e1 - e0
            else:
                h = 1e-6
                lo, hi = max(0.0, old - h), min(1.0, old + h)
                slope = (obj.family(mubar, j, hi) - obj.family(mubar, j, lo)) / (hi - lo)
            proposal = float(expit(slope))
        elif np.isfinite(e1):
            proposal = 1.0
        elif np.isfinite(e0):
            proposal = 0.0
        else:
            return

        best, best_value = old, current
        for candidate in (proposal, old + 0.5 * (proposal - old)):
            value = f(candidate)
            if value >= current:
                best, best_value = candidate, value
                break
        else:
            def negated(m):
                v = f(m)
                return -v if np.isfinite(v) else 1e300

            res = minimize_scalar(negated, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
            for candidate in (float(res.x), 0.0, 1.0):
                value = f(candidate)
                if value > best_value:
                    best, best_value = candidate, value

        if best != old:
            obj.commit(mubar, j, best)
            mubar[j] = best

    def optimize(self) -> LowerBoundResult:
        opts = self.opts
        mubar = self.initial_mu()
        self.objective.refresh(mubar)
        current = self._value(mubar)
        trace = [(0, current)] if opts.trace else []
        if current == NEG_INF:
            logger.info("%s: no finite starting point, evidence likely has probability zero", self.name)
            return LowerBoundResult(NEG_INF, 0, False, self._state(mubar), trace)

        converged = False
        sweeps = 0
        for sweep in range(1, opts.max_sweeps + 1):
            sweeps = sweep
            for j in self.free:
                self._coordinate(mubar, j)
            self.objective.refresh(mubar)
            value = self._value(mubar)
            if value < current - 1e-9 * max(1.0, abs(current)):
                logger.warning("%s: sweep %d decreased the bound %.15g -> %.15g", self.name, sweep, current, value)
            if opts.trace:
                trace.append((sweep, value))
            logger.debug("%s sweep %d: log-bound %.12g", self.name, sweep, value)
            change = abs(value - current)
            current = value
            if change <= opts.tol * max(abs(current), 1.0):
                converged = True
                break

        if not converged:
            logger.warning("%s did not converge in %d sweeps", self.name, opts.max_sweeps)
        return LowerBoundResult(current, sweeps, converged, self._state(mubar), trace)

    def _state(self, mubar) -> MeanFieldState:
        return MeanFieldState(hidden=self.hidden, mu=mubar[list(self.hidden)].copy())


def lb_sigmoid_eval(net, ev, mu, opts: LowerBoundOpts = None) -> float:
    if net.kind is not NetworkKind.SIGMOID:
        raise ValueError("lb_sigmoid_eval needs a sigmoid network")
    return MeanFieldLowerBound(net, ev, opts).evaluate(mu)


def _noisy_or_opts(n_terms, quadratic, tail):
    return LowerBoundOpts(expansion_terms=n_terms, use_quadratic=quadratic, expansion_tail=tail)


def lb_noisy_or_eval_simple(net, ev, mu, n_terms: int = 16, tail: bool = True) -> float:
    if net.kind is not NetworkKind.NOISY_OR:
        raise ValueError("lb_noisy_or_eval_simple needs a noisy-OR network")
    return MeanFieldLowerBound(net, ev, _noisy_or_opts(n_terms, False, tail)).evaluate(mu)


def lb_noisy_or_eval_quadratic(net, ev, mu, n_terms: int = 16, tail: bool = True, curvature: bool = True) -> float:
    """Quadratic refinement; ``curvature=False`` forces every a_ik to zero."""
    if net.kind is not NetworkKind.NOISY_OR:
        raise ValueError("lb_noisy_or_eval_quadratic needs a noisy-OR network")
    return MeanFieldLowerBound(net, ev, _noisy_or_opts(n_terms, True, tail), curvature=curvature).evaluate(mu)


def lb_optimize(net, ev, opts: LowerBoundOpts = None) -> LowerBoundResult:
    return MeanFieldLowerBound(net, ev, opts).optimize()
