"""
Variational upper bounds on log P(L1 evidence) for two-level networks.

Each L1 conditional is replaced by its variational transform with parameter
xi_i, after which the sum over the L2 layer factorizes:

    log P <= penalty(xi) + sum_j log(p_j exp(a_j) + 1 - p_j),
    a_j = sum_i (alpha_i xi_i + beta_i) theta_ij.

With the Legendre form of the log, each L2 term becomes
lambda_j (p_j exp(a_j) + 1 - p_j) - log lambda_j - 1, convex in every
coordinate.
"""
import logging

import numpy as np
from scipy.special import logit

from networks.model import Evidence, Network, NetworkKind
from .base import BaseBound, BoundError, BoundOptions, UpperBoundResult, VariationalState
from .transforms import binary_entropy, legendre_log, noisy_or_conjugate

logger = logging.getLogger(__name__)

COORDINATE_TOL = 1e-10


def solve_convex_coordinate(deriv, lo, hi, start, tol=COORDINATE_TOL, max_iter=200):
    """
    Minimizer of a 1-D convex function on (lo, hi) given its first and second
    derivative: Newton steps kept inside the current bracket, bisection otherwise.
    """
    a, b = lo, hi
    t = min(max(start, lo), hi)
    if not lo < t < hi:
        t = 0.5 * (lo + hi)
    for _ in range(max_iter):
        d1, d2 = deriv(t)
        if d1 == 0.0:
            return t
        if d1 > 0:
            b = t
        else:
            a = t
        step = t - d1 / d2 if np.isfinite(d1) and d2 > 0 else np.nan
        if not a < step < b:
            step = 0.5 * (a + b)
        if abs(step - t) <= tol * max(abs(t), 1e-12) or b - a <= 4 * np.finfo(float).eps * max(abs(a), abs(b)):
            return step
        t = step
    return t


class _BipartiteUpperBound(BaseBound):
    kind = None
    capped = False

    def __init__(self, net: Network, evidence: Evidence, opts: BoundOptions = None):
        super().__init__(net, evidence)
        self.opts = opts or BoundOptions()
        self.validate_parameters(net, evidence)
        self.l1, self.l2 = list(net.l1), list(net.l2)
        self.theta = np.array(net.weights[np.ix_(self.l1, self.l2)])
        self.s = np.array([evidence.assignments[i] for i in self.l1], dtype=float)
        self.p = np.array(net.prior[self.l2])
        with np.errstate(divide="ignore"):
            self.log_p = np.log(self.p)
            self.log_q = np.log1p(-self.p)
            self.logit_p = logit(self.p)
        self.alpha, self.beta = self._coefficients()

    def validate_parameters(self, net, evidence):
        if not net.is_bipartite:
            raise BoundError("Upper bounds need a two-level network with declared layers")
        if net.kind is not self.kind:
            raise BoundError(f"{type(self).__name__} applies to {self.kind.value} networks, got {net.kind.value}")
        try:
            evidence.check(net, require_l1=True)
        except ValueError as e:
            raise BoundError(str(e)) from e

    def _coefficients(self):
        raise NotImplementedError

    def _check_xi(self, xi):
        raise NotImplementedError

    def _penalty(self, xi, index=None):
        raise NotImplementedError

    def _penalty_derivs(self, i, t):
        raise NotImplementedError

    def _domain(self):
        raise NotImplementedError

    def initial_xi(self) -> np.ndarray:
        raise NotImplementedError

    def activations(self, xi) -> np.ndarray:
        return self.theta.T @ (self.alpha * xi + self.beta)

    def _log_terms(self, a):
        return np.logaddexp(self.log_p + a, self.log_q)

    def evaluate(self, xi) -> float:
        """Closed-form bound on the log marginal for fixed xi (lambda eliminated)."""
        xi = self._check_xi(xi)
        return float(self._penalty(xi).sum() + self._log_terms(self.activations(xi)).sum())

    def evaluate_legendre(self, xi, lam) -> float:
        xi = self._check_xi(xi)
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (len(self.l2),):
            raise BoundError(f"Expected {len(self.l2)} lambda values, got shape {lam.shape}")
        if np.any(~(lam > 0)):
            raise BoundError("Legendre parameters lambda must be positive")
        terms = np.exp(self._log_terms(self.activations(xi)))
        return float(self._penalty(xi).sum() + legendre_log(terms, lam).sum())

    @staticmethod
    def _legendre_value(penalty, log_lam, log_terms) -> float:
        return float(penalty + np.sum(np.exp(log_lam + log_terms) - log_lam - 1.0))

    def optimal_lambda(self, xi) -> np.ndarray:
        return np.exp(-self._log_terms(self.activations(self._check_xi(xi))))

    def is_degenerate(self) -> bool:
        return False

    def optimize(self) -> UpperBoundResult:
        opts = self.opts
        xi = self.initial_xi()
        a = self.activations(xi)
        pen = self._penalty(xi)
        log_lam = -self._log_terms(a) if opts.use_legendre else None
        lo, hi = self._domain()
        active = [i for i in range(len(self.l1)) if self.alpha[i] != 0.0]
        trace = []
        cap_hit = False

        def objective():
            terms = self._log_terms(a)
            if opts.use_legendre:
                return self._legendre_value(pen.sum(), log_lam, terms)
            return float(pen.sum() + terms.sum())

        current = objective()
        previous_sweep = current
        converged = False
        sweeps = 0
        for sweep in range(1, opts.max_sweeps + 1):
            sweeps = sweep
            if opts.use_legendre:
                # exact minimizers, applied one lambda at a time so the trace stays coordinate-wise
                optimum = -self._log_terms(a)
                for j in range(len(self.l2)):
                    log_lam[j] = optimum[j]
                    value = objective()
                    self._check_descent(current, value, f"lambda[{j}]")
                    current = min(current, value)
                    if opts.trace:
                        trace.append((sweep, f"lambda[{self.l2[j]}]", value))

            for i in active:
                theta_i = self.theta[i]
                alpha_i = self.alpha[i]
                a_rest = a - alpha_i * xi[i] * theta_i

                def deriv(t):
                    p1, p2 = self._penalty_derivs(i, t)
                    a_t = a_rest + alpha_i * t * theta_i
                    if opts.use_legendre:
                        w = np.exp(log_lam + self.log_p + a_t)
                        return p1 + alpha_i * (w @ theta_i), p2 + alpha_i ** 2 * (w @ theta_i ** 2)
                    with np.errstate(over="ignore"):
                        r = 1.0 / (1.0 + np.exp(-(a_t + self.logit_p)))
                    return p1 + alpha_i * (r @ theta_i), p2 + alpha_i ** 2 * (r * (1.0 - r) @ theta_i ** 2)

                if self.capped and self._penalty_derivs(i, hi)[0] + alpha_i * self._slope_at(i, hi, a_rest, log_lam) <= 0:
                    t_new = hi
                    cap_hit = True
                else:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        t_new = solve_convex_coordinate(deriv, lo, hi, xi[i])

                old = (xi[i], a.copy(), pen[i])
                xi[i] = t_new
                a[:] = a_rest + alpha_i * t_new * theta_i
                pen[i] = self._penalty(xi[i:i + 1], index=i)[0]
                value = objective()
                if value > current:
                    # numerical noise only; keep the previous coordinate
                    xi[i], a[:], pen[i] = old[0], old[1], old[2]
                    value = current
                current = value
                if opts.trace:
                    trace.append((sweep, f"xi[{self.l1[i]}]", value))

            change = abs(previous_sweep - current)
            logger.debug("%s sweep %d: log-bound %.12g", self.name, sweep, current)
            if change <= opts.tol * max(abs(current), 1.0):
                converged = True
                break
            previous_sweep = current

        if not converged:
            logger.warning("%s did not converge in %d sweeps", self.name, opts.max_sweeps)
        if cap_hit:
            logger.warning("%s: xi reached its cap %g", self.name, opts.xi_max)
        log_bound = float(pen.sum() + self._log_terms(a).sum())
        lam = np.exp(-self._log_terms(a)) if opts.use_legendre else None
        return UpperBoundResult(
            log_bound=log_bound,
            sweeps=sweeps,
            converged=converged,
            final_state=VariationalState(xi=xi.copy(), lam=lam),
            trace=trace,
            degenerate=self.is_degenerate(),
            xi_cap_hit=cap_hit,
        )

    def _slope_at(self, i, t, a_rest, log_lam):
        a_t = a_rest + self.alpha[i] * t * self.theta[i]
        if log_lam is not None:
            return np.exp(log_lam + self.log_p + a_t) @ self.theta[i]
        with np.errstate(over="ignore"):
            r = 1.0 / (1.0 + np.exp(-(a_t + self.logit_p)))
        return r @ self.theta[i]

    def _check_descent(self, before, after, coordinate):
        if after > before + 1e-9 * max(1.0, abs(before)):
            logger.warning("%s: %s update increased the bound %.15g -> %.15g", self.name, coordinate, before, after)


class SigmoidUpperBound(_BipartiteUpperBound):
    """Upper bound for two-level sigmoid networks, transform g(x) = min_xi exp(xi x - H(xi))."""

    kind = NetworkKind.SIGMOID

    def __init__(self, net, evidence, opts=None):
        super().__init__(net, evidence, opts)
        self.name = "Sigmoid Upper Bound"

    def _coefficients(self):
        return 2.0 * self.s - 1.0, np.zeros_like(self.s)

    def _check_xi(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (len(self.l1),):
            raise BoundError(f"Expected {len(self.l1)} xi values, got shape {xi.shape}")
        if np.any(~((xi >= 0) & (xi <= 1))):
            raise BoundError("Sigmoid variational parameters must lie in [0, 1]")
        return xi

    def _penalty(self, xi, index=None):
        return -binary_entropy(xi)

    def _penalty_derivs(self, i, t):
        with np.errstate(divide="ignore"):
            return np.log(t) - np.log1p(-t), 1.0 / (t * (1.0 - t))

    def _domain(self):
        return 0.0, 1.0

    def initial_xi(self):
        return np.full(len(self.l1), 0.5)


class NoisyOrUpperBound(_BipartiteUpperBound):
    """Upper bound for two-level noisy-OR networks, transform 1 - e^-x = min_xi exp(xi x - F(xi))."""

    kind = NetworkKind.NOISY_OR
    capped = True

    def __init__(self, net, evidence, opts=None):
        super().__init__(net, evidence, opts)
        self.name = "Noisy-OR Upper Bound"

    def _coefficients(self):
        return self.s.copy(), self.s - 1.0

    def _check_xi(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (len(self.l1),):
            raise BoundError(f"Expected {len(self.l1)} xi values, got shape {xi.shape}")
        if np.any(~(xi >= 0)):
            raise BoundError("Noisy-OR variational parameters must be non-negative")
        return xi

    def _penalty(self, xi, index=None):
        s = self.s if index is None else self.s[index:index + 1]
        return -s * noisy_or_conjugate(xi)

    def _penalty_derivs(self, i, t):
        s = self.s[i]
        with np.errstate(divide="ignore"):
            return s * (np.log(t) - np.log1p(t)), s / (t * (1.0 + t))

    def _domain(self):
        return 0.0, float(self.opts.xi_max)

    def initial_xi(self):
        return np.ones(len(self.l1))

    def is_degenerate(self) -> bool:
        """True when some L1 node is on but no parent can ever be on with a positive weight."""
        reachable = (self.theta > 0) & (self.p > 0)[None, :]
        impossible = (self.s == 1) & ~reachable.any(axis=1)
        if impossible.any():
            logger.info("%s: evidence has probability zero (nodes %s)", self.name,
                        [self.l1[i] for i in np.flatnonzero(impossible)])
        return bool(impossible.any())


def _bound_for(net, ev, kind, opts=None):
    cls = SigmoidUpperBound if kind is NetworkKind.SIGMOID else NoisyOrUpperBound
    return cls(net, ev, opts)


def upper_bound_for(net: Network, ev: Evidence, opts: BoundOptions = None) -> _BipartiteUpperBound:
    return _bound_for(net, ev, net.kind, opts)


def ub_sigmoid_eval(net, ev, xi) -> float:
    return SigmoidUpperBound(net, ev).evaluate(xi)


def ub_sigmoid_log_eval(net, ev, xi, lam) -> float:
    return SigmoidUpperBound(net, ev).evaluate_legendre(xi, lam)


def ub_sigmoid_optimize(net, ev, opts: BoundOptions = None) -> UpperBoundResult:
    return SigmoidUpperBound(net, ev, opts).optimize()


def ub_noisy_or_eval(net, ev, xi) -> float:
    return NoisyOrUpperBound(net, ev).evaluate(xi)


def ub_noisy_or_log_eval(net, ev, xi, lam) -> float:
    return NoisyOrUpperBound(net, ev).evaluate_legendre(xi, lam)


def ub_noisy_or_optimize(net, ev, opts: BoundOptions = None) -> UpperBoundResult:
    return NoisyOrUpperBound(net, ev, opts).optimize()
