import numpy as np
import pytest
from numpy.testing import assert_allclose

from bounds.base import BoundError, BoundOptions
from bounds.exact import exact_log_marginal
from bounds.upper import (
    NoisyOrUpperBound,
    SigmoidUpperBound,
    solve_convex_coordinate,
    ub_noisy_or_eval,
    ub_noisy_or_log_eval,
    ub_noisy_or_optimize,
    ub_sigmoid_eval,
    ub_sigmoid_log_eval,
    ub_sigmoid_optimize,
    upper_bound_for,
)
from networks.model import Evidence, Network
from tests.conftest import random_bipartite, sampled_evidence, small_dag


class TestSolver:
    def test_quadratic_minimum(self):
        x = solve_convex_coordinate(lambda t: (2 * (t - 0.3), 2.0), 0.0, 1.0, 0.9)
        assert_allclose(x, 0.3, atol=1e-10)

    def test_minimum_at_edge_of_bracket(self):
        x = solve_convex_coordinate(lambda t: (1.0, 0.0), 0.0, 1.0, 0.5)
        assert x < 1e-8


class TestEvaluation:
    def test_sigmoid_xi_zero_is_trivial(self, sigmoid_net, rng):
        ev = sampled_evidence(sigmoid_net, rng)
        assert ub_sigmoid_eval(sigmoid_net, ev, np.zeros(4)) == pytest.approx(0.0, abs=1e-15)

    def test_any_xi_is_an_upper_bound(self, rng):
        for _ in range(50):
            net = random_bipartite("sigmoid", 4, 3, rng, scale=2.0)
            ev = sampled_evidence(net, rng)
            exact = exact_log_marginal(net, ev).log_marginal
            assert ub_sigmoid_eval(net, ev, rng.uniform(0, 1, 4)) >= exact - 1e-12
            net = random_bipartite("noisy_or", 4, 3, rng)
            ev = sampled_evidence(net, rng)
            exact = exact_log_marginal(net, ev).log_marginal
            assert ub_noisy_or_eval(net, ev, rng.exponential(1.0, 4)) >= exact - 1e-12

    def test_legendre_form_at_optimal_lambda(self, sigmoid_net, noisy_or_net, rng):
        for net, log_eval, cls in (
            (sigmoid_net, ub_sigmoid_log_eval, SigmoidUpperBound),
            (noisy_or_net, ub_noisy_or_log_eval, NoisyOrUpperBound),
        ):
            ev = sampled_evidence(net, rng)
            bound = cls(net, ev)
            xi = np.full(4, 0.4)
            lam = bound.optimal_lambda(xi)
            assert_allclose(log_eval(net, ev, xi, lam), bound.evaluate(xi), rtol=1e-12)
            assert log_eval(net, ev, xi, 1.3 * lam) > bound.evaluate(xi)

    def test_bad_parameters(self, sigmoid_net, rng):
        ev = sampled_evidence(sigmoid_net, rng)
        with pytest.raises(BoundError):
            ub_sigmoid_eval(sigmoid_net, ev, np.full(4, 1.2))
        with pytest.raises(BoundError):
            ub_sigmoid_log_eval(sigmoid_net, ev, np.full(4, 0.5), np.zeros(3))
        with pytest.raises(BoundError):
            ub_sigmoid_eval(sigmoid_net, ev, np.full(3, 0.5))


class TestApplicability:
    def test_non_bipartite(self):
        net = small_dag("sigmoid")
        with pytest.raises(BoundError, match="two-level"):
            ub_sigmoid_optimize(net, Evidence({3: 1, 4: 1}))

    def test_kind_mismatch(self, noisy_or_net, rng):
        with pytest.raises(BoundError, match="sigmoid"):
            ub_sigmoid_optimize(noisy_or_net, sampled_evidence(noisy_or_net, rng))

    def test_partial_evidence(self, sigmoid_net):
        with pytest.raises(BoundError):
            ub_sigmoid_optimize(sigmoid_net, Evidence({sigmoid_net.l1[0]: 1}))


class TestOptimizedBound:
    def test_sandwich_with_oracle(self, rng):
        for kind in ("sigmoid", "noisy_or"):
            for _ in range(40):
                net = random_bipartite(kind, 5, 4, rng, scale=rng.uniform(0.2, 3.0))
                ev = sampled_evidence(net, rng)
                exact = exact_log_marginal(net, ev).log_marginal
                assert upper_bound_for(net, ev).optimize().log_bound >= exact - 1e-9

    def test_noisy_or_all_zero_evidence_is_exact(self, rng):
        net = random_bipartite("noisy_or", 5, 4, rng)
        ev = Evidence.constant(net.l1, 0)
        exact = exact_log_marginal(net, ev).log_marginal
        assert_allclose(ub_noisy_or_optimize(net, ev).log_bound, exact, atol=1e-9)

    def test_weak_coupling_limit(self, rng):
        for kind in ("sigmoid", "noisy_or"):
            net = random_bipartite(kind, 5, 4, rng).scaled(1e-3)
            # noisy-OR samples at this scale are all-off with overwhelming probability
            ev = sampled_evidence(net, rng) if kind == "sigmoid" else Evidence.constant(net.l1, 0)
            exact = exact_log_marginal(net, ev).log_marginal
            bound = upper_bound_for(net, ev).optimize().log_bound
            assert -1e-12 <= 1 - bound / exact < 1e-3

    def test_trace_is_monotone(self, rng):
        net = random_bipartite("sigmoid", 6, 5, rng, scale=2.0)
        result = ub_sigmoid_optimize(net, sampled_evidence(net, rng), BoundOptions(trace=True))
        values = np.array([row[2] for row in result.trace])
        assert len(values) > 0
        assert np.all(np.diff(values) <= 1e-9 * np.maximum(1.0, np.abs(values[:-1])))
        assert {row[1][:2] for row in result.trace} == {"la", "xi"}

    def test_legendre_and_direct_optima_agree(self, rng):
        for kind in ("sigmoid", "noisy_or"):
            net = random_bipartite(kind, 6, 5, rng)
            ev = sampled_evidence(net, rng)
            with_lambda = upper_bound_for(net, ev, BoundOptions(tol=1e-12, use_legendre=True)).optimize()
            direct = upper_bound_for(net, ev, BoundOptions(tol=1e-12, use_legendre=False)).optimize()
            assert_allclose(with_lambda.log_bound, direct.log_bound, atol=1e-6)

    def test_sigmoid_xi_stays_in_unit_interval(self, rng):
        net = random_bipartite("sigmoid", 6, 5, rng, scale=4.0)
        xi = ub_sigmoid_optimize(net, sampled_evidence(net, rng)).final_state.xi
        assert np.all((xi >= 0) & (xi <= 1))

    def test_converges(self, noisy_or_net, rng):
        result = ub_noisy_or_optimize(noisy_or_net, sampled_evidence(noisy_or_net, rng))
        assert result.converged
        assert result.sweeps >= 1

    def test_impossible_evidence_is_flagged(self):
        net = Network.bipartite("noisy_or", [[0.0, 0.0], [1.0, 0.5]], 0.5)
        ev = Evidence({2: 1, 3: 0})
        result = ub_noisy_or_optimize(net, ev, BoundOptions(xi_max=1e4))
        assert result.degenerate
        assert result.xi_cap_hit

    def test_leak_node(self, rng):
        net = random_bipartite("noisy_or", 4, 3, rng).with_leak(0.1)
        ev = Evidence.constant(net.l1, 1)
        exact = exact_log_marginal(net, ev).log_marginal
        assert ub_noisy_or_optimize(net, ev).log_bound >= exact - 1e-9
