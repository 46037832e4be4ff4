import numpy as np
import pytest
from numpy.testing import assert_allclose

from networks.model import NetworkKind
from utils.priors import PriorSpec, complete_bipartite, sample_parameters, trial_rng


class TestPriorSpec:
    def test_parse(self):
        prior = PriorSpec.parse("gaussian:0.5")
        assert prior == PriorSpec("gaussian", 0.5)
        assert prior.kind is NetworkKind.SIGMOID
        assert PriorSpec.parse("Dirichlet:2").kind is NetworkKind.NOISY_OR
        assert str(PriorSpec("dirichlet", 0.25)) == "dirichlet:0.25"

    @pytest.mark.parametrize("text", ["gaussian", "gaussian:abc", "gaussian:-1", "beta:1", "dirichlet:0", "dirichlet:inf"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            PriorSpec.parse(text)

    def test_kind_check(self):
        PriorSpec("gaussian", 1.0).check_kind("sigmoid")
        with pytest.raises(ValueError, match="sigmoid"):
            PriorSpec("gaussian", 1.0).check_kind("noisy_or")


class TestSampling:
    def test_gaussian_moments(self, rng):
        theta, priors = sample_parameters(PriorSpec("gaussian", 2.0), (400, 500), rng)
        assert theta.shape == (400, 500)
        assert abs(theta.mean()) < 0.02
        assert_allclose(theta.std(), 2.0, rtol=0.01)
        assert np.all(priors == 0.5) and priors.shape == (500,)

    def test_dirichlet_mean(self, rng):
        for phi in (0.25, 1.0, 4.0):
            theta, _ = sample_parameters(PriorSpec("dirichlet", phi), (400, 500), rng)
            assert np.all(theta >= 0)
            # E[1 - q] = E[exp(-theta)] = phi / (phi + 1)
            assert_allclose(np.exp(-theta).mean(), phi / (phi + 1.0), rtol=0.02)

    def test_large_phi_gives_weak_links(self, rng):
        theta, _ = sample_parameters(PriorSpec("dirichlet", 1e4), (100, 100), rng)
        q = -np.expm1(-theta)
        assert q.max() < 1e-2
        assert np.all((q >= 0) & (q < 1))

    def test_small_phi_keeps_saturated_links_finite(self, rng):
        theta, _ = sample_parameters(PriorSpec("dirichlet", 0.01), (100, 100), rng)
        assert np.all(np.isfinite(theta))
        assert np.median(-np.expm1(-theta)) > 0.99


class TestTrialStreams:
    def test_deterministic(self):
        a = trial_rng(7, 3, 11).random(5)
        b = trial_rng(7, 3, 11).random(5)
        assert np.array_equal(a, b)

    def test_independent_of_neighbours(self):
        draws = {key: trial_rng(*key).random() for key in [(7, 0, 0), (7, 0, 1), (7, 1, 0), (8, 0, 0)]}
        assert len(set(draws.values())) == 4

    def test_complete_bipartite_layout(self, rng):
        theta, priors = sample_parameters(PriorSpec("gaussian", 1.0), (3, 2), rng)
        net = complete_bipartite("sigmoid", theta, priors, leak=0.2)
        assert net.l2 == (0, 1, 5)
        assert net.l1 == (2, 3, 4)
        assert all(net.fan_in(i) == 3 for i in net.l1)
        assert_allclose(net.weights[2:5, 0:2], theta)
