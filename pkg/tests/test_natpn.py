# Copyright 2016 Netherlands eScience Center
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import special, stats

from dumlab.errors import ConfigError, DomainError, ShapeError
from dumlab.natpn import (EVIDENCE_LOG_CLAMP, BudgetConfig, EvidentialPosterior, NatPNHead, PriorConfig,
                          bayesian_loss, bayesian_update, dirichlet_entropy, evidence, scores)
from dumlab.numcore import Tensor
from dumlab.optim import Optimizer
from .utils import numerical_gradient


@pytest.fixture
def prior():
    return PriorConfig(3)


@pytest.fixture
def chi():
    return Tensor([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])


class TestPriorConfig(object):
    def test_defaults(self, prior):
        assert prior.n_prior == 3.0
        assert_allclose(prior.chi_prior, [1 / 3.0] * 3)

    @pytest.mark.parametrize('fields', [
        {'n_prior': 0.0},
        {'chi_prior': [0.5, 0.5, 0.0]},
        {'chi_prior': [0.5, 0.6, 0.1]},
        {'chi_prior': [0.5, 0.5]},
        {'entropy_lambda': -1.0},
    ])
    def test_invalid(self, fields):
        with pytest.raises(ConfigError):
            PriorConfig(3, **fields)


class TestBudget(object):
    def test_dim_normalized(self):
        assert_allclose(BudgetConfig().log_budget(16), 8 * np.log(4 * np.pi))

    def test_constant(self):
        assert_allclose(BudgetConfig('constant', 100.0).log_budget(16), np.log(100.0))

    def test_constant_needs_value(self):
        with pytest.raises(ConfigError):
            BudgetConfig('constant')


class TestBayesianUpdate(object):
    def test_zero_evidence_gives_prior(self, prior, chi):
        posterior = bayesian_update(chi, Tensor([0.0, 0.0]), prior)
        assert_array_equal(posterior.chi_post.data, np.full((2, 3), 1 / 3.0))
        assert_array_equal(posterior.n_post.data, [3.0, 3.0])
        assert_allclose(posterior.alpha.data, 1.0)

    def test_large_evidence_follows_chi(self, prior, chi):
        posterior = bayesian_update(chi, Tensor([1e9, 1e9]), prior)
        assert_allclose(posterior.chi_post.data, chi.data, rtol=1e-7)

    def test_alpha_is_n_post_chi_post(self, prior, chi):
        posterior = bayesian_update(chi, Tensor([2.0, 5.0]), prior)
        assert_allclose(posterior.alpha.data, posterior.n_post.data[:, None] * posterior.chi_post.data)
        assert_allclose(posterior.alpha.data[0], [1.0 + 1.4, 1.0 + 0.4, 1.0 + 0.2])

    def test_shape_mismatch(self, prior, chi):
        with pytest.raises(ShapeError):
            bayesian_update(chi, Tensor([1.0, 2.0, 3.0]), prior)


def test_evidence_clamped():
    n = evidence(Tensor([0.0, 1000.0]), BudgetConfig('constant', 2.0), 4)
    assert_allclose(n.data, [2.0, np.exp(EVIDENCE_LOG_CLAMP)])


def test_dirichlet_entropy():
    alpha = np.array([[1.0, 2.0, 3.0], [0.5, 0.5, 4.0]])
    expected = [stats.dirichlet(row).entropy() for row in alpha]
    assert_allclose(dirichlet_entropy(Tensor(alpha)).data, expected)


def test_dirichlet_entropy_matches_monte_carlo():
    rng = np.random.default_rng(0)
    for alpha in rng.uniform(1.0, 5.0, (20, 3)):
        samples = rng.dirichlet(alpha, 100000)
        neg_log_pdf = -stats.dirichlet.logpdf(samples.T, alpha)
        standard_error = neg_log_pdf.std() / np.sqrt(len(neg_log_pdf))
        analytic = dirichlet_entropy(Tensor(alpha.reshape(1, 3))).item()
        assert abs(neg_log_pdf.mean() - analytic) < 3.5 * standard_error


def test_evidence_ordering_does_not_depend_on_budget():
    log_prob = Tensor(np.random.default_rng(1).normal(-3.0, 2.0, 50))
    normalized = evidence(log_prob, BudgetConfig('dim_normalized'), 4).data
    constant = evidence(log_prob, BudgetConfig('constant', 1e3), 4).data
    assert_array_equal(np.argsort(normalized), np.argsort(constant))
    assert_allclose(constant / normalized, 1e3 / (4 * np.pi) ** 2)


class TestBayesianLoss(object):
    def test_value(self):
        alpha = np.array([[2.0, 1.0], [1.0, 3.0]])
        posterior = EvidentialPosterior(Tensor(alpha), None, None)
        loss = bayesian_loss(posterior, [0, 1], 0.0)
        expected = -np.mean([special.digamma(2.0) - special.digamma(3.0), special.digamma(3.0) - special.digamma(4.0)])
        assert_allclose(loss.item(), expected)

    def test_entropy_regularizer_lowers_loss(self):
        posterior = EvidentialPosterior(Tensor([[2.0, 1.0]]), None, None)
        plain = bayesian_loss(posterior, [0], 0.0).item()
        regularized = bayesian_loss(posterior, [0], 0.1).item()
        assert_allclose(plain - regularized, 0.1 * stats.dirichlet([2.0, 1.0]).entropy())

    @pytest.mark.parametrize('entropy_lambda', [0.0, 0.1])
    def test_gradient(self, entropy_lambda):
        alpha = Tensor(np.random.default_rng(2).uniform(0.5, 4.0, (3, 4)), requires_grad=True)
        labels = [0, 3, 1]
        bayesian_loss(EvidentialPosterior(alpha, None, None), labels, entropy_lambda).backward()

        def loss(value):
            return bayesian_loss(EvidentialPosterior(Tensor(value), None, None), labels, entropy_lambda).item()
        expected = numerical_gradient(loss, alpha.data)
        assert_allclose(alpha.grad, expected, rtol=1e-5, atol=1e-8)

    def test_minimizer_entropy_grows_with_lambda(self):
        entropies = []
        for entropy_lambda in (0.0, 0.1, 1.0):
            log_alpha = Tensor(np.zeros((1, 3)), requires_grad=True)
            optimizer = Optimizer('adamw', [log_alpha])
            for _ in range(150):
                optimizer.zero_grad()
                bayesian_loss(EvidentialPosterior(log_alpha.exp(), None, None), [0], entropy_lambda).backward()
                optimizer.step(0.05)
            entropies.append(dirichlet_entropy(np.exp(log_alpha.data)).item())
        assert entropies[0] < entropies[1] < entropies[2]

    def test_non_positive_concentration(self):
        with pytest.raises(DomainError):
            bayesian_loss(EvidentialPosterior(Tensor([[0.0, 1.0]]), None, None), [0], 0.0)


def test_scores(prior, chi):
    posterior = bayesian_update(chi, Tensor([2.0, 50.0]), prior)
    result = scores(posterior)
    assert_array_equal(result.predicted_label, [0, 2])
    assert_allclose(result.epistemic, [-5.0, -53.0])
    assert_allclose(result.aleatoric, result.predictive)
    assert_allclose(result.probs.sum(axis=1), 1.0)


class TestNatPNHead(object):
    def test_loss_gradient_reaches_decoder_and_flow(self):
        head = NatPNHead(2, PriorConfig(3), flow_layers=2, flow_nll_weight=0.5, seed=0)
        z = Tensor(np.random.default_rng(0).standard_normal((8, 2)), requires_grad=True)
        head.loss(z, np.arange(8) % 3).backward()
        assert np.any(head.param('decoder.weight').grad != 0)
        assert np.any(head.flow.param('layer0.beta_raw').grad != 0)
        assert np.any(z.grad != 0)

    def test_far_latents_have_less_evidence(self):
        head = NatPNHead(2, PriorConfig(3), flow_layers=2, seed=0)
        result = head.scores(np.array([[0.0, 0.0], [10.0, 10.0]]))
        assert result.epistemic[1] > result.epistemic[0]

    def test_dict_round_trip(self):
        head = NatPNHead(4, PriorConfig(3, n_prior=10.0, entropy_lambda=1e-3), BudgetConfig('constant', 5.0), 3, 0.1)
        clone = NatPNHead.from_dict(head.to_dict())
        assert clone.to_dict() == head.to_dict()
        assert_array_equal(clone.param('decoder.weight').data, head.param('decoder.weight').data)

    def test_grid_field(self):
        head = NatPNHead(2, PriorConfig(2), flow_layers=1)
        kind, values = head.grid_field(np.zeros((3, 2)))
        assert kind == 'log_density'
        assert values.shape == (3,)
