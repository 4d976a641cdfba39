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
"""Evidential uncertainty head with an input dependent Dirichlet posterior.

A linear decoder predicts class probabilities chi from the latent z,
a radial flow turns the latent density into an evidence count n = N_H p(z),
and the prior Dirichlet is updated with n pseudo observations of chi.
Few evidence means the posterior stays close to the prior, which marks the input as unfamiliar.
"""

import logging

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .evaluate import UncertaintyScores, categorical_entropy
from .flows import RadialFlow
from .numcore import as_tensor, clip, digamma, lgamma, random_generator, softmax
from .params import ParameterSet

LOGGER = logging.getLogger(__name__)

EVIDENCE_LOG_CLAMP = 30.0
"""Largest log evidence, exp(30) keeps the Dirichlet concentrations finite"""
BUDGET_MODES = ('dim_normalized', 'constant')
INIT_STREAM = 41


class PriorConfig(object):
    """Dirichlet prior of the Bayesian update

    Args:
        num_classes (int): Number of classes C
        n_prior (float): Number of prior pseudo observations, defaults to C
        chi_prior (array_like): Prior class probabilities, defaults to uniform
        entropy_lambda (float): Weight of entropy regularization

    Raises:
        ConfigError: When n_prior is not positive, chi_prior is not a positive simplex vector or lambda is negative
    """

    def __init__(self, num_classes, n_prior=None, chi_prior=None, entropy_lambda=0.0):
        self.num_classes = int(num_classes)
        self.n_prior = float(num_classes if n_prior is None else n_prior)
        if chi_prior is None:
            chi_prior = np.full(self.num_classes, 1.0 / self.num_classes)
        self.chi_prior = np.asarray(chi_prior, dtype=np.float64)
        self.entropy_lambda = float(entropy_lambda)
        if not self.n_prior > 0:
            raise ConfigError('n_prior must be positive', 'n_prior')
        if self.chi_prior.shape != (self.num_classes,) or np.any(self.chi_prior <= 0) or \
                abs(self.chi_prior.sum() - 1) > 1e-9:
            raise ConfigError('chi_prior must be a strictly positive vector summing to 1', 'chi_prior')
        if self.entropy_lambda < 0:
            raise ConfigError('entropy_lambda must be non-negative', 'entropy_lambda')

    def to_dict(self):
        return {
            'num_classes': self.num_classes,
            'n_prior': self.n_prior,
            'chi_prior': self.chi_prior.tolist(),
            'entropy_lambda': self.entropy_lambda,
        }


class BudgetConfig(object):
    """Certainty budget N_H which scales latent densities into evidence counts

    Args:
        mode (str): `dim_normalized` with log N_H = H/2 log(4 pi), or `constant`
        constant_value (float): N_H in constant mode

    """

    def __init__(self, mode='dim_normalized', constant_value=None):
        if mode not in BUDGET_MODES:
            raise ConfigError('Unknown budget mode {0}, must be one of {1}'.format(mode, BUDGET_MODES), 'mode')
        if mode == 'constant' and not (constant_value is not None and constant_value > 0):
            raise ConfigError('Constant budget must be positive', 'constant_value')
        self.mode = mode
        self.constant_value = None if constant_value is None else float(constant_value)

    def log_budget(self, latent_dim):
        if self.mode == 'dim_normalized':
            return 0.5 * latent_dim * np.log(4 * np.pi)
        return float(np.log(self.constant_value))

    def to_dict(self):
        return {'mode': self.mode, 'constant_value': self.constant_value}


class EvidentialPosterior(object):
    """Dirichlet posterior per input

    Attributes:
        alpha (Tensor): N x C concentrations, alpha = n_post chi_post
        n_post (Tensor): N posterior evidence
        chi_post (Tensor): N x C posterior class probabilities

    """

    def __init__(self, alpha, n_post, chi_post):
        self.alpha = alpha
        self.n_post = n_post
        self.chi_post = chi_post


def evidence(flow_log_prob, budget, latent_dim):
    """Evidence n = N_H p(z), clamped at exp(30)

    Args:
        flow_log_prob (Tensor): N latent log densities
        budget (BudgetConfig): Certainty budget
        latent_dim (int): Latent dimension H

    Returns:
        Tensor: N evidence counts
    """
    return clip(as_tensor(flow_log_prob) + budget.log_budget(latent_dim), upper=EVIDENCE_LOG_CLAMP).exp()


def bayesian_update(chi, n, prior):
    """Conjugate update of the prior Dirichlet with n pseudo observations of chi

    Args:
        chi (Tensor): N x C class probabilities
        n (Tensor): N evidence counts
        prior (PriorConfig): Prior

    Returns:
        EvidentialPosterior: posterior
    """
    chi = as_tensor(chi)
    n = as_tensor(n)
    if chi.ndim != 2 or chi.shape[1] != prior.num_classes or n.shape != (chi.shape[0],):
        raise ShapeError('Expected N x {0} chi and N evidence, got {1} and {2}'.format(
            prior.num_classes, chi.shape, n.shape))
    n_post = n + prior.n_prior
    # convex weights, so n = 0 reproduces the prior exactly
    prior_weight = (prior.n_prior / n_post).reshape(len(n), 1)
    evidence_weight = (n / n_post).reshape(len(n), 1)
    chi_post = prior_weight * prior.chi_prior + evidence_weight * chi
    alpha = n_post.reshape(len(n), 1) * chi_post
    return EvidentialPosterior(alpha, n_post, chi_post)


def dirichlet_entropy(alpha):
    """Differential entropy of Dir(alpha) per row

    log B(alpha) + (alpha_0 - C) digamma(alpha_0) - sum_c (alpha_c - 1) digamma(alpha_c)

    Args:
        alpha (Tensor): N x C concentrations

    Returns:
        Tensor: N entropies
    """
    alpha = as_tensor(alpha)
    num_classes = alpha.shape[1]
    alpha0 = alpha.sum(axis=1)
    log_beta = lgamma(alpha).sum(axis=1) - lgamma(alpha0)
    return log_beta + (alpha0 - num_classes) * digamma(alpha0) - ((alpha - 1.0) * digamma(alpha)).sum(axis=1)


def bayesian_loss(posterior, labels, entropy_lambda):
    """Expected categorical log likelihood under the posterior with entropy regularization

    Mean over the batch of -(digamma(alpha_y) - digamma(alpha_0)) - lambda H[Dir(alpha)].

    Args:
        posterior (EvidentialPosterior): Posterior per input
        labels (array_like): N labels
        entropy_lambda (float): Weight of entropy regularization

    Returns:
        Tensor: scalar loss

    Raises:
        DomainError: When a concentration is not positive
    """
    alpha = as_tensor(posterior.alpha)
    if np.any(alpha.data <= 0):
        raise DomainError('Dirichlet concentrations must be positive')
    labels = np.asarray(labels, dtype=np.int64)
    alpha_y = alpha[np.arange(len(labels)), labels]
    alpha0 = alpha.sum(axis=1)
    expected_log_likelihood = digamma(alpha_y) - digamma(alpha0)
    if entropy_lambda:
        return (-expected_log_likelihood - entropy_lambda * dirichlet_entropy(alpha)).mean()
    return (-expected_log_likelihood).mean()


def scores(posterior):
    """Uncertainty scores of an evidential posterior

    The predicted label is the argmax of the posterior mean alpha / alpha_0.
    Aleatoric and predictive uncertainty are both the entropy of the posterior mean,
    epistemic uncertainty is the negated posterior evidence.

    Args:
        posterior (EvidentialPosterior): Posterior per input

    Returns:
        dumlab.evaluate.UncertaintyScores: scores
    """
    alpha = as_tensor(posterior.alpha).data
    probs = alpha / alpha.sum(axis=1, keepdims=True)
    entropy = categorical_entropy(probs)
    return UncertaintyScores(predicted_label=probs.argmax(axis=1),
                             predictive=entropy,
                             aleatoric=entropy.copy(),
                             epistemic=-as_tensor(posterior.n_post).data,
                             probs=probs)


class NatPNHead(ParameterSet):
    """Evidential head with linear decoder and radial flow density

    Args:
        latent_dim (int): Latent dimension H
        prior (PriorConfig): Dirichlet prior, also defines the number of classes
        budget (BudgetConfig): Certainty budget
        flow_layers (int): Number of radial flow layers
        flow_nll_weight (float): Weight of flow maximum likelihood term added to the Bayesian loss
        seed (int): Seed of parameter initialization

    """
    head_type = 'natpn'

    def __init__(self, latent_dim, prior, budget=None, flow_layers=8, flow_nll_weight=0.0, seed=0):
        super(NatPNHead, self).__init__()
        self.latent_dim = int(latent_dim)
        self.prior = prior
        self.budget = BudgetConfig() if budget is None else budget
        self.flow_nll_weight = float(flow_nll_weight)
        rng = random_generator(seed, INIT_STREAM)
        num_classes = prior.num_classes
        self.add_parameter('decoder.weight', rng.standard_normal((self.latent_dim, num_classes)) /
                           np.sqrt(self.latent_dim))
        self.add_parameter('decoder.bias', np.zeros(num_classes))
        self.flow = self.add_child('flow', RadialFlow(self.latent_dim, flow_layers, seed))

    @property
    def num_classes(self):
        return self.prior.num_classes

    def posterior(self, z):
        """Evidential posterior of latents

        Args:
            z (Tensor): N x H latents

        Returns:
            EvidentialPosterior: posterior
        """
        z = as_tensor(z)
        chi = softmax(z @ self.param('decoder.weight') + self.param('decoder.bias'), axis=1)
        log_prob = self.flow.log_prob(z)
        n = evidence(log_prob, self.budget, self.latent_dim)
        return bayesian_update(chi, n, self.prior)

    def loss(self, z, labels, n_total=None, rng=None):
        """Bayesian loss of latents, plus the weighted flow negative log likelihood when configured

        Args:
            z (Tensor): N x H latents
            labels (array_like): N labels
            n_total (int): Size of training set, unused
            rng (numpy.random.Generator): unused

        Returns:
            Tensor: scalar
        """
        loss = bayesian_loss(self.posterior(z), labels, self.prior.entropy_lambda)
        if self.flow_nll_weight > 0:
            loss = loss + self.flow_nll_weight * self.flow.fit_nll_loss(z)
        return loss

    def scores(self, z):
        """Uncertainty scores of latents z"""
        return scores(self.posterior(z))

    def initialize(self, z_sample, seed):
        """Nothing depends on the initial embedding"""

    def grid_field(self, z):
        return 'log_density', self.flow.log_prob(z).data

    def to_dict(self):
        return {
            'type': self.head_type,
            'latent_dim': self.latent_dim,
            'prior': self.prior.to_dict(),
            'budget': self.budget.to_dict(),
            'flow_layers': self.flow.num_layers,
            'flow_nll_weight': self.flow_nll_weight,
        }

    @classmethod
    def from_dict(cls, fields, seed=0):
        prior = PriorConfig(**fields['prior'])
        budget = BudgetConfig(**fields['budget'])
        return cls(fields['latent_dim'], prior, budget, fields['flow_layers'], fields['flow_nll_weight'], seed)
