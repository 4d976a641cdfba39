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
"""Sparse variational Gaussian process classification head.

Each class has an independent GP over the latent space, sharing the kernel and K learnable inducing points Z.
The variational posterior over the inducing outputs is stored in whitened coordinates u = L v with L L^T = K_ZZ,
so q(v) = N(m, S) with S = L_S L_S^T and the prior over v is standard normal.

Prediction applies a softmax to the mean of the latent functions, training maximizes the ELBO
with the expected log softmax estimated by Monte Carlo samples of the marginals.
"""

import logging
from collections import namedtuple

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy import linalg

from .errors import ConfigError, ShapeError
from .evaluate import UncertaintyScores, categorical_entropy
from .numcore import as_tensor, cholesky, clip, log_softmax, random_generator, softmax, solve_triangular, stack
from .params import ParameterSet

LOGGER = logging.getLogger(__name__)

KERNEL_FAMILIES = ('rbf', 'rq', 'matern12', 'matern32', 'matern52')
TRAIN_SAMPLES = 8
EVAL_SAMPLES = 32
MIN_VARIANCE = 1e-10
INIT_STREAM = 51
INDUCING_STREAM = 52


def softplus_inverse(value):
    return np.log(np.expm1(value))


class KernelConfig(object):
    """Kernel family and its initial hyperparameters

    Args:
        family (str): rbf, rq, matern12, matern32 or matern52
        lengthscale (float): Lengthscale l
        outputscale (float): Output variance sigma^2
        rq_alpha (float): Shape alpha of rational quadratic kernel, fixed during training

    """

    def __init__(self, family='rbf', lengthscale=1.0, outputscale=1.0, rq_alpha=1.0):
        if family not in KERNEL_FAMILIES:
            raise ConfigError('Unknown kernel {0}, must be one of {1}'.format(family, KERNEL_FAMILIES), 'family')
        if not (lengthscale > 0 and outputscale > 0 and rq_alpha > 0):
            raise ConfigError('Kernel hyperparameters must be positive', 'lengthscale')
        self.family = family
        self.lengthscale = float(lengthscale)
        self.outputscale = float(outputscale)
        self.rq_alpha = float(rq_alpha)

    def to_dict(self):
        return {
            'family': self.family,
            'lengthscale': self.lengthscale,
            'outputscale': self.outputscale,
            'rq_alpha': self.rq_alpha,
        }


def squared_distances(a, b):
    """Pairwise squared Euclidean distances, clipped at zero"""
    a = as_tensor(a)
    b = as_tensor(b)
    a2 = a.square().sum(axis=1, keepdims=True)
    b2 = b.square().sum(axis=1, keepdims=True).T
    return clip(a2 + b2 - 2.0 * (a @ b.T), lower=0.0)


def gram(family, a, b, lengthscale, outputscale, rq_alpha=1.0):
    """Gram matrix of a kernel

    Args:
        family (str): Kernel family
        a (Tensor): n x H points
        b (Tensor): m x H points
        lengthscale (Tensor|float): Lengthscale
        outputscale (Tensor|float): Output variance
        rq_alpha (float): Shape of rational quadratic kernel

    Returns:
        Tensor: n x m Gram matrix
    """
    r2 = squared_distances(a, b) / as_tensor(lengthscale).square()
    if family == 'rbf':
        shape = (-0.5 * r2).exp()
    elif family == 'rq':
        shape = (-rq_alpha * (1.0 + r2 / (2.0 * rq_alpha)).log()).exp()
    else:
        r = clip(r2, lower=1e-36).sqrt()
        if family == 'matern12':
            shape = (-r).exp()
        elif family == 'matern32':
            scaled = np.sqrt(3.0) * r
            shape = (1.0 + scaled) * (-scaled).exp()
        elif family == 'matern52':
            scaled = np.sqrt(5.0) * r
            shape = (1.0 + scaled + (5.0 / 3.0) * r2) * (-scaled).exp()
        else:
            raise ConfigError('Unknown kernel {0}'.format(family), 'family')
    return as_tensor(outputscale) * shape


def kernel_eval(cfg, a, b):
    """Gram matrix of the kernel described by cfg between rows of a and b

    Args:
        cfg (KernelConfig): Kernel
        a (Tensor|numpy.ndarray): n x H points
        b (Tensor|numpy.ndarray): m x H points

    Returns:
        Tensor: n x m Gram matrix
    """
    return gram(cfg.family, a, b, cfg.lengthscale, cfg.outputscale, cfg.rq_alpha)


def init_inducing(z_sample, num_inducing, seed):
    """Inducing point locations as K-means centroids of an initial embedding

    Args:
        z_sample (numpy.ndarray): M x H latents
        num_inducing (int): Number of inducing points K
        seed (int): Random seed

    Returns:
        numpy.ndarray: K x H centroids

    Raises:
        ConfigError: When M < K
    """
    z_sample = np.asarray(getattr(z_sample, 'data', z_sample), dtype=np.float64)
    if len(z_sample) < num_inducing:
        raise ConfigError('{0} latents can not initialize {1} inducing points'.format(len(z_sample), num_inducing),
                          'num_inducing')
    if np.all(z_sample == z_sample[0]):
        LOGGER.warning('All latents are identical, inducing points collapse onto one location')
        return np.repeat(z_sample[:1], num_inducing, axis=0)
    rng = random_generator(seed, INDUCING_STREAM)
    centroids, _ = kmeans2(z_sample, num_inducing, iter=10, minit='points', seed=rng, missing='warn')
    return centroids


GPPrediction = namedtuple('GPPrediction', ['mu', 'var', 'probs'])
"""Per class marginal mean and variance of the latent functions and softmax of the mean"""


class GPHead(ParameterSet):
    """Sparse variational GP head with whitened variational parameters

    Args:
        latent_dim (int): Latent dimension H
        num_classes (int): Number of classes C, one GP per class
        num_inducing (int): Number of inducing points K
        kernel (KernelConfig): Kernel
        num_samples (int): Monte Carlo samples per ELBO evaluation in training
        seed (int): Seed of initialization

    The variational parameters start at m = 0 and S = I, where the KL term is zero.

    """
    head_type = 'due'

    def __init__(self, latent_dim, num_classes, num_inducing=20, kernel=None, num_samples=TRAIN_SAMPLES, seed=0):
        super(GPHead, self).__init__()
        self.latent_dim = int(latent_dim)
        self._num_classes = int(num_classes)
        self.num_inducing = int(num_inducing)
        self.kernel = KernelConfig() if kernel is None else kernel
        self.num_samples = int(num_samples)
        if self.num_samples < 1:
            raise ConfigError('At least one Monte Carlo sample required', 'num_samples')
        rng = random_generator(seed, INIT_STREAM)
        k = self.num_inducing
        self.add_parameter('inducing', rng.standard_normal((k, self.latent_dim)))
        self.add_parameter('var_mean', np.zeros((self._num_classes, k)))
        self.add_parameter('chol_offdiag', np.zeros((self._num_classes, k, k)))
        self.add_parameter('chol_diag_raw', np.full((self._num_classes, k), softplus_inverse(1.0)))
        self.add_parameter('raw_lengthscale', [softplus_inverse(self.kernel.lengthscale)])
        self.add_parameter('raw_outputscale', [softplus_inverse(self.kernel.outputscale)])
        self._strict_lower = np.tril(np.ones((k, k)), -1)
        self._eye = np.eye(k)

    @property
    def num_classes(self):
        return self._num_classes

    def lengthscale(self):
        return self.param('raw_lengthscale').softplus()

    def outputscale(self):
        return self.param('raw_outputscale').softplus()

    def gram(self, a, b):
        return gram(self.kernel.family, a, b, self.lengthscale(), self.outputscale(), self.kernel.rq_alpha)

    def chol_factor(self, c):
        """Lower triangular factor L_c of the whitened covariance of class c with softplus-positive diagonal"""
        offdiag = self.param('chol_offdiag')[c]
        diag = self.param('chol_diag_raw')[c].softplus()
        return offdiag * self._strict_lower + self._eye * diag

    def inducing_cholesky(self):
        z = self.param('inducing')
        return cholesky(self.gram(z, z))

    def kl_divergence(self):
        """Sum over classes of KL(q(v_c) || N(0, I)) = 1/2 (|m|^2 + |L|_F^2 - K - 2 sum log diag L)"""
        m = self.param('var_mean')
        offdiag = self.param('chol_offdiag')
        diag = self.param('chol_diag_raw').softplus()
        frobenius = (offdiag.square() * self._strict_lower).sum() + diag.square().sum()
        return 0.5 * (m.square().sum() + frobenius - self._num_classes * self.num_inducing) - diag.log().sum()

    def predict(self, z, num_samples=None):
        """Marginal predictive distribution of the latent functions

        mu = A^T m and var = k(z, z) - sum(A^2) + sum((L_c^T A)^2) with A = L^-1 K_Zz.

        Args:
            z (Tensor): N x H latents
            num_samples (int): unused, probabilities are the softmax of the mean

        Returns:
            GPPrediction: N x C mean, variance and class probabilities

        Raises:
            NumericalError: When K_ZZ is not positive definite after jitter
        """
        z = as_tensor(z)
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise ShapeError('Expected N x {0} latents, got {1}'.format(self.latent_dim, z.shape))
        factor = self.inducing_cholesky()
        a = solve_triangular(factor, self.gram(self.param('inducing'), z))
        prior_var = self.outputscale() - a.square().sum(axis=0)
        m = self.param('var_mean')
        means = []
        variances = []
        for c in range(self._num_classes):
            means.append(a.T @ m[c].reshape(self.num_inducing, 1))
            projected = self.chol_factor(c).T @ a
            variances.append(prior_var + projected.square().sum(axis=0))
        mu = stack(means, axis=1).reshape(len(z), self._num_classes)
        var = clip(stack(variances, axis=1), lower=MIN_VARIANCE)
        return GPPrediction(mu, var, softmax(mu, axis=1))

    def elbo(self, z, labels, n_total, rng, num_samples=None):
        """Evidence lower bound of a batch scaled to the full training set

        (n_total / N) sum_i E_q[log softmax_y(f_i)] - sum_c KL(q(v_c) || p(v_c)),
        the expectation estimated with reparameterized samples of the marginals.

        Args:
            z (Tensor): N x H latents
            labels (array_like): N labels
            n_total (int): Size of training set
            rng (numpy.random.Generator): Source of the Monte Carlo noise
            num_samples (int): Monte Carlo samples, defaults to the training setting

        Returns:
            Tensor: scalar
        """
        num_samples = self.num_samples if num_samples is None else int(num_samples)
        if num_samples < 1:
            raise ConfigError('At least one Monte Carlo sample required', 'num_samples')
        labels = np.asarray(labels, dtype=np.int64)
        prediction = self.predict(z)
        std = prediction.var.sqrt()
        rows = np.arange(len(labels))
        noise = rng.standard_normal((num_samples,) + prediction.mu.shape)
        expected = 0.0
        for sample in noise:
            f = prediction.mu + std * sample
            expected = log_softmax(f, axis=1)[rows, labels] + expected
        expected = expected / num_samples
        return (float(n_total) / len(labels)) * expected.sum() - self.kl_divergence()

    def gaussian_elbo(self, z, targets, noise_var, n_total=None):
        """ELBO of the first latent function under a Gaussian likelihood, for regression checks

        Args:
            z (Tensor): N x H inputs
            targets (array_like): N real targets
            noise_var (float): Likelihood variance
            n_total (int): Size of training set, defaults to N

        Returns:
            Tensor: scalar
        """
        targets = np.asarray(targets, dtype=np.float64)
        n_total = len(targets) if n_total is None else n_total
        prediction = self.predict(z)
        mu = prediction.mu[:, 0]
        var = prediction.var[:, 0]
        expected = -0.5 * np.log(2 * np.pi * noise_var) - ((mu - targets).square() + var) / (2.0 * noise_var)
        return (float(n_total) / len(targets)) * expected.sum() - self.kl_divergence()

    def fit_gaussian_posterior(self, z, targets, noise_var):
        """Set q of the first latent function to the optimum under a Gaussian likelihood

        S = (I + A A^T / noise_var)^-1 and m = S A y / noise_var, with A = L^-1 K_Zz.
        With the inducing points on the inputs this is the exact GP posterior.

        Args:
            z (numpy.ndarray): N x H inputs
            targets (array_like): N real targets
            noise_var (float): Likelihood variance
        """
        targets = np.asarray(targets, dtype=np.float64)
        factor = self.inducing_cholesky().data
        a = linalg.solve_triangular(factor, self.gram(self.param('inducing'), z).data, lower=True)
        precision = self._eye + a @ a.T / noise_var
        cov = np.linalg.inv(precision)
        cov = 0.5 * (cov + cov.T)
        mean = cov @ a @ targets / noise_var
        cov_factor = np.linalg.cholesky(cov)
        self.param('var_mean').data[0] = mean
        self.param('chol_offdiag').data[0] = np.tril(cov_factor, -1)
        self.param('chol_diag_raw').data[0] = softplus_inverse(np.diag(cov_factor))

    def loss(self, z, labels, n_total, rng):
        """Negative ELBO per training sample"""
        return -self.elbo(z, labels, n_total, rng) / float(n_total)

    def scores(self, z):
        """Predicted label and predictive entropy, the only uncertainty a GP head provides"""
        probs = self.predict(z).probs.data
        return UncertaintyScores(predicted_label=probs.argmax(axis=1),
                                 predictive=categorical_entropy(probs),
                                 probs=probs)

    def initialize(self, z_sample, seed):
        """Place inducing points on K-means centroids of an initial embedding"""
        self.param('inducing').data = init_inducing(z_sample, self.num_inducing, seed)
        LOGGER.info('Initialized %d inducing points by k-means', self.num_inducing)

    def grid_field(self, z):
        return 'predictive_entropy', categorical_entropy(self.predict(z).probs.data)

    def to_dict(self):
        return {
            'type': self.head_type,
            'latent_dim': self.latent_dim,
            'num_classes': self._num_classes,
            'num_inducing': self.num_inducing,
            'kernel': self.kernel.to_dict(),
            'num_samples': self.num_samples,
        }

    @classmethod
    def from_dict(cls, fields, seed=0):
        return cls(fields['latent_dim'], fields['num_classes'], fields['num_inducing'],
                   KernelConfig(**fields['kernel']), fields['num_samples'], seed)
