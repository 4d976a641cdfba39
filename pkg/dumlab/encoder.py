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
"""Multi layer perceptron encoder which maps inputs to a latent space.

The encoder has three architecture knobs:

* constraint `none`: plain MLP with relu activations
* constraint `residual`: hidden layers become residual blocks h + relu(W h + b)
* constraint `bilipschitz`: residual blocks plus soft spectral normalization of every linear and batch norm layer

Further a decoder can reconstruct the input from the latent and a batch norm layer can be placed on the latent.
"""

import logging

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError
from .numcore import as_tensor, power_iteration, random_generator, unit_vector
from .params import ParameterSet

LOGGER = logging.getLogger(__name__)

CONSTRAINTS = ('none', 'residual', 'bilipschitz')
LIPSCHITZ_DEFAULTS = {'due': 4.0, 'natpn': 5.0}
"""Lipschitz constant per head type, found by model selection on validation sets"""

BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.1

INIT_STREAM = 21
RESET_STREAM = 22


class EncoderConfig(object):
    """Architecture of an encoder

    Args:
        input_dim (int): Input dimension D
        hidden_dim (int): Width of hidden layers
        num_layers (int): Number of linear layers, at least 2
        latent_dim (int): Latent dimension H
        constraint (str): none, residual or bilipschitz
        lipschitz_c (float): Lipschitz constant c of the bilipschitz constraint
        use_final_batchnorm (bool): Batch norm on the latent
        recon_lambda (float): Weight of reconstruction term, a decoder is built when positive
        power_iteration_steps (int): Power iteration steps per spectral step

    Raises:
        ConfigError: When a field is out of range
    """

    def __init__(self, input_dim, hidden_dim=128, num_layers=4, latent_dim=16, constraint='none',
                 lipschitz_c=4.0, use_final_batchnorm=False, recon_lambda=0.0, power_iteration_steps=1):
        if constraint not in CONSTRAINTS:
            raise ConfigError('Unknown constraint {0}, must be one of {1}'.format(constraint, CONSTRAINTS),
                              'constraint')
        if num_layers < 2:
            raise ConfigError('Encoder needs at least 2 layers', 'num_layers')
        if min(input_dim, hidden_dim, latent_dim) < 1:
            raise ConfigError('Dimensions must be positive', 'latent_dim')
        if constraint == 'bilipschitz' and not lipschitz_c > 0:
            raise ConfigError('Lipschitz constant must be positive', 'lipschitz_c')
        if recon_lambda < 0:
            raise ConfigError('Reconstruction weight must be non-negative', 'recon_lambda')
        if power_iteration_steps < 1:
            raise ConfigError('At least one power iteration step required', 'power_iteration_steps')
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        self.num_layers = int(num_layers)
        self.latent_dim = int(latent_dim)
        self.constraint = constraint
        self.lipschitz_c = float(lipschitz_c)
        self.use_final_batchnorm = bool(use_final_batchnorm)
        self.recon_lambda = float(recon_lambda)
        self.power_iteration_steps = int(power_iteration_steps)

    @property
    def residual(self):
        return self.constraint in ('residual', 'bilipschitz')

    @property
    def spectral(self):
        return self.constraint == 'bilipschitz'

    def layer_dims(self):
        """(in, out) dimensions of each linear layer"""
        dims = [self.input_dim] + [self.hidden_dim] * (self.num_layers - 1) + [self.latent_dim]
        return list(zip(dims[:-1], dims[1:]))

    def to_dict(self):
        return {
            'input_dim': self.input_dim,
            'hidden_dim': self.hidden_dim,
            'num_layers': self.num_layers,
            'latent_dim': self.latent_dim,
            'constraint': self.constraint,
            'lipschitz_c': self.lipschitz_c,
            'use_final_batchnorm': self.use_final_batchnorm,
            'recon_lambda': self.recon_lambda,
            'power_iteration_steps': self.power_iteration_steps,
        }

    @classmethod
    def from_dict(cls, fields):
        return cls(**fields)


def he_normal(fan_in, fan_out, rng):
    """Weights drawn from N(0, 2 / fan_in)"""
    return rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)


class Encoder(ParameterSet):
    """Core architecture mapping inputs x to latents z

    Weights are stored as (in, out) matrices, so a layer computes h W + b.

    Args:
        config (EncoderConfig): Architecture
        seed (int): Seed of weight initialization

    """

    def __init__(self, config, seed=0):
        super(Encoder, self).__init__()
        self.config = config
        rng = random_generator(seed, INIT_STREAM)
        for i, (fan_in, fan_out) in enumerate(config.layer_dims()):
            self.add_parameter('linear{0}.weight'.format(i), he_normal(fan_in, fan_out, rng))
            self.add_parameter('linear{0}.bias'.format(i), np.zeros(fan_out))
            if config.spectral:
                self.add_buffer('linear{0}.u'.format(i), unit_vector(fan_in, rng))
                self.add_buffer('linear{0}.sigma'.format(i), 0.0)
        if config.recon_lambda > 0:
            dims = [config.latent_dim] + [config.hidden_dim] * (config.num_layers - 1) + [config.input_dim]
            for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
                self.add_parameter('decoder{0}.weight'.format(i), he_normal(fan_in, fan_out, rng))
                self.add_parameter('decoder{0}.bias'.format(i), np.zeros(fan_out))
        if config.use_final_batchnorm:
            self._add_batchnorm()
        if config.spectral:
            self.spectral_step()

    @property
    def num_layers(self):
        return self.config.num_layers

    def _add_batchnorm(self):
        latent_dim = self.config.latent_dim
        self.add_parameter('batchnorm.weight', np.ones(latent_dim))
        self.add_parameter('batchnorm.bias', np.zeros(latent_dim))
        self.add_buffer('batchnorm.running_mean', np.zeros(latent_dim))
        self.add_buffer('batchnorm.running_var', np.ones(latent_dim))

    def attach_final_batchnorm(self):
        """Place a freshly initialized batch norm layer on the latent, unless there already is one"""
        if 'batchnorm.weight' in dict(self.named_parameters()):
            return
        self._add_batchnorm()
        self.config.use_final_batchnorm = True
        LOGGER.info('Attached batch norm to latent of encoder')

    def _spectral_scale(self, i):
        sigma = float(self.buffer('linear{0}.sigma'.format(i)))
        if sigma <= self.config.lipschitz_c:
            return 1.0
        return self.config.lipschitz_c / sigma

    def effective_weight(self, i):
        """Weight of linear layer i as used in forward

        Under the bilipschitz constraint the weight is W min(1, c / sigma_hat),
        where sigma_hat is the persisted power iteration estimate treated as a constant.

        Returns:
            Tensor: weight
        """
        weight = self.param('linear{0}.weight'.format(i))
        if not self.config.spectral:
            return weight
        scale = self._spectral_scale(i)
        if scale == 1.0:
            return weight
        return weight * scale

    def batchnorm_scale(self):
        """Factor on the batch norm scale which caps its Lipschitz constant at c"""
        if not self.config.spectral:
            return 1.0
        gamma = self.param('batchnorm.weight').data
        lipschitz = np.max(np.abs(gamma) / np.sqrt(self.buffer('batchnorm.running_var') + BATCHNORM_EPS))
        if lipschitz <= self.config.lipschitz_c:
            return 1.0
        return self.config.lipschitz_c / lipschitz

    def spectral_step(self, layers=None):
        """Advance the power iteration of constrained weights

        Args:
            layers (list[int]): Indices of linear layers to advance, defaults to all layers

        Raises:
            ConfigError: When the encoder is not bilipschitz constrained
        """
        if not self.config.spectral:
            raise ConfigError('Spectral step requires the bilipschitz constraint', 'constraint')
        for i in range(self.num_layers) if layers is None else layers:
            weight = self.param('linear{0}.weight'.format(i)).data
            sigma, u = power_iteration(weight, self.buffer('linear{0}.u'.format(i)),
                                       self.config.power_iteration_steps)
            self.set_buffer('linear{0}.u'.format(i), u)
            self.set_buffer('linear{0}.sigma'.format(i), sigma)

    def _check_finite(self, h, layer):
        if not np.all(np.isfinite(h.data)):
            raise NumericalError('Non-finite activations in encoder', layer=layer)

    def _batchnorm(self, z, training):
        gamma = self.param('batchnorm.weight')
        beta = self.param('batchnorm.bias')
        scale = self.batchnorm_scale()
        if scale != 1.0:
            gamma = gamma * scale
        if training:
            if len(z) < 2:
                raise ShapeError('Batch norm in train mode needs more than 1 sample')
            mean = z.mean(axis=0, keepdims=True)
            centered = z - mean
            var = centered.square().mean(axis=0, keepdims=True)
            count = len(z)
            running_mean = self.buffer('batchnorm.running_mean')
            running_var = self.buffer('batchnorm.running_var')
            self.set_buffer('batchnorm.running_mean',
                            (1 - BATCHNORM_MOMENTUM) * running_mean + BATCHNORM_MOMENTUM * mean.data[0])
            self.set_buffer('batchnorm.running_var',
                            (1 - BATCHNORM_MOMENTUM) * running_var +
                            BATCHNORM_MOMENTUM * var.data[0] * count / (count - 1))
            normalized = centered / (var + BATCHNORM_EPS).sqrt()
        else:
            mean = self.buffer('batchnorm.running_mean')
            std = np.sqrt(self.buffer('batchnorm.running_var') + BATCHNORM_EPS)
            normalized = (z - mean) / std
        return normalized * gamma + beta

    def encode(self, x, mode=None, batchnorm_mode=None):
        """Latent of x

        Args:
            x (Tensor|numpy.ndarray): N x D inputs
            mode (str): train or eval, defaults to current mode of encoder
            batchnorm_mode (str): train or eval mode of the final batch norm, defaults to mode

        Returns:
            Tensor: N x H latents

        Raises:
            NumericalError: When activations of a layer are not finite
        """
        training = self.training if mode is None else mode == 'train'
        h = as_tensor(x)
        if h.ndim != 2 or h.shape[1] != self.config.input_dim:
            raise ShapeError('Expected N x {0} inputs, got {1}'.format(self.config.input_dim, h.shape))
        self._check_finite(h, 0)
        last = self.num_layers - 1
        for i in range(self.num_layers):
            a = h @ self.effective_weight(i) + self.param('linear{0}.bias'.format(i))
            if i == last:
                h = a
            elif self.config.residual:
                # first layer is a plain projection to the hidden width
                h = a if i == 0 else h + a.relu()
            else:
                h = a.relu()
            self._check_finite(h, i)
        if self.config.use_final_batchnorm:
            bn_training = training if batchnorm_mode is None else batchnorm_mode == 'train'
            h = self._batchnorm(h, bn_training)
            self._check_finite(h, self.num_layers)
        return h

    def decode(self, z):
        """Reconstruction of the input from latent z"""
        h = as_tensor(z)
        last = self.num_layers - 1
        for i in range(self.num_layers):
            h = h @ self.param('decoder{0}.weight'.format(i)) + self.param('decoder{0}.bias'.format(i))
            if i != last:
                h = h.relu()
        return h

    def forward(self, x, mode=None):
        """Encode x and reconstruct it when a decoder is configured

        Args:
            x (Tensor|numpy.ndarray): N x D inputs
            mode (str): train or eval, defaults to current mode of encoder

        Returns:
            tuple[Tensor, Tensor]: z (N x H) and x_hat (N x D) or None when recon_lambda is 0
        """
        z = self.encode(x, mode)
        x_hat = None
        if self.config.recon_lambda > 0:
            x_hat = self.decode(z)
        return z, x_hat

    def reset_last_layer(self, seed):
        """Reinitialize the final linear layer, leaving all other weights untouched

        Args:
            seed (int): Seed of reinitialization
        """
        rng = random_generator(seed, RESET_STREAM)
        last = self.num_layers - 1
        fan_in, fan_out = self.config.layer_dims()[last]
        weight = self.param('linear{0}.weight'.format(last))
        weight.data = he_normal(fan_in, fan_out, rng)
        weight.grad = None
        bias = self.param('linear{0}.bias'.format(last))
        bias.data = np.zeros(fan_out)
        bias.grad = None
        if self.config.spectral:
            sigma, u = power_iteration(weight.data, self.buffer('linear{0}.u'.format(last)),
                                       self.config.power_iteration_steps)
            self.set_buffer('linear{0}.u'.format(last), u)
            self.set_buffer('linear{0}.sigma'.format(last), sigma)
        LOGGER.info('Reset last layer of encoder')

    def lipschitz_bound(self):
        """Upper bound of the Lipschitz constant of encode in eval mode

        Product over layers of the largest singular value of the effective weight,
        for residual blocks 1 + that value, times the batch norm gain.

        Returns:
            float: bound
        """
        bound = 1.0
        last = self.num_layers - 1
        for i in range(self.num_layers):
            sigma = np.linalg.norm(self.effective_weight(i).data, 2)
            if self.config.residual and 0 < i < last:
                bound *= 1.0 + sigma
            else:
                bound *= sigma
        if self.config.use_final_batchnorm:
            gamma = self.param('batchnorm.weight').data * self.batchnorm_scale()
            bound *= np.max(np.abs(gamma) / np.sqrt(self.buffer('batchnorm.running_var') + BATCHNORM_EPS))
        return float(bound)


def reconstruction_loss(x, x_hat):
    """Mean squared error over all entries

    Args:
        x (Tensor|numpy.ndarray): Inputs
        x_hat (Tensor): Reconstructions

    Returns:
        Tensor: scalar

    Raises:
        ShapeError: When shapes differ
    """
    x = as_tensor(x)
    x_hat = as_tensor(x_hat)
    if x.shape != x_hat.shape:
        raise ShapeError('Reconstruction shape {0} differs from input shape {1}'.format(x_hat.shape, x.shape))
    return (x_hat - x).square().mean()
