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
"""Radial normalizing flow, a density estimator on the latent space.

Each layer maps z to z + beta h(alpha, r) (z - z0) with h = 1 / (alpha + r) and r = ||z - z0||.
The stack transports latents towards a standard normal base distribution,
the density of a latent is the base density of the transported point times the absolute Jacobian determinants.
Radial layers have no closed form inverse, so the flow can only evaluate densities, not sample.
"""

import logging

import numpy as np

from .errors import NumericalError, ShapeError
from .numcore import as_tensor, clip, random_generator
from .params import ParameterSet

LOGGER = logging.getLogger(__name__)

INIT_STREAM = 31
# softplus(SOFTPLUS_ONE) == 1
SOFTPLUS_ONE = np.log(np.expm1(1.0))


class RadialFlow(ParameterSet):
    """Stack of radial flow layers

    Args:
        dim (int): Dimension H of latent space
        num_layers (int): Number of layers, 8 for toy problems, 16 otherwise
        seed (int): Seed of parameter initialization

    Layers start close to the identity, alpha = 1 and beta = 0 with z0 drawn from a narrow normal.

    """

    def __init__(self, dim, num_layers=8, seed=0):
        super(RadialFlow, self).__init__()
        self.dim = int(dim)
        self.num_layers = int(num_layers)
        rng = random_generator(seed, INIT_STREAM)
        for i in range(self.num_layers):
            self.add_parameter('layer{0}.z0'.format(i), 0.1 * rng.standard_normal(self.dim))
            self.add_parameter('layer{0}.alpha_raw'.format(i), [SOFTPLUS_ONE])
            self.add_parameter('layer{0}.beta_raw'.format(i), [SOFTPLUS_ONE])

    def alpha(self, i):
        return self.param('layer{0}.alpha_raw'.format(i)).softplus()

    def beta(self, i):
        """beta = -alpha + softplus(beta_raw) which is > -alpha, keeping the layer invertible"""
        return self.param('layer{0}.beta_raw'.format(i)).softplus() - self.alpha(i)

    def transform(self, i, z):
        """Apply layer i

        Args:
            i (int): Layer index
            z (Tensor): N x H points

        Returns:
            tuple[Tensor, Tensor]: mapped points (N x H) and log absolute Jacobian determinant (N)
        """
        z0 = self.param('layer{0}.z0'.format(i))
        alpha = self.alpha(i)
        beta = self.beta(i)
        diff = z - z0
        r = clip(diff.square().sum(axis=1, keepdims=True), lower=1e-30).sqrt()
        h = 1.0 / (alpha + r)
        beta_h = beta * h
        mapped = z + beta_h * diff
        radial = 1.0 + beta_h
        derivative = radial - beta_h * h * r
        if np.any(radial.data <= 0) or np.any(derivative.data <= 0):
            raise NumericalError('Radial flow layer is not invertible', layer=i)
        log_det = (self.dim - 1) * radial.log() + derivative.log()
        return mapped, log_det.reshape(len(z))

    def log_prob(self, z):
        """Log density of latents

        Args:
            z (Tensor|numpy.ndarray): N x H latents

        Returns:
            Tensor: N log densities

        Raises:
            NumericalError: When an intermediate value is not finite
        """
        z = as_tensor(z)
        if z.ndim != 2 or z.shape[1] != self.dim:
            raise ShapeError('Expected N x {0} latents, got {1}'.format(self.dim, z.shape))
        u = z
        log_det = 0.0
        for i in range(self.num_layers):
            u, layer_log_det = self.transform(i, u)
            if not np.all(np.isfinite(u.data)):
                raise NumericalError('Non-finite values in radial flow', layer=i)
            log_det = layer_log_det + log_det
        base = -0.5 * u.square().sum(axis=1) - 0.5 * self.dim * np.log(2 * np.pi)
        out = base + log_det
        if not np.all(np.isfinite(out.data)):
            raise NumericalError('Non-finite log density in radial flow')
        return out

    def fit_nll_loss(self, z):
        """Mean negative log likelihood of z, differentiable with respect to the flow parameters and z"""
        return -self.log_prob(z).mean()

    def to_dict(self):
        return {'dim': self.dim, 'num_layers': self.num_layers}
