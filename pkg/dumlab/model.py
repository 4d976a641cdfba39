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
"""Deterministic uncertainty model: encoder followed by an uncertainty head."""

import logging
from collections import OrderedDict

import numpy as np

from .encoder import Encoder, EncoderConfig, reconstruction_loss
from .errors import ConfigError
from .gp import GPHead
from .natpn import NatPNHead
from .numcore import as_tensor, log_softmax, no_grad, random_generator
from .params import ParameterSet

LOGGER = logging.getLogger(__name__)

HEADS = {
    NatPNHead.head_type: NatPNHead,
    GPHead.head_type: GPHead,
}
OBJECTIVES = ('cross_entropy', 'head')
CLASSIFIER_STREAM = 61
INITIAL_EMBEDDING_SIZE = 2000


def build_head(fields, seed=0):
    """Head from its dict description, the `type` key selects natpn or due"""
    head_type = fields.get('type')
    if head_type not in HEADS:
        raise ConfigError('Unknown head type {0}, must be one of {1}'.format(head_type, sorted(HEADS)), 'head.type')
    return HEADS[head_type].from_dict(fields, seed)


class LinearClassifier(ParameterSet):
    """Linear map from latent to class logits, trained with cross-entropy while pretraining the encoder"""

    def __init__(self, latent_dim, num_classes, seed=0):
        super(LinearClassifier, self).__init__()
        rng = random_generator(seed, CLASSIFIER_STREAM)
        self.add_parameter('weight', rng.standard_normal((latent_dim, num_classes)) / np.sqrt(latent_dim))
        self.add_parameter('bias', np.zeros(num_classes))

    def loss(self, z, labels):
        labels = np.asarray(labels, dtype=np.int64)
        logits = as_tensor(z) @ self.param('weight') + self.param('bias')
        return -log_softmax(logits, axis=1)[np.arange(len(labels)), labels].mean()


class DumModel(object):
    """Core architecture f with uncertainty head g

    Args:
        encoder (dumlab.encoder.Encoder): Core architecture
        head (dumlab.natpn.NatPNHead|dumlab.gp.GPHead): Uncertainty head
        seed (int): Seed of the pretrain classifier

    Attributes:
        classifier (LinearClassifier): Linear classifier used when pretraining the encoder with cross-entropy

    """

    def __init__(self, encoder, head, seed=0):
        if encoder.config.latent_dim != head.latent_dim:
            raise ConfigError('Latent dimension of encoder {0} and head {1} differ'.format(
                encoder.config.latent_dim, head.latent_dim), 'encoder.latent_dim')
        self.encoder = encoder
        self.head = head
        self.classifier = LinearClassifier(head.latent_dim, head.num_classes, seed)

    @property
    def num_classes(self):
        return self.head.num_classes

    def components(self):
        return OrderedDict([('encoder', self.encoder), ('head', self.head), ('classifier', self.classifier)])

    def train(self, mode=True):
        for component in self.components().values():
            component.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for component in self.components().values():
            component.zero_grad()

    def state_dict(self):
        state = OrderedDict()
        for name, component in self.components().items():
            state.update(component.state_dict(name + '.'))
        return state

    def load_state_dict(self, state):
        for name, component in self.components().items():
            component.load_state_dict(state, name + '.')

    def loss(self, x, labels, objective='head', n_total=None, rng=None, encoder_mode='train',
             frozen_encoder=False, batchnorm_mode=None, reconstruct=True):
        """Training loss of a batch

        Args:
            x (numpy.ndarray): N x D inputs
            labels (numpy.ndarray): N labels
            objective (str): `cross_entropy` of the pretrain classifier or the `head` loss
            n_total (int): Size of the training set
            rng (numpy.random.Generator): Source of Monte Carlo noise of the head
            encoder_mode (str): train or eval mode of the encoder
            frozen_encoder (bool): Run the encoder without gradient tape, which also skips the reconstruction term
            batchnorm_mode (str): Overrides encoder_mode for the final batch norm
            reconstruct (bool): Add the reconstruction term when the encoder has a decoder

        Returns:
            Tensor: scalar loss, including the weighted reconstruction term when the encoder has a decoder
        """
        if objective not in OBJECTIVES:
            raise ConfigError('Unknown objective {0}, must be one of {1}'.format(objective, OBJECTIVES), 'objective')
        n_total = len(labels) if n_total is None else n_total
        if frozen_encoder:
            with no_grad():
                z = self.encoder.encode(x, encoder_mode, batchnorm_mode)
            x_hat = None
        else:
            z = self.encoder.encode(x, encoder_mode, batchnorm_mode)
            x_hat = None
            if reconstruct and self.encoder.config.recon_lambda > 0:
                x_hat = self.encoder.decode(z)
        if objective == 'cross_entropy':
            loss = self.classifier.loss(z, labels)
        else:
            loss = self.head.loss(z, labels, n_total, rng)
        if x_hat is not None:
            loss = loss + self.encoder.config.recon_lambda * reconstruction_loss(x, x_hat)
        return loss

    def encode(self, x):
        """Eval mode latents without gradient tape"""
        with no_grad():
            return self.encoder.encode(x, 'eval')

    def predict(self, x):
        """Uncertainty scores of inputs

        Args:
            x (numpy.ndarray): N x D inputs

        Returns:
            dumlab.evaluate.UncertaintyScores: scores
        """
        with no_grad():
            return self.head.scores(self.encoder.encode(x, 'eval'))

    def grid_field(self, points):
        """Scalar uncertainty field of the head at points, see :func:`dumlab.evaluate.uncertainty_grid`"""
        with no_grad():
            return self.head.grid_field(self.encoder.encode(points, 'eval'))

    def initialize_head(self, x, seed):
        """Initialize head from the embedding of at most 2000 training inputs"""
        rng = random_generator(seed, CLASSIFIER_STREAM, 1)
        if len(x) > INITIAL_EMBEDDING_SIZE:
            x = x[np.sort(rng.choice(len(x), INITIAL_EMBEDDING_SIZE, replace=False))]
        self.head.initialize(self.encode(x).data, seed)


def build_model(encoder_fields, head_fields, seed=0):
    """Model from dict descriptions of encoder and head

    Args:
        encoder_fields (dict): Keyword arguments of :class:`dumlab.encoder.EncoderConfig`
        head_fields (dict): Head description with `type` key
        seed (int): Seed of initialization

    Returns:
        DumModel: model
    """
    encoder = Encoder(EncoderConfig.from_dict(encoder_fields), seed)
    head = build_head(head_fields, seed)
    return DumModel(encoder, head, seed)
