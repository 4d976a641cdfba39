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

from dumlab.encoder import Encoder, EncoderConfig, reconstruction_loss
from dumlab.errors import ConfigError, NumericalError, ShapeError
from dumlab.numcore import Tensor


def make_encoder(seed=0, **fields):
    defaults = {'input_dim': 3, 'hidden_dim': 6, 'num_layers': 3, 'latent_dim': 2}
    defaults.update(fields)
    return Encoder(EncoderConfig(**defaults), seed)


@pytest.fixture
def inputs():
    return np.random.default_rng(0).standard_normal((16, 3))


class TestEncoderConfig(object):
    def test_layer_dims(self):
        config = EncoderConfig(input_dim=3, hidden_dim=6, num_layers=3, latent_dim=2)
        assert config.layer_dims() == [(3, 6), (6, 6), (6, 2)]

    @pytest.mark.parametrize('fields', [
        {'constraint': 'lipschitz'},
        {'num_layers': 1},
        {'latent_dim': 0},
        {'constraint': 'bilipschitz', 'lipschitz_c': 0.0},
        {'recon_lambda': -1.0},
    ])
    def test_invalid(self, fields):
        with pytest.raises(ConfigError):
            EncoderConfig(input_dim=3, **fields)

    def test_dict_round_trip(self):
        config = EncoderConfig(input_dim=3, constraint='bilipschitz', lipschitz_c=2.0)
        assert EncoderConfig.from_dict(config.to_dict()).to_dict() == config.to_dict()


class TestEncoder(object):
    def test_shape(self, inputs):
        z = make_encoder().encode(inputs)
        assert z.shape == (16, 2)

    def test_wrong_input_dim(self):
        with pytest.raises(ShapeError):
            make_encoder().encode(np.ones((2, 4)))

    def test_seeded_initialization(self, inputs):
        assert_array_equal(make_encoder(1).encode(inputs).data, make_encoder(1).encode(inputs).data)
        assert not np.allclose(make_encoder(1).encode(inputs).data, make_encoder(2).encode(inputs).data)

    def test_non_finite_input(self):
        with pytest.raises(NumericalError):
            make_encoder().encode(np.array([[np.inf, 0.0, 0.0]]))

    def test_residual_blocks_add_skip(self, inputs):
        plain = make_encoder(constraint='none')
        residual = make_encoder(constraint='residual')
        assert not np.allclose(plain.encode(inputs).data, residual.encode(inputs).data)

    def test_gradient_reaches_first_layer(self, inputs):
        encoder = make_encoder(constraint='residual')
        encoder.encode(inputs).square().sum().backward()
        assert np.any(encoder.param('linear0.weight').grad != 0)


class TestBilipschitz(object):
    def test_lipschitz_bound_below_c_product(self):
        encoder = make_encoder(constraint='bilipschitz', lipschitz_c=0.5)
        for _ in range(2000):
            encoder.spectral_step()
        # plain projection, one residual block and the output layer
        assert encoder.lipschitz_bound() <= 0.5 * 1.5 * 0.5 * (1 + 1e-4)

    def test_unconstrained_weights_pass_through(self):
        encoder = make_encoder(constraint='bilipschitz', lipschitz_c=1e6)
        assert encoder.effective_weight(0) is encoder.param('linear0.weight')

    def test_spectral_step_requires_constraint(self):
        with pytest.raises(ConfigError):
            make_encoder().spectral_step()

    def test_output_distance_is_bounded(self, inputs):
        encoder = make_encoder(constraint='bilipschitz', lipschitz_c=1.0)
        for _ in range(100):
            encoder.spectral_step()
        z = encoder.encode(inputs, 'eval').data
        bound = encoder.lipschitz_bound()
        for i in range(1, len(inputs)):
            assert np.linalg.norm(z[i] - z[0]) <= bound * np.linalg.norm(inputs[i] - inputs[0]) + 1e-9


class TestBatchnorm(object):
    def test_train_mode_normalizes(self, inputs):
        encoder = make_encoder(use_final_batchnorm=True)
        z = encoder.encode(inputs, 'train').data
        assert_allclose(z.mean(axis=0), 0.0, atol=1e-10)
        assert_allclose(z.var(axis=0), 1.0, rtol=1e-3)

    def test_running_statistics(self, inputs):
        encoder = make_encoder(use_final_batchnorm=True)
        encoder.encode(inputs, 'train')
        running_mean = encoder.buffer('batchnorm.running_mean')
        assert np.any(running_mean != 0)
        encoder.encode(inputs, 'eval')
        assert_array_equal(encoder.buffer('batchnorm.running_mean'), running_mean)

    def test_single_sample_in_train_mode(self, inputs):
        encoder = make_encoder(use_final_batchnorm=True)
        with pytest.raises(ShapeError):
            encoder.encode(inputs[:1], 'train')

    def test_attach(self, inputs):
        encoder = make_encoder()
        encoder.attach_final_batchnorm()
        assert encoder.config.use_final_batchnorm
        assert 'batchnorm.weight' in dict(encoder.named_parameters())
        before = encoder.num_parameters()
        encoder.attach_final_batchnorm()
        assert encoder.num_parameters() == before


class TestResetLastLayer(object):
    def test_only_last_layer_changes(self):
        encoder = make_encoder()
        before = encoder.state_dict()
        encoder.reset_last_layer(5)
        after = encoder.state_dict()
        assert_array_equal(after['linear0.weight'], before['linear0.weight'])
        assert_array_equal(after['linear1.weight'], before['linear1.weight'])
        assert not np.allclose(after['linear2.weight'], before['linear2.weight'])
        assert_array_equal(after['linear2.bias'], 0.0)


class TestReconstruction(object):
    def test_forward_with_decoder(self, inputs):
        z, x_hat = make_encoder(recon_lambda=0.5).forward(inputs)
        assert z.shape == (16, 2)
        assert x_hat.shape == inputs.shape

    def test_forward_without_decoder(self, inputs):
        _, x_hat = make_encoder().forward(inputs)
        assert x_hat is None

    def test_loss(self):
        loss = reconstruction_loss(np.zeros((2, 2)), Tensor([[1.0, 1.0], [3.0, 1.0]]))
        assert loss.item() == 3.0

    def test_loss_shape_mismatch(self):
        with pytest.raises(ShapeError):
            reconstruction_loss(np.zeros((2, 2)), Tensor(np.zeros((2, 3))))
