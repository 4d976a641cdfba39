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

import pickle

from dumlab.errors import ConfigError, DumLabError, NumericalError, ShapeError


def test_config_error_names_field():
    error = ConfigError('must be positive', 'encoder.latent_dim')
    assert str(error) == 'encoder.latent_dim: must be positive'
    assert error.field == 'encoder.latent_dim'


def test_config_error_without_field():
    error = ConfigError('Experiment must be a mapping')
    assert str(error) == 'Experiment must be a mapping'
    assert error.field is None


def test_config_error_survives_pickle():
    error = pickle.loads(pickle.dumps(ConfigError('must be positive', 'encoder.latent_dim')))
    assert isinstance(error, ConfigError)
    assert str(error) == 'encoder.latent_dim: must be positive'
    assert error.field == 'encoder.latent_dim'


def test_numerical_error_location():
    error = NumericalError('Non-finite loss nan', phase='main', epoch=3)
    assert str(error) == 'Non-finite loss nan (phase main, epoch 3)'
    assert error.reason == 'Non-finite loss nan'
    assert error.layer is None


def test_numerical_error_survives_pickle():
    error = pickle.loads(pickle.dumps(NumericalError('Non-finite activations in encoder', 'main', 2, 1)))
    assert str(error) == 'Non-finite activations in encoder (phase main, epoch 2, layer 1)'
    assert error.phase == 'main'
    assert error.layer == 1


def test_hierarchy():
    assert issubclass(ShapeError, ValueError)
    assert issubclass(ShapeError, DumLabError)
    assert issubclass(NumericalError, ArithmeticError)
