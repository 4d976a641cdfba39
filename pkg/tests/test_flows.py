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
from numpy.testing import assert_allclose
from scipy import stats
from scipy.integrate import trapezoid

from dumlab.errors import NumericalError, ShapeError
from dumlab.flows import RadialFlow
from dumlab.numcore import Tensor
from dumlab.optim import Optimizer
from .utils import numerical_gradient


def test_starts_at_identity():
    flow = RadialFlow(2, 4, seed=0)
    z = np.array([[0.5, -1.0], [2.0, 0.3]])
    expected = stats.multivariate_normal(np.zeros(2), np.eye(2)).logpdf(z)
    assert_allclose(flow.log_prob(z).data, expected)


def test_density_integrates_to_one():
    flow = RadialFlow(1, 3, seed=1)
    for i in range(3):
        flow.param('layer{0}.beta_raw'.format(i)).data = np.array([2.0 - i])
        flow.param('layer{0}.alpha_raw'.format(i)).data = np.array([0.5 + i])
    z = np.linspace(-40, 40, 80001).reshape(-1, 1)
    density = np.exp(flow.log_prob(z).data)
    assert_allclose(trapezoid(density, z[:, 0]), 1.0, rtol=1e-4)


def test_trained_density_integrates_to_one():
    flow = RadialFlow(2, 4, seed=0)
    z = np.random.default_rng(0).normal([1.5, -1.0], [0.5, 0.8], (200, 2))
    optimizer = Optimizer('adamw', flow.parameters())
    for _ in range(200):
        optimizer.zero_grad()
        flow.fit_nll_loss(z).backward()
        optimizer.step(0.05)

    axis = np.linspace(-10, 10, 400)
    xx, yy = np.meshgrid(axis, axis)
    density = np.exp(flow.log_prob(np.column_stack([xx.ravel(), yy.ravel()])).data).reshape(400, 400)
    assert 0.99 <= trapezoid(trapezoid(density, axis, axis=1), axis) <= 1.01

    point = z[:1]
    _, log_det = flow.transform(0, Tensor(point))
    jacobian = np.column_stack([numerical_jacobian_column(flow, point, j) for j in range(2)])
    assert_allclose(log_det.data[0], np.log(abs(np.linalg.det(jacobian))), rtol=1e-5, atol=1e-8)


def test_log_det_matches_numerical_jacobian():
    flow = RadialFlow(2, 1, seed=2)
    flow.param('layer0.beta_raw').data = np.array([1.5])
    z = np.array([[0.7, -0.4]])
    _, log_det = flow.transform(0, Tensor(z))
    jacobian = np.zeros((2, 2))
    for j in range(2):
        jacobian[:, j] = numerical_jacobian_column(flow, z, j)
    assert_allclose(log_det.data[0], np.log(abs(np.linalg.det(jacobian))), rtol=1e-5)


def numerical_jacobian_column(flow, z, j, eps=1e-6):
    plus = z.copy()
    plus[0, j] += eps
    minus = z.copy()
    minus[0, j] -= eps
    mapped_plus, _ = flow.transform(0, Tensor(plus))
    mapped_minus, _ = flow.transform(0, Tensor(minus))
    return (mapped_plus.data[0] - mapped_minus.data[0]) / (2 * eps)


def test_gradient_of_center():
    flow = RadialFlow(2, 2, seed=3)
    flow.param('layer0.beta_raw').data = np.array([1.0])
    z = np.array([[0.2, 0.1], [-1.0, 0.5]])
    center = flow.param('layer0.z0')
    flow.fit_nll_loss(z).backward()

    def nll(value):
        center.data = value
        return flow.fit_nll_loss(z).item()
    original = center.data.copy()
    analytic = center.grad.copy()
    expected = numerical_gradient(nll, original)
    assert_allclose(analytic, expected, rtol=1e-5, atol=1e-8)


def test_wrong_dimension():
    with pytest.raises(ShapeError):
        RadialFlow(3).log_prob(np.zeros((2, 2)))


def test_overflow():
    flow = RadialFlow(1, 1)
    with pytest.raises(NumericalError):
        flow.log_prob(np.array([[1e200]]))


def test_to_dict():
    assert RadialFlow(3, 5).to_dict() == {'dim': 3, 'num_layers': 5}
