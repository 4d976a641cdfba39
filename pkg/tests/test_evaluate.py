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
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from dumlab.data import Dataset
from dumlab.errors import DomainError, ShapeError
from dumlab.evaluate import (RESULT_COLUMNS, Grid, UncertaintyScores, accuracy, aggregate, auroc, brier,
                             categorical_entropy, evaluate_model, format_report, latent_spread, uncertainty_grid)


class TestAccuracy(object):
    def test_value(self):
        assert accuracy([0, 1, 2, 2], [0, 1, 1, 2]) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            accuracy([0, 1], [0])


class TestBrier(object):
    def test_perfect(self):
        assert brier(np.eye(3), [0, 1, 2]) == 0.0

    def test_uniform(self):
        assert_allclose(brier(np.full((2, 2), 0.5), [0, 1]), 0.5)

    def test_confidently_wrong(self):
        assert_allclose(brier([[0.0, 1.0]], [0]), 2.0)

    def test_off_simplex(self):
        with pytest.raises(DomainError):
            brier([[0.7, 0.7]], [0])


class TestAuroc(object):
    def test_separated(self):
        assert auroc([0.1, 0.2], [0.5, 0.9, 0.7]) == 1.0

    def test_reversed(self):
        assert auroc([0.5, 0.9], [0.1, 0.2]) == 0.0

    def test_ties_count_half(self):
        assert auroc([1.0, 1.0], [1.0]) == 0.5

    def test_partial(self):
        assert auroc([0.1, 0.6], [0.5]) == 0.5

    def test_empty(self):
        with pytest.raises(ShapeError):
            auroc([], [0.1])

    def test_pairwise_count(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            id_scores = rng.integers(0, 6, rng.integers(1, 15)).astype(float)
            ood_scores = rng.integers(0, 6, rng.integers(1, 15)).astype(float)
            greater = (ood_scores[:, None] > id_scores[None, :]).sum()
            ties = (ood_scores[:, None] == id_scores[None, :]).sum()
            expected = (greater + 0.5 * ties) / (len(id_scores) * len(ood_scores))
            assert_allclose(auroc(id_scores, ood_scores), expected, rtol=1e-12)

    @pytest.mark.parametrize('transform', [np.exp, lambda x: 3.0 * x + 1.0, lambda x: x ** 3])
    def test_invariant_under_increasing_transform(self, transform):
        rng = np.random.default_rng(1)
        id_scores = rng.normal(0.0, 1.0, 40).round(1)
        ood_scores = rng.normal(0.5, 1.0, 30).round(1)
        assert auroc(transform(id_scores), transform(ood_scores)) == auroc(id_scores, ood_scores)


def test_categorical_entropy():
    assert_allclose(categorical_entropy([[0.25] * 4, [1.0, 0.0, 0.0, 0.0]]), [np.log(4.0), 0.0])


def test_available_kinds():
    result = UncertaintyScores([0], [0.1], epistemic=[0.3])
    assert [kind for kind, _ in result.available()] == ['predictive', 'epistemic']


class TestGrid(object):
    def test_csv(self, tmpdir):
        grid = Grid(np.arange(9.0).reshape(3, 3) / 7.0, (-1.0, 1.0, -2.0, 2.0), 'log_density')
        filename = str(tmpdir.join('grid.csv'))
        grid.to_csv(filename)

        with open(filename) as f:
            lines = f.read().splitlines()
        assert lines[0] == 'x_min,x_max,y_min,y_max,resolution'
        assert lines[1] == '-1.0,1.0,-2.0,2.0,3'
        result = Grid.from_csv(filename)
        assert_allclose(result.values, grid.values, rtol=1e-15)
        assert result.extent == grid.extent

    def test_uncertainty_grid(self, natpn_model):
        grid = uncertainty_grid(natpn_model, (-3.0, 3.0, -3.0, 3.0), 4)
        assert grid.kind == 'log_density'
        assert grid.values.shape == (4, 4)
        assert grid.resolution == 4

    def test_uncertainty_grid_transform(self, natpn_model):
        shifted = uncertainty_grid(natpn_model, (0.0, 1.0, 0.0, 1.0), 3, transform=lambda points: points + 1.0)
        direct = uncertainty_grid(natpn_model, (1.0, 2.0, 1.0, 2.0), 3)
        assert_allclose(shifted.values, direct.values)


def test_latent_spread(natpn_model, toy):
    spread = latent_spread(natpn_model, toy.inputs)
    assert 0.0 <= spread <= 1.0


@pytest.fixture
def seed_results():
    return [pd.DataFrame([
        ('natpn', 'toy', seed, 'accuracy', 'test', value),
        ('natpn', 'toy', seed, 'auroc_epistemic', 'far_grid', 0.9),
    ], columns=RESULT_COLUMNS) for seed, value in enumerate([0.7, 0.8, 0.9])]


class TestAggregate(object):
    def test_mean_and_sample_std(self, seed_results):
        report = aggregate(seed_results)
        assert_allclose(report.mean('accuracy', 'test'), 0.8)
        assert_allclose(report.std('accuracy', 'test'), 0.1)
        assert len(report) == 2

    def test_single_seed_has_no_std(self, seed_results):
        report = aggregate(seed_results[0])
        assert report.std('accuracy', 'test') is None
        assert report.to_dict()['accuracy']['test'] == {'mean': 0.7, 'count': 1}

    def test_to_dict(self, seed_results):
        summary = aggregate(seed_results).to_dict()
        assert summary['auroc_epistemic']['far_grid']['count'] == 3
        assert_allclose(summary['auroc_epistemic']['far_grid']['std'], 0.0)

    def test_format(self, seed_results):
        assert aggregate(seed_results).format('accuracy', 'test') == '80.00 ± 10.00'

    def test_unknown_row(self, seed_results):
        with pytest.raises(KeyError):
            aggregate(seed_results).mean('brier', 'test')

    def test_nothing(self):
        with pytest.raises(ShapeError):
            aggregate(pd.DataFrame(columns=RESULT_COLUMNS))


def test_format_report():
    assert format_report(0.7112, 0.0018) == '71.12 ± 0.18'
    assert format_report(0.5) == '50.00'


class TestEvaluateModel(object):
    def test_natpn(self, natpn_model, toy):
        far = Dataset(np.full((5, 2), 20.0), np.zeros(5), 2, name='far', role='ood')
        results = evaluate_model(natpn_model, toy.replace(name='test', role='test'), [far], 'natpn', 'toy', 3)

        assert list(results.columns) == RESULT_COLUMNS
        assert set(results['seed']) == {3}
        assert sorted(results[results['dataset'] == 'test']['metric']) == ['accuracy', 'brier']
        assert sorted(results[results['dataset'] == 'far']['metric']) == [
            'auroc_aleatoric', 'auroc_epistemic', 'auroc_predictive']

    def test_due_labelled_shift(self, due_model, toy):
        shifted = toy.replace(name='shifted', role='ood', inputs=toy.inputs + 1.0)
        results = evaluate_model(due_model, toy, [shifted], 'due', labelled_ood=['shifted'])

        assert sorted(results[results['dataset'] == 'shifted']['metric']) == ['accuracy', 'auroc_predictive', 'brier']
