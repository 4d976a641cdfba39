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
from scipy import stats

from dumlab.data import (Dataset, ToySpec, add_gaussian_noise, apply_transforms, fit_standardizer, inject_label_noise,
                         make_cmnist, make_collapse_toy, make_far_points, make_grid, make_oodom, read_idx,
                         replicate_channels, split, standardize, subsample)
from dumlab.errors import ConfigError, FormatError, ShapeError
from dumlab.idx import write_idx_images, write_idx_labels


@pytest.fixture
def images():
    rng = np.random.default_rng(0)
    return Dataset(rng.random((10, 4)), np.arange(10) % 3, 3, name='tiny', image_shape=(1, 2, 2))


class TestDataset(object):
    def test_label_out_of_range(self):
        with pytest.raises(ShapeError):
            Dataset(np.zeros((2, 2)), [0, 2], 2)

    def test_label_count(self):
        with pytest.raises(ShapeError):
            Dataset(np.zeros((3, 2)), [0, 1], 2)

    def test_unknown_role(self):
        with pytest.raises(ConfigError):
            Dataset(np.zeros((1, 2)), [0], 2, role='holdout')

    def test_subset(self, images):
        result = images.subset([1, 3], role='val')
        assert len(result) == 2
        assert result.role == 'val'
        assert_array_equal(result.labels, [1, 0])

    def test_repr(self, images):
        assert repr(images) == "Dataset(name='tiny', role='train', N=10, D=4, C=3)"


class TestToy(object):
    def test_sizes(self):
        dataset, grid = make_collapse_toy(ToySpec(count_per_class=25, grid_resolution=7), 0)
        assert len(dataset) == 50
        assert dataset.num_classes == 2
        assert grid.shape == (49, 2)

    def test_blobs_share_y_axis(self):
        dataset, _ = make_collapse_toy(ToySpec(count_per_class=2000), 1)
        for label, center_x in ((0, -2.0), (1, 2.0)):
            members = dataset.inputs[dataset.labels == label]
            assert_allclose(members.mean(axis=0), [center_x, 0.0], atol=0.1)

    def test_seeded(self):
        spec = ToySpec(count_per_class=5)
        assert_array_equal(make_collapse_toy(spec, 3)[0].inputs, make_collapse_toy(spec, 3)[0].inputs)
        assert not np.allclose(make_collapse_toy(spec, 3)[0].inputs, make_collapse_toy(spec, 4)[0].inputs)

    def test_single_center(self):
        with pytest.raises(ConfigError):
            ToySpec(centers=[(0.0, 0.0)])

    def test_grid_is_row_major_with_ascending_y(self):
        grid = make_grid((0.0, 2.0, 10.0, 11.0), 3)
        assert_allclose(grid[:3], [[0.0, 10.0], [1.0, 10.0], [2.0, 10.0]])
        assert_allclose(grid[-1], [2.0, 11.0])

    def test_far_points(self):
        grid = make_grid((-6.0, 6.0, -6.0, 6.0), 13)
        centers = np.array([[-2.0, 0.0], [2.0, 0.0]])
        far = make_far_points(grid, centers, 4.0, 2)
        distances = np.linalg.norm(far.inputs[:, None, :] - centers[None, :, :], axis=2).min(axis=1)
        assert far.role == 'ood'
        assert far.name == 'far_grid'
        assert np.all(distances >= 4.0)
        assert len(far) > 0

    def test_no_far_points(self):
        with pytest.raises(ConfigError):
            make_far_points(make_grid((-1.0, 1.0, -1.0, 1.0), 3), np.zeros((2, 2)), 10.0, 2)


class TestIdx(object):
    def test_read(self, tmpdir):
        images_fn = str(tmpdir.join('images.idx'))
        labels_fn = str(tmpdir.join('labels.idx'))
        write_idx_images(images_fn, np.full((3, 2, 2), 255))
        write_idx_labels(labels_fn, [0, 1, 2])

        dataset = read_idx(images_fn, labels_fn, name='mini')

        assert dataset.inputs.shape == (3, 4)
        assert_allclose(dataset.inputs, 1.0)
        assert dataset.image_shape == (1, 2, 2)
        assert dataset.name == 'mini'

    def test_count_mismatch(self, tmpdir):
        images_fn = str(tmpdir.join('images.idx'))
        labels_fn = str(tmpdir.join('labels.idx'))
        write_idx_images(images_fn, np.zeros((3, 2, 2)))
        write_idx_labels(labels_fn, [0, 1])

        with pytest.raises(FormatError):
            read_idx(images_fn, labels_fn)


class TestStandardize(object):
    def test_fit_on_train(self, images):
        standardizer = fit_standardizer(images)
        result = standardize(images, standardizer)
        assert_allclose(result.inputs.mean(), 0.0, atol=1e-12)
        assert_allclose(result.inputs.std(), 1.0)

    def test_constant_inputs(self):
        dataset = Dataset(np.ones((4, 2)), [0, 1, 0, 1], 2)
        assert fit_standardizer(dataset).std == 1.0


class TestShifts(object):
    def test_replicate_channels(self, images):
        rgb = replicate_channels(images)
        assert rgb.input_dim == 12
        assert rgb.image_shape == (3, 2, 2)
        channels = rgb.inputs.reshape(10, 3, 4)
        assert_array_equal(channels[:, 0], images.inputs)
        assert_array_equal(channels[:, 2], images.inputs)

    def test_cmnist_zeroes_one_channel(self, images):
        colored = make_cmnist(images, 0)
        channels = colored.inputs.reshape(10, 3, 4)
        zeroed = np.all(channels == 0, axis=2)
        assert_array_equal(zeroed.sum(axis=1), np.ones(10))
        assert colored.name == 'ctiny'
        assert_array_equal(colored.labels, images.labels)

    def test_cmnist_channel_is_uniform(self):
        dataset = Dataset(np.ones((3000, 4)), np.zeros(3000), 2, image_shape=(1, 2, 2))
        channels = make_cmnist(dataset, 5).inputs.reshape(3000, 3, 4)
        zeroed = np.argmax(np.all(channels == 0, axis=2), axis=1)
        _, p_value = stats.chisquare(np.bincount(zeroed, minlength=3))
        assert p_value > 1e-3

    def test_cmnist_needs_single_channel(self, images):
        with pytest.raises(ShapeError):
            make_cmnist(replicate_channels(images), 0)

    def test_oodom(self, images):
        shifted = make_oodom(images)
        assert_allclose(shifted.inputs, images.inputs * 255)
        assert shifted.role == 'ood'

    def test_gaussian_noise(self):
        dataset = Dataset(np.zeros((2000, 5)), np.zeros(2000), 2)
        noisy = add_gaussian_noise(dataset, 0.5, 0)
        assert_allclose(noisy.inputs.var(), 0.5, rtol=0.05)

    def test_subsample(self, images):
        result = subsample(images, 0.25, 0)
        assert len(result) == 3
        assert np.all(np.diff([np.flatnonzero((images.inputs == row).all(axis=1))[0] for row in result.inputs]) > 0)

    def test_subsample_zero_fraction(self, images):
        with pytest.raises(ConfigError):
            subsample(images, 0.0, 0)


class TestLabelNoise(object):
    def test_rho_zero_keeps_labels(self, images):
        assert_array_equal(inject_label_noise(images, 0.0, 0).labels, images.labels)

    def test_rho_one_keeps_class_marginal(self):
        dataset = Dataset(np.zeros((3000, 1)), np.zeros(3000), 3)
        noisy = inject_label_noise(dataset, 1.0, 0)
        assert_allclose(np.bincount(noisy.labels, minlength=3) / 3000.0, [1 / 3.0] * 3, atol=0.03)

    def test_changes_at_most_rho(self, images):
        noisy = inject_label_noise(images, 0.2, 0)
        assert np.sum(noisy.labels != images.labels) <= 2

    def test_rho_out_of_range(self, images):
        with pytest.raises(ConfigError):
            inject_label_noise(images, 1.5, 0)


class TestSplit(object):
    def test_partition(self, images):
        train, val = split(images, 0, 0.2)
        assert len(train) == 8
        assert len(val) == 2
        assert train.role == 'train'
        assert val.role == 'val'
        rows = np.concatenate([train.inputs, val.inputs])
        assert_array_equal(np.sort(rows, axis=0), np.sort(images.inputs, axis=0))

    def test_too_small(self):
        with pytest.raises(ConfigError):
            split(Dataset(np.zeros((4, 1)), [0, 1, 0, 1], 2), 0)


class TestApplyTransforms(object):
    def test_stages(self, images):
        chain = [{'kind': 'rgb'}, {'kind': 'oodom'}]
        pre = apply_transforms(images, chain, 0, 'pre')
        assert pre.input_dim == 12
        assert_allclose(pre.inputs.max(), images.inputs.max())
        post = apply_transforms(pre, chain, 0, 'post')
        assert_allclose(post.inputs, pre.inputs * 255)

    def test_keyword_arguments(self, images):
        result = apply_transforms(images, [{'kind': 'subsample', 'fraction': 0.5}], 0)
        assert len(result) == 5

    def test_unknown(self, images):
        with pytest.raises(ConfigError):
            apply_transforms(images, [{'kind': 'blur'}], 0)
