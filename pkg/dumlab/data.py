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
"""Datasets: toy generators, MNIST family ingestion, out-of-distribution and noise transforms, splits.

All operations return new :class:`Dataset` objects and are pure functions of their arguments and seed.
"""

import logging
from collections import namedtuple

import numpy as np

from .errors import ConfigError, FormatError, ShapeError
from .idx import read_idx_images, read_idx_labels
from .numcore import random_generator

LOGGER = logging.getLogger(__name__)

ROLES = ('train', 'val', 'test', 'ood')

# random streams per seed
TOY_STREAM = 11
CMNIST_STREAM = 12
LABEL_NOISE_STREAM = 13
SPLIT_STREAM = 14
GAUSSIAN_NOISE_STREAM = 15
SUBSAMPLE_STREAM = 16


class Dataset(object):
    """Labelled inputs

    Args:
        inputs (numpy.ndarray): N x D array of inputs
        labels (numpy.ndarray): N integer labels in [0, num_classes)
        num_classes (int): Number of classes C
        name (str): Name of dataset
        role (str): One of train, val, test or ood
        image_shape (tuple): (channels, rows, columns) when inputs are flattened images

    Raises:
        ShapeError: When number of labels and inputs differ or a label is out of range
    """

    def __init__(self, inputs, labels, num_classes, name='dataset', role='train', image_shape=None):
        inputs = np.asarray(inputs, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if inputs.ndim != 2:
            raise ShapeError('Inputs must be N x D, got shape {0}'.format(inputs.shape))
        if labels.shape != (len(inputs),):
            raise ShapeError('{0} labels for {1} inputs'.format(len(labels), len(inputs)))
        if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
            raise ShapeError('Labels must be in [0, {0})'.format(num_classes))
        if role not in ROLES:
            raise ConfigError('Unknown role {0}, must be one of {1}'.format(role, ROLES), 'role')
        if image_shape is not None and int(np.prod(image_shape)) != inputs.shape[1]:
            raise ShapeError('Image shape {0} does not match input dimension {1}'.format(image_shape, inputs.shape[1]))
        self.inputs = inputs
        self.labels = labels
        self.num_classes = int(num_classes)
        self.name = name
        self.role = role
        self.image_shape = None if image_shape is None else tuple(image_shape)

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        return 'Dataset(name={0!r}, role={1!r}, N={2}, D={3}, C={4})'.format(
            self.name, self.role, len(self), self.input_dim, self.num_classes)

    @property
    def input_dim(self):
        return self.inputs.shape[1]

    def replace(self, **changes):
        """Copy with some fields replaced

        Examples:
            >>> ood = test.replace(role='ood', name='kmnist')
        """
        fields = dict(inputs=self.inputs, labels=self.labels, num_classes=self.num_classes,
                      name=self.name, role=self.role, image_shape=self.image_shape)
        fields.update(changes)
        return Dataset(**fields)

    def subset(self, indices, role=None):
        """Copy with only the rows selected by indices"""
        indices = np.asarray(indices, dtype=np.int64)
        return self.replace(inputs=self.inputs[indices],
                            labels=self.labels[indices],
                            role=self.role if role is None else role)


class ToySpec(object):
    """Two-dimensional Gaussian blobs, one class per center

    Args:
        centers (list[tuple[float, float]]): Class centers, default (-2, 0) and (2, 0) which share the y axis
        count_per_class (int): Number of samples per class
        std (float): Isotropic standard deviation
        grid_extent (tuple[float, float, float, float]): x_min, x_max, y_min, y_max of the lattice grid
        grid_resolution (int): Number of grid points along each axis

    Raises:
        ConfigError: When fewer than 2 centers or std is not positive
    """

    def __init__(self, centers=((-2.0, 0.0), (2.0, 0.0)), count_per_class=500, std=1.0,
                 grid_extent=(-6.0, 6.0, -6.0, 6.0), grid_resolution=50):
        centers = np.asarray(centers, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[1] != 2 or len(centers) < 2:
            raise ConfigError('At least 2 two-dimensional centers required', 'centers')
        if std <= 0:
            raise ConfigError('std must be positive', 'std')
        if count_per_class < 1:
            raise ConfigError('count_per_class must be positive', 'count_per_class')
        if grid_resolution < 2:
            raise ConfigError('grid_resolution must be at least 2', 'grid_resolution')
        self.centers = centers
        self.count_per_class = int(count_per_class)
        self.std = float(std)
        self.grid_extent = tuple(float(v) for v in grid_extent)
        self.grid_resolution = int(grid_resolution)


def make_grid(extent, resolution):
    """Regular lattice of points, row-major with y ascending

    Args:
        extent (tuple[float, float, float, float]): x_min, x_max, y_min, y_max
        resolution (int): Number of points along each axis

    Returns:
        numpy.ndarray: resolution**2 x 2 points
    """
    x_min, x_max, y_min, y_max = extent
    xs = np.linspace(x_min, x_max, resolution)
    ys = np.linspace(y_min, y_max, resolution)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def make_collapse_toy(spec, seed):
    """Gaussian blobs sharing the y axis center, which invites an encoder to discard the y direction

    Args:
        spec (ToySpec): Blob and grid description
        seed (int): Random seed

    Returns:
        tuple[Dataset, numpy.ndarray]: Labelled samples and the unlabelled lattice grid
    """
    rng = random_generator(seed, TOY_STREAM)
    num_classes = len(spec.centers)
    inputs = []
    labels = []
    for label, center in enumerate(spec.centers):
        inputs.append(center + spec.std * rng.standard_normal((spec.count_per_class, 2)))
        labels.append(np.full(spec.count_per_class, label))
    dataset = Dataset(np.concatenate(inputs), np.concatenate(labels), num_classes, name='collapse_toy')
    grid = make_grid(spec.grid_extent, spec.grid_resolution)
    return dataset, grid


def make_far_points(grid, centers, distance, num_classes):
    """Out-of-distribution set of grid points far from every class center

    Args:
        grid (numpy.ndarray): M x 2 grid points
        centers (numpy.ndarray): C x 2 class centers
        distance (float): Minimal Euclidean distance to the nearest center
        num_classes (int): Number of classes of the in-distribution data

    Returns:
        Dataset: far grid points with role ood and meaningless zero labels

    Raises:
        ConfigError: When no grid point is that far away
    """
    centers = np.asarray(centers, dtype=np.float64)
    nearest = np.min(np.linalg.norm(grid[:, None, :] - centers[None, :, :], axis=2), axis=1)
    far = grid[nearest >= distance]
    if len(far) == 0:
        raise ConfigError('No grid point is {0} away from the class centers'.format(distance), 'far_distance')
    return Dataset(far, np.zeros(len(far), dtype=np.int64), num_classes, name='far_grid', role='ood')


Standardizer = namedtuple('Standardizer', ['mean', 'std'])
"""Global scalar mean and standard deviation of the inputs of the in-distribution train split"""


def fit_standardizer(dataset):
    """Statistics to standardize inputs to zero mean and unit variance

    Args:
        dataset (Dataset): In-distribution train split

    Returns:
        Standardizer: mean and std over all entries
    """
    mean = float(dataset.inputs.mean())
    std = float(dataset.inputs.std())
    if std == 0:
        LOGGER.warning('Inputs of %s have zero variance, using std=1', dataset.name)
        std = 1.0
    return Standardizer(mean, std)


def standardize(dataset, standardizer):
    return dataset.replace(inputs=(dataset.inputs - standardizer.mean) / standardizer.std)


def read_idx(images_path, labels_path, standardizer=None, name=None, role='train', num_classes=10):
    """Read a MNIST family dataset from a pair of IDX files

    Pixels are scaled to [0, 1] by dividing by 255.
    Standardization needs statistics of the train split, so it is applied only when a standardizer is given.

    Args:
        images_path (str): Filename of IDX images file
        labels_path (str): Filename of IDX labels file
        standardizer (Standardizer): Statistics to standardize with
        name (str): Name of dataset, defaults to images filename
        role (str): Role of dataset
        num_classes (int): Number of classes

    Returns:
        Dataset: dataset with flattened images

    Raises:
        FormatError: When files are malformed or image and label counts differ
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise FormatError('{0} has {1} images, but {2} has {3} labels'.format(
            images_path, len(images), labels_path, len(labels)))
    count, rows, columns = images.shape
    inputs = images.reshape(count, rows * columns).astype(np.float64) / 255.0
    dataset = Dataset(inputs, labels, num_classes,
                      name=images_path if name is None else name,
                      role=role,
                      image_shape=(1, rows, columns))
    LOGGER.info('Read %d images of %dx%d from %s', count, rows, columns, images_path)
    if standardizer is not None:
        dataset = standardize(dataset, standardizer)
    return dataset


def _single_channel_images(dataset):
    image_shape = dataset.image_shape
    if image_shape is None:
        image_shape = (1, 28, 28)
    if image_shape[0] != 1 or int(np.prod(image_shape)) != dataset.input_dim:
        raise ShapeError('Expected 1-channel images, got input dimension {0} and image shape {1}'.format(
            dataset.input_dim, dataset.image_shape))
    return dataset.inputs.reshape((len(dataset),) + tuple(image_shape)), image_shape


def replicate_channels(dataset, channels=3):
    """Copy a 1-channel image dataset into each of channels"""
    images, image_shape = _single_channel_images(dataset)
    replicated = np.repeat(images, channels, axis=1)
    return dataset.replace(inputs=replicated.reshape(len(dataset), -1),
                           image_shape=(channels,) + tuple(image_shape[1:]))


def make_cmnist(dataset, seed):
    """Colored variant of a 1-channel image dataset

    Each sample is replicated to 3 channels and then one channel, chosen uniformly at random per sample, is zeroed.

    Args:
        dataset (Dataset): 1-channel images
        seed (int): Random seed

    Returns:
        Dataset: 3-channel images, input dimension tripled

    Raises:
        ShapeError: When dataset does not hold 1-channel images
    """
    rgb = replicate_channels(dataset)
    images = rgb.inputs.reshape((len(rgb),) + rgb.image_shape)
    rng = random_generator(seed, CMNIST_STREAM)
    zeroed = rng.integers(0, 3, size=len(rgb))
    images[np.arange(len(rgb)), zeroed] = 0.0
    return rgb.replace(inputs=images.reshape(len(rgb), -1), name='c' + str(dataset.name))


def make_oodom(dataset):
    """Out-of-domain variant obtained by scaling already standardized inputs by 255"""
    return dataset.replace(inputs=dataset.inputs * 255.0, role='ood', name=str(dataset.name) + '_oodom')


def add_gaussian_noise(dataset, variance, seed):
    """Degrade inputs with additive zero mean Gaussian noise

    Args:
        dataset (Dataset): Dataset to degrade
        variance (float): Noise variance
        seed (int): Random seed

    Returns:
        Dataset: noisy copy
    """
    if variance < 0:
        raise ConfigError('Noise variance must be non-negative', 'variance')
    rng = random_generator(seed, GAUSSIAN_NOISE_STREAM)
    noise = np.sqrt(variance) * rng.standard_normal(dataset.inputs.shape)
    return dataset.replace(inputs=dataset.inputs + noise)


def subsample(dataset, fraction, seed):
    """Random subset with ceil(fraction * N) samples, in original order"""
    if not 0 < fraction <= 1:
        raise ConfigError('Fraction must be in (0, 1], got {0}'.format(fraction), 'fraction')
    count = int(np.ceil(fraction * len(dataset)))
    rng = random_generator(seed, SUBSAMPLE_STREAM)
    indices = np.sort(rng.choice(len(dataset), size=count, replace=False))
    return dataset.subset(indices)


def inject_label_noise(dataset, rho, seed):
    """Reassign labels of a random fraction of the samples

    The labels of ceil(rho * N) uniformly chosen samples are redrawn uniformly from all classes,
    so a redrawn label can equal the original one.

    Args:
        dataset (Dataset): Train dataset
        rho (float): Fraction of samples to relabel
        seed (int): Random seed

    Returns:
        Dataset: copy with noisy labels

    Raises:
        ConfigError: When rho is outside [0, 1]
    """
    if not 0 <= rho <= 1:
        raise ConfigError('Label noise fraction must be in [0, 1], got {0}'.format(rho), 'rho')
    if dataset.role != 'train':
        LOGGER.warning('Injecting label noise into %s dataset %s', dataset.role, dataset.name)
    count = int(np.ceil(rho * len(dataset)))
    rng = random_generator(seed, LABEL_NOISE_STREAM)
    touched = rng.choice(len(dataset), size=count, replace=False)
    labels = dataset.labels.copy()
    labels[touched] = rng.integers(0, dataset.num_classes, size=count)
    return dataset.replace(labels=labels)


def split(dataset, seed, val_fraction=0.2):
    """Split a training pool into train and validation sets

    Args:
        dataset (Dataset): Training pool
        seed (int): Random seed of the permutation
        val_fraction (float): Fraction of samples in validation set, rounded down

    Returns:
        tuple[Dataset, Dataset]: train and val

    Raises:
        ConfigError: When pool has fewer than 5 samples
    """
    if len(dataset) < 5:
        raise ConfigError('Can not split fewer than 5 samples, got {0}'.format(len(dataset)), 'dataset')
    rng = random_generator(seed, SPLIT_STREAM)
    order = rng.permutation(len(dataset))
    val_count = int(np.floor(val_fraction * len(dataset)))
    train = dataset.subset(order[val_count:], role='train')
    val = dataset.subset(order[:val_count], role='val')
    return train, val


def _transform_oodom(dataset, seed, **kwargs):
    return make_oodom(dataset)


def _transform_cmnist(dataset, seed, **kwargs):
    return make_cmnist(dataset, seed)


def _transform_rgb(dataset, seed, channels=3):
    return replicate_channels(dataset, channels)


def _transform_gaussian_noise(dataset, seed, variance=0.1):
    return add_gaussian_noise(dataset, variance, seed)


def _transform_subsample(dataset, seed, fraction=0.1):
    return subsample(dataset, fraction, seed)


def _transform_label_noise(dataset, seed, rho=0.1):
    return inject_label_noise(dataset, rho, seed)


TRANSFORMS = {
    'oodom': _transform_oodom,
    'cmnist': _transform_cmnist,
    'rgb': _transform_rgb,
    'gaussian_noise': _transform_gaussian_noise,
    'subsample': _transform_subsample,
    'label_noise': _transform_label_noise,
}
"""Transforms available in dataset transform chains, keyed by kind"""

POST_STANDARDIZE_TRANSFORMS = frozenset(['oodom', 'gaussian_noise'])
"""Transforms which act on standardized inputs"""


def apply_transforms(dataset, chain, seed, stage='pre'):
    """Apply the transforms of a chain belonging to a stage

    Args:
        dataset (Dataset): Input
        chain (list[dict]): Each item has a `kind` key and optional keyword arguments of the transform
        seed (int): Random seed
        stage (str): `pre` applies transforms that act on raw [0, 1] inputs,
            `post` the ones acting on standardized inputs

    Returns:
        Dataset: transformed copy
    """
    for item in chain:
        item = dict(item)
        kind = item.pop('kind')
        if kind not in TRANSFORMS:
            raise ConfigError('Unknown transform {0}'.format(kind), 'kind')
        is_post = kind in POST_STANDARDIZE_TRANSFORMS
        if is_post != (stage == 'post'):
            continue
        LOGGER.debug('Applying %s to %s', kind, dataset.name)
        dataset = TRANSFORMS[kind](dataset, seed, **item)
    return dataset
