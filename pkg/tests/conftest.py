import numpy as np
import pytest

from dumlab.data import Dataset, ToySpec, make_collapse_toy
from dumlab.idx import write_idx_images, write_idx_labels
from dumlab.model import build_model


@pytest.fixture
def toy():
    dataset, grid = make_collapse_toy(ToySpec(count_per_class=30, grid_resolution=5), 0)
    return dataset


@pytest.fixture
def blobs():
    rng = np.random.default_rng(3)
    inputs = np.concatenate([rng.normal(-2, 0.5, (20, 4)), rng.normal(2, 0.5, (20, 4))])
    labels = np.repeat([0, 1], 20)
    return Dataset(inputs, labels, 2, name='blobs')


@pytest.fixture
def encoder_fields():
    return {
        'input_dim': 2,
        'hidden_dim': 8,
        'num_layers': 3,
        'latent_dim': 2,
        'constraint': 'none',
    }


@pytest.fixture
def natpn_fields():
    return {
        'type': 'natpn',
        'latent_dim': 2,
        'prior': {'num_classes': 2},
        'budget': {'mode': 'dim_normalized'},
        'flow_layers': 2,
        'flow_nll_weight': 0.0,
    }


@pytest.fixture
def due_fields():
    return {
        'type': 'due',
        'latent_dim': 2,
        'num_classes': 2,
        'num_inducing': 4,
        'kernel': {'family': 'rbf'},
        'num_samples': 2,
    }


@pytest.fixture
def natpn_model(encoder_fields, natpn_fields):
    return build_model(encoder_fields, natpn_fields, 0)


@pytest.fixture
def due_model(encoder_fields, due_fields):
    return build_model(encoder_fields, due_fields, 0)


def write_idx_pair(directory, name, count, seed, rows=4, columns=4, num_classes=3):
    """Write random images and labels as gzipped IDX files, returns their filenames"""
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(count, rows, columns), dtype=np.uint8)
    labels = rng.integers(0, num_classes, size=count, dtype=np.uint8)
    images_fn = str(directory.join(name + '-images-idx3-ubyte.gz'))
    labels_fn = str(directory.join(name + '-labels-idx1-ubyte.gz'))
    write_idx_images(images_fn, images)
    write_idx_labels(labels_fn, labels)
    return images_fn, labels_fn


@pytest.fixture
def idx_files(tmpdir):
    """Tiny MNIST look-alike with train, test and one out-of-distribution set of 4x4 images and 3 classes"""
    return {
        'train': write_idx_pair(tmpdir, 'train', 40, 1),
        'test': write_idx_pair(tmpdir, 'test', 12, 2),
        'ood': write_idx_pair(tmpdir, 'ood', 12, 3),
    }
