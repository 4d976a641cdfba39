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
"""Run experiments and sweeps described by config files.

Output directory layout of an experiment::

    <output>/config.yml             complete config
    <output>/seed<k>/results.csv    long format metrics of seed k
    <output>/seed<k>/train_log.csv  per epoch loss, learning rates and gradient norm
    <output>/seed<k>/checkpoint_<phase>.h5
    <output>/seed<k>/grid.csv       uncertainty field over the lattice grid, 2D inputs only
    <output>/results.csv            all seeds
    <output>/summary.json           mean and std over seeds per metric and dataset

Functions which implement a command return an exit code:
0 on success, 2 for invalid configuration or usage, 3 for numerical failures and 4 when output can not be written.
"""

import itertools
import json
import logging
import os
import shutil
from concurrent.futures import ProcessPoolExecutor

import pandas as pd

from . import config as experiment_config
from .data import (ToySpec, apply_transforms, fit_standardizer, make_collapse_toy, make_far_points, read_idx,
                   split, standardize)
from .errors import ConfigError, DumLabError, FormatError, NumericalError
from .evaluate import aggregate, evaluate_model, uncertainty_grid
from .model import build_model
from .numcore import random_generator
from .trainer import PHASE_ORDER, TrainData, TrainPlan, run

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_OUTPUT = 4
THREADS_VARIABLE = 'DUM_LAB_THREADS'
TOY_TEST_STREAM = 81


class ExperimentData(object):
    """Datasets of one seed of an experiment

    Attributes:
        train (TrainData): Splits used for training
        test (Dataset): In-distribution test set
        ood (list[Dataset]): Out-of-distribution sets
        labelled_ood (list[str]): Names of the out-of-distribution sets whose labels are meaningful
        grid_transform (callable): Maps raw grid points to model inputs or None
    """

    def __init__(self, train, test, ood, labelled_ood=(), grid_transform=None):
        self.train = train
        self.test = test
        self.ood = list(ood)
        self.labelled_ood = list(labelled_ood)
        self.grid_transform = grid_transform


def _toy_data(dataset_config, seed):
    toy = dict(dataset_config['toy'])
    far_distance = toy.pop('far_distance')
    spec = ToySpec(**toy)
    pool, grid = make_collapse_toy(spec, seed)
    test_seed = int(random_generator(seed, TOY_TEST_STREAM).integers(2 ** 31))
    test = make_collapse_toy(spec, test_seed)[0].replace(name='test', role='test')
    far = make_far_points(grid, spec.centers, far_distance, pool.num_classes)
    return pool, test, [(far, [])]


def _idx_data(dataset_config):
    num_classes = dataset_config['num_classes']
    pool = read_idx(dataset_config['train']['images'], dataset_config['train']['labels'],
                    name='train', num_classes=num_classes)
    test = read_idx(dataset_config['test']['images'], dataset_config['test']['labels'],
                    name='test', role='test', num_classes=num_classes)
    ood = []
    for entry in dataset_config['ood']:
        dataset = read_idx(entry['images'], entry['labels'], name=entry['name'], role='ood', num_classes=num_classes)
        ood.append((dataset, entry['transforms']))
    return pool, test, ood


def load_data(config, seed):
    """Build the datasets of an experiment for a seed

    Transforms in `transforms` apply to every in-distribution set, `train_transforms` to the train split
    only, so validation labels stay clean, and `pretrain_transforms` to the copy of the train split
    used by the pretrain phase. Out-of-distribution sets only get their own transforms.
    Standardization statistics come from the train split.

    Args:
        config (dict): Complete experiment document
        seed (int): Seed

    Returns:
        ExperimentData: datasets
    """
    dataset_config = config['dataset']
    if dataset_config['kind'] == 'toy':
        pool, test, ood = _toy_data(dataset_config, seed)
    else:
        pool, test, ood = _idx_data(dataset_config)
    names = [d.name for d, _ in ood]
    chain = dataset_config['transforms']
    train_chain = dataset_config['train_transforms']
    pretrain_chain = dataset_config['pretrain_transforms']
    pool = apply_transforms(pool, chain, seed)
    test = apply_transforms(test, chain, seed)
    ood = [(apply_transforms(d, ood_chain, seed), ood_chain) for d, ood_chain in ood]
    train, val = split(pool, seed, dataset_config['val_fraction'])
    train = apply_transforms(train, train_chain, seed)
    pretrain = apply_transforms(train, pretrain_chain, seed) if pretrain_chain else None
    grid_transform = None
    if dataset_config['standardize']:
        standardizer = fit_standardizer(train)
        train, val, test = [standardize(d, standardizer) for d in (train, val, test)]
        ood = [(standardize(d, standardizer), ood_chain) for d, ood_chain in ood]
        if pretrain is not None:
            pretrain = standardize(pretrain, standardizer)

        def grid_transform(points):
            return (points - standardizer.mean) / standardizer.std
    train = apply_transforms(apply_transforms(train, chain, seed, 'post'), train_chain, seed, 'post')
    test = apply_transforms(test, chain, seed, 'post').replace(name='test')
    if pretrain is not None:
        pretrain = apply_transforms(pretrain, pretrain_chain, seed, 'post')
    # shifts like cmnist rename their input, results are keyed by the configured name
    ood = [apply_transforms(d, ood_chain, seed, 'post').replace(name=name)
           for (d, ood_chain), name in zip(ood, names)]
    for index, d in enumerate(ood):
        if d.input_dim != train.input_dim:
            raise ConfigError('Input dimension {0} of {1} differs from training data {2}'.format(
                d.input_dim, d.name, train.input_dim), 'dataset.ood.{0}.transforms'.format(index))
    labelled = [entry['name'] for entry in dataset_config['ood'] if entry['labelled']]
    return ExperimentData(TrainData(train, val, pretrain), test, ood, labelled, grid_transform)


def model_fields(config, input_dim):
    """Encoder and head descriptions accepted by :func:`dumlab.model.build_model`

    Args:
        config (dict): Complete experiment document
        input_dim (int): Input dimension of the data

    Returns:
        tuple[dict, dict]: encoder and head fields
    """
    encoder = dict(config['encoder'], input_dim=input_dim)
    head = config['head']
    num_classes = config['dataset']['num_classes']
    latent_dim = encoder['latent_dim']
    if head['type'] == 'natpn':
        return encoder, {
            'type': 'natpn',
            'latent_dim': latent_dim,
            'prior': {
                'num_classes': num_classes,
                'n_prior': head['n_prior'],
                'chi_prior': head['chi_prior'],
                'entropy_lambda': head['entropy_lambda'],
            },
            'budget': head['budget'],
            'flow_layers': head['flow_layers'],
            'flow_nll_weight': head['flow_nll_weight'],
        }
    return encoder, {
        'type': 'due',
        'latent_dim': latent_dim,
        'num_classes': num_classes,
        'num_inducing': head['num_inducing'],
        'kernel': head['kernel'],
        'num_samples': head['num_samples'],
    }


def train_plan(config, seed):
    """Training plan of an experiment for a seed"""
    train = config['train']
    phases = [dict(train['phases'][name], name=name) for name in PHASE_ORDER if name in train['phases']]
    return TrainPlan.from_dict({
        'phases': phases,
        'seed': seed,
        'batch_size': train['batch_size'],
        'grad_clip': train['grad_clip'],
    })


def run_seed(config, seed, progress=False):
    """Build, train and evaluate a model for one seed and write its artifacts

    Args:
        config (dict): Complete experiment document
        seed (int): Seed
        progress (bool): Show progress bar of epochs

    Returns:
        pandas.DataFrame: long format results of seed
    """
    seed_dir = os.path.join(config['output'], 'seed{0}'.format(seed))
    if not os.path.isdir(seed_dir):
        os.makedirs(seed_dir)
    LOGGER.info('Seed %d of %s', seed, config['name'])
    data = load_data(config, seed)
    encoder_fields, head_fields = model_fields(config, data.train.train.input_dim)
    model = build_model(encoder_fields, head_fields, seed)
    checkpoint_dir = seed_dir if config['eval']['checkpoints'] else None
    model, log = run(train_plan(config, seed), model, data.train, checkpoint_dir, progress)
    log.to_csv(os.path.join(seed_dir, 'train_log.csv'), index=False)
    results = evaluate_model(model, data.test, data.ood,
                             method=config['head']['type'],
                             setting=config['setting'],
                             seed=seed,
                             labelled_ood=data.labelled_ood)
    results.to_csv(os.path.join(seed_dir, 'results.csv'), index=False)
    if config['eval']['grid'] and data.train.train.input_dim == 2 and config['dataset']['kind'] == 'toy':
        toy = config['dataset']['toy']
        grid = uncertainty_grid(model, toy['grid_extent'], toy['grid_resolution'], data.grid_transform)
        grid.to_csv(os.path.join(seed_dir, 'grid.csv'))
    return results


def read_seed_results(out_dir, seeds):
    """Per seed result tables written by :func:`run_seed`"""
    return [pd.read_csv(os.path.join(out_dir, 'seed{0}'.format(seed), 'results.csv'), float_precision='round_trip')
            for seed in seeds]


def write_summary(config, seeds):
    """Aggregate the per seed result files of an experiment into results.csv and summary.json

    Returns:
        dumlab.evaluate.MetricReport: aggregated report
    """
    out_dir = config['output']
    results = pd.concat(read_seed_results(out_dir, seeds), ignore_index=True)
    results.to_csv(os.path.join(out_dir, 'results.csv'), index=False)
    report = aggregate(results)
    summary = {
        'name': config['name'],
        'setting': config['setting'],
        'method': config['head']['type'],
        'seeds': list(seeds),
        'metrics': report.to_dict(),
    }
    with open(os.path.join(out_dir, 'summary.json'), 'w') as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    LOGGER.info('Wrote summary of %d seeds to %s', len(seeds), out_dir)
    return report


def worker_count():
    """Number of worker processes for seeds, from the DUM_LAB_THREADS environment variable"""
    value = os.environ.get(THREADS_VARIABLE, '1')
    try:
        count = int(value)
    except ValueError:
        raise ConfigError('{0} must be an integer, got {1}'.format(THREADS_VARIABLE, value), THREADS_VARIABLE)
    return max(1, count)


def prepare_output(out_dir, force=False):
    """Create an empty output directory

    Raises:
        ConfigError: When the directory exists, is not empty and force is False
    """
    if os.path.isdir(out_dir) and os.listdir(out_dir):
        if not force:
            raise ConfigError('Output directory {0} exists, use --force to overwrite'.format(out_dir), 'output')
        LOGGER.warning('Overwriting output directory %s', out_dir)
        shutil.rmtree(out_dir)
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)


def execute(config, force=False, progress=False):
    """Run every seed of a complete config and aggregate, raising on failure

    Completed seeds keep their artifacts when a later seed fails.

    Args:
        config (dict): Complete experiment document
        force (bool): Overwrite existing output directory
        progress (bool): Show progress bar of epochs

    Returns:
        dumlab.evaluate.MetricReport: aggregated report
    """
    experiment_config.check_paths(config)
    prepare_output(config['output'], force)
    with open(os.path.join(config['output'], 'config.yml'), 'w') as f:
        f.write(experiment_config.dump(config))
    seeds = config['seeds']
    workers = min(worker_count(), len(seeds))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(run_seed, config, seed) for seed in seeds]
            for future in futures:
                future.result()
    else:
        for seed in seeds:
            run_seed(config, seed, progress)
    return write_summary(config, seeds)


def _guarded(action):
    """Exit code of running action, errors are logged"""
    try:
        action()
    except ConfigError as e:
        LOGGER.error('Invalid configuration: %s', e)
        return EXIT_CONFIG
    except FormatError as e:
        LOGGER.error('Invalid input data: %s', e)
        return EXIT_CONFIG
    except NumericalError as e:
        LOGGER.error('Numerical failure in phase %s: %s', e.phase, e)
        return EXIT_NUMERICAL
    except DumLabError as e:
        LOGGER.error('Invalid experiment: %s', e)
        return EXIT_CONFIG
    except (IOError, OSError) as e:
        LOGGER.error('Can not write output: %s', e)
        return EXIT_OUTPUT
    return EXIT_OK


def _override(config, seeds=None, out=None):
    if seeds is not None:
        config = dict(config, seeds=list(seeds))
    if out is not None:
        config = dict(config, output=out)
    return experiment_config.normalize(config)


def parse_seeds(text):
    """Seeds from a comma separated list like 0,1,2"""
    if text is None:
        return None
    try:
        return [int(value) for value in text.split(',') if value.strip()]
    except ValueError:
        raise ConfigError('Seeds must be comma separated integers, got {0}'.format(text), 'seeds')


def run_experiment(config, seeds=None, force=False, out=None, progress=False):
    """Run an experiment described by a config file

    Args:
        config (str): Filename of YAML experiment config
        seeds (str): Comma separated seeds which replace the seeds of the config
        force (bool): Overwrite existing output directory
        out (str): Output directory which replaces the one of the config
        progress (bool): Show progress bar of epochs

    Returns:
        int: exit code
    """
    def action():
        experiment = _override(experiment_config.load(config), parse_seeds(seeds), out)
        execute(experiment, force, progress)
    return _guarded(action)


def sweep_axes(config, axis=None, values=None):
    """Axes of a sweep, from the command line or else from the sweep block of the config

    Args:
        config (dict): Complete experiment document
        axis (list[str]): Dotted paths
        values (list[str]): Comma separated values, one string per axis

    Returns:
        list[tuple[str, list]]: path and values per axis

    Raises:
        ConfigError: When an axis does not name a config leaf or axes and values do not pair up
    """
    if axis:
        values = values or []
        if len(axis) != len(values):
            raise ConfigError('Every --axis needs its own --values', 'sweep.axes')
        axes = [(path, [experiment_config.coerce_value(v) for v in text.split(',')])
                for path, text in zip(axis, values)]
    else:
        axes = [(entry['path'], list(entry['values'])) for entry in config['sweep']['axes']]
    if not axes:
        raise ConfigError('No sweep axis given', 'sweep.axes')
    for path, _ in axes:
        experiment_config.get_by_path(config, path)
    return axes


def _label(value):
    return str(value).replace(os.sep, '_')


def execute_sweep(config, axes, force=False, progress=False):
    """Run an experiment for every combination of axis values

    Args:
        config (dict): Complete experiment document, its output directory holds the sweep
        axes (list[tuple[str, list]]): Path and values per axis
        force (bool): Overwrite existing output directory
        progress (bool): Show progress bar of epochs

    Returns:
        pandas.DataFrame: long format results keyed by axis, axis_value and seed
    """
    out_dir = config['output']
    prepare_output(out_dir, force)
    paths = [path for path, _ in axes]
    frames = []
    for combination in itertools.product(*[values for _, values in axes]):
        variant = config
        for path, value in zip(paths, combination):
            variant = experiment_config.set_by_path(variant, path, value)
        label = ','.join('{0}={1}'.format(path, _label(value)) for path, value in zip(paths, combination))
        variant = experiment_config.normalize(dict(variant, output=os.path.join(out_dir, label), setting=label))
        LOGGER.info('Sweep %s', label)
        execute(variant, False, progress)
        results = pd.concat(read_seed_results(variant['output'], variant['seeds']), ignore_index=True)
        results.insert(0, 'axis_value', ';'.join(str(value) for value in combination))
        results.insert(0, 'axis', ';'.join(paths))
        frames.append(results)
        pd.concat(frames, ignore_index=True).to_csv(os.path.join(out_dir, 'sweep.csv'), index=False)
    return pd.concat(frames, ignore_index=True)


def sweep(config, axis=None, values=None, seeds=None, force=False, out=None, progress=False):
    """Run an experiment for each value of one or more config leaves

    Args:
        config (str): Filename of YAML experiment config
        axis (list[str]): Dotted paths of config leaves, defaults to the sweep block of the config
        values (list[str]): Comma separated values for each axis
        seeds (str): Comma separated seeds which replace the seeds of the config
        force (bool): Overwrite existing output directory
        out (str): Output directory, defaults to the output of the config with a _sweep suffix
        progress (bool): Show progress bar of epochs

    Returns:
        int: exit code
    """
    def action():
        experiment = experiment_config.load(config)
        axes = sweep_axes(experiment, axis, values)
        experiment = _override(experiment, parse_seeds(seeds), out or experiment['output'] + '_sweep')
        execute_sweep(experiment, axes, force, progress)
    return _guarded(action)


def emit_recipes(out):
    """Write the canonical experiment configs

    Args:
        out (str): Directory to write to

    Returns:
        int: exit code
    """
    def action():
        filenames = experiment_config.write_recipes(out)
        LOGGER.info('Wrote %d recipes to %s', len(filenames), out)
    return _guarded(action)
