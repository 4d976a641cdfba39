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
"""Experiment configuration files.

An experiment is a YAML document validated against :data:`SCHEMA`.
Parsing fills in every default, so a parsed config serializes to a complete document
and parsing that document again gives the same config.
Leaves are addressed by dotted paths like `encoder.latent_dim` or `train.phases.main.head_lr`.
"""

import copy
import logging
import os

import jsonschema
import yaml
from jsonschema.exceptions import best_match

from .encoder import CONSTRAINTS, LIPSCHITZ_DEFAULTS, EncoderConfig
from .errors import ConfigError
from .gp import KERNEL_FAMILIES, KernelConfig
from .natpn import BUDGET_MODES, BudgetConfig, PriorConfig
from .optim import OPTIMIZERS, SCHEDULES
from .trainer import PHASE_ORDER, SCHEMES, STABILIZERS, TRAINABLE, Phase, TrainPlan

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_SEEDS = [0, 1, 2, 3, 4]
DEFAULT_FAR_DISTANCE = 4.0
"""Toy grid points farther than this from every class center are out-of-distribution"""

_number = {'type': 'number'}
_positive = {'type': 'number', 'exclusiveMinimum': 0}
_non_negative = {'type': 'number', 'minimum': 0}
_count = {'type': 'integer', 'minimum': 1}
_name = {'type': 'string', 'minLength': 1}

_transform = {
    'type': 'object',
    'required': ['kind'],
    'properties': {
        'kind': {'enum': ['oodom', 'cmnist', 'rgb', 'gaussian_noise', 'subsample', 'label_noise']},
        'channels': _count,
        'variance': _non_negative,
        'fraction': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
        'rho': {'type': 'number', 'minimum': 0, 'maximum': 1},
    },
    'additionalProperties': False,
}
_chain = {'type': 'array', 'items': _transform}
_idx_pair = {
    'type': 'object',
    'required': ['images', 'labels'],
    'properties': {'images': _name, 'labels': _name},
    'additionalProperties': False,
}
_schedule = {
    'type': 'object',
    'properties': {
        'kind': {'enum': list(SCHEDULES)},
        'eta_min': _non_negative,
        'milestones': {'type': 'array', 'items': {'type': 'number', 'minimum': 0, 'maximum': 1}},
        'factor': _positive,
    },
    'additionalProperties': False,
}
_phase = {
    'type': 'object',
    'required': ['epochs'],
    'properties': {
        'epochs': {'type': 'integer', 'minimum': 0},
        'encoder_lr': _non_negative,
        'head_lr': _non_negative,
        'encoder_optimizer': {'enum': list(OPTIMIZERS)},
        'head_optimizer': {'enum': list(OPTIMIZERS)},
        'encoder_schedule': {'anyOf': [{'enum': list(SCHEDULES)}, _schedule]},
        'head_schedule': {'anyOf': [{'enum': list(SCHEDULES)}, _schedule]},
        'encoder_weight_decay': _non_negative,
        'head_weight_decay': _non_negative,
        'trainable': {'enum': list(TRAINABLE) + [None]},
        'stabilizers': {'type': 'array', 'items': {'enum': list(STABILIZERS)}, 'uniqueItems': True},
        'scheme': {'enum': list(SCHEMES)},
        'objective': {'enum': ['cross_entropy', 'head', None]},
    },
    'additionalProperties': False,
}

SCHEMA = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'title': 'dumlab experiment',
    'type': 'object',
    'required': ['schema_version', 'name', 'dataset', 'head'],
    'properties': {
        'schema_version': {'const': SCHEMA_VERSION},
        'name': _name,
        'setting': _name,
        'seeds': {'type': 'array', 'items': {'type': 'integer', 'minimum': 0}, 'minItems': 1, 'uniqueItems': True},
        'output': _name,
        'dataset': {
            'type': 'object',
            'required': ['kind'],
            'properties': {
                'kind': {'enum': ['toy', 'idx']},
                'num_classes': {'type': 'integer', 'minimum': 2},
                'toy': {
                    'type': 'object',
                    'properties': {
                        'centers': {'type': 'array', 'minItems': 2,
                                    'items': {'type': 'array', 'items': _number, 'minItems': 2, 'maxItems': 2}},
                        'count_per_class': _count,
                        'std': _positive,
                        'grid_extent': {'type': 'array', 'items': _number, 'minItems': 4, 'maxItems': 4},
                        'grid_resolution': {'type': 'integer', 'minimum': 2},
                        'far_distance': _positive,
                    },
                    'additionalProperties': False,
                },
                'train': _idx_pair,
                'test': _idx_pair,
                'standardize': {'type': 'boolean'},
                'val_fraction': {'type': 'number', 'minimum': 0, 'exclusiveMaximum': 1},
                'transforms': _chain,
                'train_transforms': _chain,
                'pretrain_transforms': _chain,
                'ood': {
                    'type': 'array',
                    'items': {
                        'type': 'object',
                        'required': ['name'],
                        'properties': {
                            'name': _name,
                            'images': _name,
                            'labels': _name,
                            'transforms': _chain,
                            'labelled': {'type': 'boolean'},
                        },
                        'additionalProperties': False,
                    },
                },
            },
            'additionalProperties': False,
            'if': {'properties': {'kind': {'const': 'idx'}}},
            'then': {'required': ['train', 'test']},
        },
        'encoder': {
            'type': 'object',
            'properties': {
                'hidden_dim': _count,
                'num_layers': {'type': 'integer', 'minimum': 2},
                'latent_dim': _count,
                'constraint': {'enum': list(CONSTRAINTS)},
                'lipschitz_c': _positive,
                'use_final_batchnorm': {'type': 'boolean'},
                'recon_lambda': _non_negative,
                'power_iteration_steps': _count,
            },
            'additionalProperties': False,
        },
        'head': {
            'type': 'object',
            'required': ['type'],
            'properties': {
                'type': {'enum': ['natpn', 'due']},
                'n_prior': {'anyOf': [_positive, {'type': 'null'}]},
                'chi_prior': {'anyOf': [{'type': 'array', 'items': _positive}, {'type': 'null'}]},
                'entropy_lambda': _non_negative,
                'budget': {
                    'type': 'object',
                    'properties': {
                        'mode': {'enum': list(BUDGET_MODES)},
                        'constant_value': {'anyOf': [_positive, {'type': 'null'}]},
                    },
                    'additionalProperties': False,
                },
                'flow_layers': _count,
                'flow_nll_weight': _non_negative,
                'num_inducing': _count,
                'kernel': {
                    'type': 'object',
                    'properties': {
                        'family': {'enum': list(KERNEL_FAMILIES)},
                        'lengthscale': _positive,
                        'outputscale': _positive,
                        'rq_alpha': _positive,
                    },
                    'additionalProperties': False,
                },
                'num_samples': _count,
            },
            'additionalProperties': False,
            'if': {'properties': {'type': {'const': 'natpn'}}},
            'then': {'not': {'anyOf': [{'required': [key]} for key in ('num_inducing', 'kernel', 'num_samples')]}},
            'else': {'not': {'anyOf': [{'required': [key]} for key in
                                       ('n_prior', 'chi_prior', 'entropy_lambda', 'budget', 'flow_layers',
                                        'flow_nll_weight')]}},
        },
        'train': {
            'type': 'object',
            'properties': {
                'batch_size': _count,
                'grad_clip': {'anyOf': [_positive, {'type': 'null'}]},
                'phases': {
                    'type': 'object',
                    'required': ['main'],
                    'properties': {name: _phase for name in PHASE_ORDER},
                    'additionalProperties': False,
                },
            },
            'additionalProperties': False,
        },
        'eval': {
            'type': 'object',
            'properties': {
                'grid': {'type': 'boolean'},
                'checkpoints': {'type': 'boolean'},
            },
            'additionalProperties': False,
        },
        'sweep': {
            'type': 'object',
            'properties': {
                'axes': {
                    'type': 'array',
                    'items': {
                        'type': 'object',
                        'required': ['path', 'values'],
                        'properties': {'path': _name, 'values': {'type': 'array', 'minItems': 1}},
                        'additionalProperties': False,
                    },
                },
            },
            'additionalProperties': False,
        },
    },
    'additionalProperties': False,
}
"""JSON schema of an experiment document"""


def _error_path(error):
    path = [str(p) for p in error.absolute_path]
    if error.validator == 'required':
        missing = [key for key in error.validator_value if key not in error.instance]
        path.extend(missing[:1])
    return '.'.join(path) or '<root>'


def validate(document):
    """Check document against :data:`SCHEMA`

    Raises:
        ConfigError: With the dotted path of the offending leaf as field
    """
    validator = jsonschema.Draft7Validator(SCHEMA)
    error = best_match(validator.iter_errors(document))
    if error is not None:
        raise ConfigError(error.message, _error_path(error))


def _with_defaults(fields, defaults):
    merged = copy.deepcopy(defaults)
    merged.update(copy.deepcopy(fields or {}))
    return merged


def _in_block(block, build):
    """Run build, prefixing the field of a raised ConfigError with block"""
    try:
        return build()
    except ConfigError as e:
        field = block if not e.field else '{0}.{1}'.format(block, e.field)
        raise ConfigError(str(e).split(': ', 1)[-1] if e.field else str(e), field)
    except TypeError as e:
        raise ConfigError(str(e), block)


def _normalize_dataset(fields):
    dataset = _with_defaults(fields, {
        'val_fraction': 0.2,
        'transforms': [],
        'train_transforms': [],
        'pretrain_transforms': [],
        'ood': [],
    })
    if dataset['kind'] == 'toy':
        dataset['toy'] = _with_defaults(dataset.get('toy'), {
            'centers': [[-2.0, 0.0], [2.0, 0.0]],
            'count_per_class': 500,
            'std': 1.0,
            'grid_extent': [-6.0, 6.0, -6.0, 6.0],
            'grid_resolution': 50,
            'far_distance': DEFAULT_FAR_DISTANCE,
        })
        dataset.setdefault('num_classes', len(dataset['toy']['centers']))
        dataset.setdefault('standardize', False)
        if dataset['num_classes'] != len(dataset['toy']['centers']):
            raise ConfigError('Toy data has one class per center', 'dataset.num_classes')
        if dataset['ood']:
            raise ConfigError('Toy data is only tested against far grid points', 'dataset.ood')
    else:
        dataset.setdefault('num_classes', 10)
        dataset.setdefault('standardize', True)
    dataset['ood'] = [_with_defaults(ood, {'transforms': [], 'labelled': False}) for ood in dataset['ood']]
    for index, ood in enumerate(dataset['ood']):
        if not ('images' in ood and 'labels' in ood):
            raise ConfigError('Out-of-distribution set needs images and labels', 'dataset.ood.{0}.images'.format(index))
    return dataset


def _normalize_encoder(fields, head_type):
    encoder = dict(fields or {})
    encoder.setdefault('lipschitz_c', LIPSCHITZ_DEFAULTS[head_type])
    # input_dim is only known once the data is read
    config = _in_block('encoder', lambda: EncoderConfig(input_dim=1, **encoder))
    normalized = config.to_dict()
    del normalized['input_dim']
    return normalized


def _normalize_head(fields, num_classes):
    head = dict(fields)
    if head['type'] == 'natpn':
        prior = _in_block('head', lambda: PriorConfig(num_classes, head.get('n_prior'), head.get('chi_prior'),
                                                      head.get('entropy_lambda', 0.0)))
        budget = _in_block('head.budget', lambda: BudgetConfig(**head.get('budget', {})))
        return {
            'type': 'natpn',
            'n_prior': prior.n_prior,
            'chi_prior': prior.chi_prior.tolist(),
            'entropy_lambda': prior.entropy_lambda,
            'budget': budget.to_dict(),
            'flow_layers': int(head.get('flow_layers', 8)),
            'flow_nll_weight': float(head.get('flow_nll_weight', 0.0)),
        }
    kernel = _in_block('head.kernel', lambda: KernelConfig(**head.get('kernel', {})))
    return {
        'type': 'due',
        'num_inducing': int(head.get('num_inducing', 20)),
        'kernel': kernel.to_dict(),
        'num_samples': int(head.get('num_samples', 8)),
    }


def _normalize_train(fields):
    train = _with_defaults(fields, {'batch_size': 512, 'grad_clip': None, 'phases': {'main': {'epochs': 20}}})
    phases = []
    for name in PHASE_ORDER:
        if name in train['phases']:
            phases.append(_in_block('train.phases.' + name,
                                    lambda: Phase(name=name, **train['phases'][name])))
    plan = _in_block('train', lambda: TrainPlan(phases, 0, train['batch_size'], train['grad_clip']))
    normalized_phases = {}
    for phase in plan.phases:
        fields = phase.to_dict()
        del fields['name']
        normalized_phases[phase.name] = fields
    return {'batch_size': plan.batch_size, 'grad_clip': plan.grad_clip, 'phases': normalized_phases}


def normalize(document):
    """Validate document and fill in all defaults

    Args:
        document (dict): Parsed YAML document

    Returns:
        dict: complete experiment document

    Raises:
        ConfigError: When document is invalid, field names the offending leaf
    """
    validate(document)
    head_type = document['head']['type']
    config = {
        'schema_version': SCHEMA_VERSION,
        'name': document['name'],
        'setting': document.get('setting', document['name']),
        'seeds': list(document.get('seeds', DEFAULT_SEEDS)),
        'output': document.get('output', os.path.join('results', document['name'])),
    }
    config['dataset'] = _normalize_dataset(document['dataset'])
    config['encoder'] = _normalize_encoder(document.get('encoder'), head_type)
    config['head'] = _normalize_head(document['head'], config['dataset']['num_classes'])
    config['train'] = _normalize_train(document.get('train'))
    config['eval'] = _with_defaults(document.get('eval'), {'grid': False, 'checkpoints': True})
    config['sweep'] = _with_defaults(document.get('sweep'), {'axes': []})
    validate(config)
    return config


def parse(text):
    """Experiment from YAML text

    Returns:
        dict: complete experiment document
    """
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError('Not valid YAML: {0}'.format(e))
    if not isinstance(document, dict):
        raise ConfigError('Experiment must be a mapping')
    return normalize(document)


def load(filename):
    """Read experiment config file

    Args:
        filename (str): Path of YAML file

    Returns:
        dict: complete experiment document

    Raises:
        ConfigError: When the file is unreadable or invalid
    """
    try:
        with open(filename) as f:
            text = f.read()
    except (IOError, OSError) as e:
        raise ConfigError('Can not read config {0}: {1}'.format(filename, e), 'config')
    return parse(text)


def dump(config):
    """YAML text of a config"""
    return yaml.safe_dump(config, default_flow_style=False, sort_keys=False)


def check_paths(config):
    """Check that every referenced dataset file exists

    Raises:
        ConfigError: For the first missing file, field is its dotted path
    """
    dataset = config['dataset']
    if dataset['kind'] != 'idx':
        return
    candidates = []
    for split in ('train', 'test'):
        for key in ('images', 'labels'):
            candidates.append(('dataset.{0}.{1}'.format(split, key), dataset[split][key]))
    for index, ood in enumerate(dataset['ood']):
        for key in ('images', 'labels'):
            candidates.append(('dataset.ood.{0}.{1}'.format(index, key), ood[key]))
    for field, path in candidates:
        if not os.path.isfile(path):
            raise ConfigError('File {0} does not exist'.format(path), field)


def _split_path(path):
    return [int(key) if key.isdigit() else key for key in path.split('.')]


def get_by_path(config, path):
    """Value of the leaf at a dotted path

    Raises:
        ConfigError: When the path does not exist
    """
    node = config
    for key in _split_path(path):
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError):
            raise ConfigError('Unknown config path', path)
    return node


def set_by_path(config, path, value):
    """Copy of a complete config with the leaf at the dotted path replaced, normalized again

    Args:
        config (dict): Complete experiment document
        path (str): Dotted path of an existing leaf, like encoder.latent_dim
        value: New value

    Returns:
        dict: complete experiment document

    Raises:
        ConfigError: When the path does not exist or the new value is invalid
    """
    keys = _split_path(path)
    updated = copy.deepcopy(config)
    get_by_path(updated, path)
    node = updated
    for key in keys[:-1]:
        node = node[key]
    node[keys[-1]] = value
    if path == 'dataset.num_classes':
        updated['head'].pop('chi_prior', None)
    if keys[:2] == ['train', 'phases'] and keys[-1] == 'scheme':
        # trainable components follow the new scheme
        node['trainable'] = None
    return normalize(updated)


def coerce_value(text):
    """Typed value of a command line string, YAML scalars and floats like 1e-3"""
    value = yaml.safe_load(text)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _toy_base(name, head_type, constraint='none'):
    config = {
        'schema_version': SCHEMA_VERSION,
        'name': name,
        'dataset': {'kind': 'toy', 'toy': {}},
        'encoder': {'hidden_dim': 128, 'num_layers': 4, 'latent_dim': 2, 'constraint': constraint},
        'head': {'type': head_type},
        'train': {'batch_size': 64, 'phases': {'main': {
            'epochs': 30, 'encoder_lr': 1e-3, 'head_lr': 5e-3 if head_type == 'natpn' else 1e-2,
            'encoder_schedule': 'constant', 'head_schedule': 'constant'}}},
        'eval': {'grid': True},
    }
    return config


def _mnist_dataset():
    kmnist = {'images': 'data/kmnist/t10k-images-idx3-ubyte.gz', 'labels': 'data/kmnist/t10k-labels-idx1-ubyte.gz'}
    mnist_test = {'images': 'data/mnist/t10k-images-idx3-ubyte.gz', 'labels': 'data/mnist/t10k-labels-idx1-ubyte.gz'}
    # in-distribution images are 3 channel copies, so colored MNIST is a shift in color only
    ood = [
        dict(kmnist, name='kmnist', transforms=[{'kind': 'rgb'}]),
        dict(kmnist, name='kmnist_oodom', transforms=[{'kind': 'rgb'}, {'kind': 'oodom'}]),
        dict(mnist_test, name='cmnist', transforms=[{'kind': 'cmnist'}], labelled=True),
    ]
    return {
        'kind': 'idx',
        'train': {'images': 'data/mnist/train-images-idx3-ubyte.gz', 'labels': 'data/mnist/train-labels-idx1-ubyte.gz'},
        'test': mnist_test,
        'transforms': [{'kind': 'rgb'}],
        'ood': ood,
    }


def _mnist_base(name, head_type, scheme='joint', stabilizers=()):
    head_lr = 5e-3 if head_type == 'natpn' else 1e-4
    main = {
        'epochs': 20, 'encoder_lr': 1e-3, 'head_lr': head_lr,
        'encoder_schedule': {'kind': 'cosine', 'eta_min': 5e-4},
        'head_schedule': {'kind': 'cosine', 'eta_min': min(5e-4, head_lr)},
        'encoder_weight_decay': 1e-6, 'head_weight_decay': 1e-6,
        'scheme': scheme, 'stabilizers': list(stabilizers),
    }
    phases = {
        'pretrain': {'epochs': 10, 'encoder_lr': 1e-3, 'encoder_schedule': {'kind': 'cosine', 'eta_min': 5e-4},
                     'encoder_weight_decay': 1e-6},
        'main': main,
        'finetune': {'epochs': 60, 'head_lr': head_lr, 'head_schedule': 'multistep', 'head_weight_decay': 1e-6},
    }
    return {
        'schema_version': SCHEMA_VERSION,
        'name': name,
        'dataset': _mnist_dataset(),
        'encoder': {'hidden_dim': 128, 'num_layers': 4, 'latent_dim': 16, 'constraint': 'none'},
        'head': {'type': head_type},
        'train': {'batch_size': 512, 'phases': phases},
    }


def recipes():
    """Canonical experiments, one per study

    Returns:
        dict: name as key and complete experiment document as value
    """
    documents = []

    for head_type in ('natpn', 'due'):
        document = _toy_base('toy_collapse_' + head_type, head_type)
        document['sweep'] = {'axes': [{'path': 'encoder.constraint', 'values': ['none', 'bilipschitz']}]}
        documents.append(document)

    document = _toy_base('toy_reconstruction', 'natpn')
    document['sweep'] = {'axes': [{'path': 'encoder.recon_lambda', 'values': [0.0, 0.1, 1.0]}]}
    documents.append(document)

    document = _toy_base('toy_lipschitz', 'natpn', 'bilipschitz')
    document['sweep'] = {'axes': [{'path': 'encoder.lipschitz_c', 'values': [1.0, 2.0, 4.0, 5.0]}]}
    documents.append(document)

    document = _toy_base('toy_kernels', 'due')
    document['eval'] = {'grid': False}
    document['sweep'] = {'axes': [{'path': 'head.kernel.family', 'values': list(KERNEL_FAMILIES)}]}
    documents.append(document)

    for scheme in ('joint', 'sequential'):
        for stabilizer, stabilizers in (('bn', ['final_batchnorm']), ('reset', ['reset_last_layer']), ('none', [])):
            documents.append(_mnist_base('mnist_{0}_{1}'.format(scheme, stabilizer), 'natpn', scheme, stabilizers))

    document = _mnist_base('mnist_decoupled_lr_grid', 'natpn')
    document['sweep'] = {'axes': [
        {'path': 'train.phases.main.encoder_lr', 'values': [1e-5, 1e-4, 1e-3]},
        {'path': 'train.phases.main.head_lr', 'values': [1e-5, 1e-4, 1e-3, 5e-3]},
    ]}
    documents.append(document)

    document = _mnist_base('mnist_latent_dim', 'natpn')
    document['sweep'] = {'axes': [{'path': 'encoder.latent_dim', 'values': [16, 64, 128]}]}
    documents.append(document)

    document = _mnist_base('mnist_prior_lambda', 'natpn')
    document['sweep'] = {'axes': [{'path': 'head.entropy_lambda', 'values': [0.0, 1e-5, 1e-3, 0.1, 1.0]}]}
    documents.append(document)

    document = _mnist_base('mnist_prior_evidence', 'natpn')
    document['sweep'] = {'axes': [{'path': 'head.n_prior', 'values': [10.0, 100.0, 1000.0]}]}
    documents.append(document)

    document = _mnist_base('mnist_kernels', 'due')
    document['sweep'] = {'axes': [{'path': 'head.kernel.family', 'values': list(KERNEL_FAMILIES)}]}
    documents.append(document)

    document = _mnist_base('mnist_label_noise', 'natpn')
    document['dataset']['train_transforms'] = [{'kind': 'label_noise', 'rho': 0.1}]
    documents.append(document)

    document = _mnist_base('mnist_pretrain_quality', 'natpn', 'sequential')
    document['dataset']['pretrain_transforms'] = [{'kind': 'subsample', 'fraction': 0.1},
                                                  {'kind': 'gaussian_noise', 'variance': 0.1}]
    document['sweep'] = {'axes': [{'path': 'dataset.pretrain_transforms.1.variance', 'values': [0.1, 0.5]}]}
    documents.append(document)

    return {document['name']: normalize(document) for document in documents}


def write_recipes(out_dir):
    """Write every recipe as `<name>.yml` in out_dir

    Args:
        out_dir (str): Directory, created when missing

    Returns:
        list[str]: written filenames
    """
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    filenames = []
    for name, config in sorted(recipes().items()):
        filename = os.path.join(out_dir, name + '.yml')
        with open(filename, 'w') as f:
            f.write(dump(config))
        filenames.append(filename)
        LOGGER.info('Wrote recipe %s', filename)
    return filenames
