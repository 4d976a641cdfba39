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
"""Training pipelines of a deterministic uncertainty model.

A plan is an ordered list of phases: an optional pretrain phase which trains the encoder with cross-entropy,
an optional head-only warmup, the main phase and an optional head-only finetune phase.
The main phase trains encoder and head jointly or, in the sequential scheme, the head on a frozen encoder.
Encoder and head each have their own optimizer, learning rate, schedule and weight decay.
"""

import logging
import os
from collections import namedtuple

import numpy as np
import pandas as pd
from progressbar import ProgressBar

from .checkpoint import save_checkpoint
from .errors import ConfigError, NumericalError
from .evaluate import accuracy
from .numcore import random_generator
from .optim import OPTIMIZERS, Optimizer, Schedule, clip_grad_norm, global_grad_norm, schedule_lr

LOGGER = logging.getLogger(__name__)

PHASE_ORDER = ('pretrain', 'warmup', 'main', 'finetune')
SCHEMES = ('joint', 'sequential')
TRAINABLE = ('encoder+head', 'head_only', 'encoder_only')
STABILIZERS = ('final_batchnorm', 'reset_last_layer')
OBJECTIVES = ('cross_entropy', 'head')
TRAIN_LOG_COLUMNS = ['epoch', 'phase', 'loss', 'lr_encoder', 'lr_head', 'grad_norm']
SHUFFLE_STREAM = 71
NOISE_STREAM = 72
RESET_STREAM = 73

TrainData = namedtuple('TrainData', ['train', 'val', 'pretrain'])
"""Splits used by :func:`run`, pretrain is the data of the pretrain phase or None to use train"""
TrainData.__new__.__defaults__ = (None, None)


class Phase(object):
    """Stage of a training plan

    Args:
        name (str): pretrain, warmup, main or finetune
        epochs (int): Number of passes over the data
        encoder_lr (float): Base learning rate of the encoder
        head_lr (float): Base learning rate of the head
        encoder_optimizer (str): sgd_momentum or adamw
        head_optimizer (str): sgd_momentum or adamw
        encoder_schedule (Schedule|str|dict): Learning rate schedule of the encoder
        head_schedule (Schedule|str|dict): Learning rate schedule of the head
        encoder_weight_decay (float): Decoupled weight decay of the encoder
        head_weight_decay (float): Decoupled weight decay of the head
        trainable (str): encoder+head, head_only or encoder_only.
            Defaults to encoder_only for pretrain, head_only for warmup, finetune and the sequential main phase
            and encoder+head for the joint main phase.
        stabilizers (list[str]): final_batchnorm and/or reset_last_layer, only allowed on the main phase
        scheme (str): joint or sequential, only meaningful for the main phase
        objective (str): cross_entropy of the pretrain classifier or head loss,
            defaults to cross_entropy for pretrain and head otherwise

    Raises:
        ConfigError: When a field is out of range or contradicts another
    """

    def __init__(self, name, epochs, encoder_lr=1e-3, head_lr=5e-3,
                 encoder_optimizer='adamw', head_optimizer='adamw',
                 encoder_schedule='constant', head_schedule='constant',
                 encoder_weight_decay=0.0, head_weight_decay=0.0,
                 trainable=None, stabilizers=(), scheme='joint', objective=None):
        if name not in PHASE_ORDER:
            raise ConfigError('Unknown phase {0}, must be one of {1}'.format(name, PHASE_ORDER), 'name')
        if int(epochs) != epochs or epochs < 0:
            raise ConfigError('Epochs must be a non-negative integer', 'epochs')
        if scheme not in SCHEMES:
            raise ConfigError('Unknown scheme {0}, must be one of {1}'.format(scheme, SCHEMES), 'scheme')
        for field, kind in (('encoder_optimizer', encoder_optimizer), ('head_optimizer', head_optimizer)):
            if kind not in OPTIMIZERS:
                raise ConfigError('Unknown optimizer {0}, must be one of {1}'.format(kind, OPTIMIZERS), field)
        self.name = name
        self.epochs = int(epochs)
        self.encoder_lr = float(encoder_lr)
        self.head_lr = float(head_lr)
        self.encoder_optimizer = encoder_optimizer
        self.head_optimizer = head_optimizer
        self.encoder_schedule = Schedule.parse(encoder_schedule)
        self.head_schedule = Schedule.parse(head_schedule)
        self.encoder_weight_decay = float(encoder_weight_decay)
        self.head_weight_decay = float(head_weight_decay)
        self.scheme = scheme
        self.stabilizers = list(stabilizers)
        self.trainable = self._default_trainable() if trainable is None else trainable
        self.objective = ('cross_entropy' if name == 'pretrain' else 'head') if objective is None else objective
        self._validate()

    def _default_trainable(self):
        if self.name == 'pretrain':
            return 'encoder_only'
        if self.name == 'main' and self.scheme == 'joint':
            return 'encoder+head'
        return 'head_only'

    def _validate(self):
        if self.trainable not in TRAINABLE:
            raise ConfigError('Unknown trainable {0}, must be one of {1}'.format(self.trainable, TRAINABLE),
                              'trainable')
        if self.objective not in OBJECTIVES:
            raise ConfigError('Unknown objective {0}, must be one of {1}'.format(self.objective, OBJECTIVES),
                              'objective')
        for stabilizer in self.stabilizers:
            if stabilizer not in STABILIZERS:
                raise ConfigError('Unknown stabilizer {0}, must be one of {1}'.format(stabilizer, STABILIZERS),
                                  'stabilizers')
        if self.stabilizers and self.name != 'main':
            raise ConfigError('Stabilizers fire at the start of the main phase only', 'stabilizers')
        if self.name == 'main' and self.scheme == 'sequential' and self.trainable != 'head_only':
            raise ConfigError('Sequential scheme trains the head only', 'trainable')
        if self.objective == 'cross_entropy' and self.trainable == 'head_only':
            raise ConfigError('Cross-entropy objective trains the encoder', 'objective')
        if self.trains_encoder and not self.encoder_lr > 0:
            raise ConfigError('Learning rate of trainable encoder must be positive', 'encoder_lr')
        if self.trains_head and not self.head_lr > 0:
            raise ConfigError('Learning rate of trainable head must be positive', 'head_lr')
        if self.encoder_weight_decay < 0 or self.head_weight_decay < 0:
            raise ConfigError('Weight decay must be non-negative', 'encoder_weight_decay')

    @property
    def trains_encoder(self):
        """Whether encoder weights are updated, stabilized layers of a sequential main phase included"""
        return self.trainable != 'head_only' or bool(self.stabilizers and self.scheme == 'sequential')

    @property
    def trains_head(self):
        return self.trainable != 'encoder_only'

    def __repr__(self):
        return 'Phase({0!r})'.format(self.to_dict())

    def to_dict(self):
        return {
            'name': self.name,
            'epochs': self.epochs,
            'encoder_lr': self.encoder_lr,
            'head_lr': self.head_lr,
            'encoder_optimizer': self.encoder_optimizer,
            'head_optimizer': self.head_optimizer,
            'encoder_schedule': self.encoder_schedule.to_dict(),
            'head_schedule': self.head_schedule.to_dict(),
            'encoder_weight_decay': self.encoder_weight_decay,
            'head_weight_decay': self.head_weight_decay,
            'trainable': self.trainable,
            'stabilizers': list(self.stabilizers),
            'scheme': self.scheme,
            'objective': self.objective,
        }

    @classmethod
    def from_dict(cls, fields):
        return cls(**fields)


class TrainPlan(object):
    """Full description of a training scheme

    Args:
        phases (list[Phase]): Phases in order pretrain?, warmup?, main, finetune?
        seed (int): Seed of batch order and Monte Carlo noise
        batch_size (int): Number of samples per step
        grad_clip (float): Maximum global gradient norm or None to disable clipping

    Raises:
        ConfigError: When phases are missing, repeated or out of order
    """

    def __init__(self, phases, seed=0, batch_size=512, grad_clip=None):
        self.phases = list(phases)
        self.seed = int(seed)
        self.batch_size = int(batch_size)
        self.grad_clip = None if grad_clip is None else float(grad_clip)
        if not self.phases:
            raise ConfigError('Training plan has no phases', 'train.phases')
        names = [phase.name for phase in self.phases]
        if 'main' not in names:
            raise ConfigError('Training plan needs a main phase', 'train.phases')
        positions = [PHASE_ORDER.index(name) for name in names]
        if positions != sorted(set(positions)):
            raise ConfigError('Phases {0} are repeated or not in order {1}'.format(names, PHASE_ORDER),
                              'train.phases')
        if self.batch_size < 1:
            raise ConfigError('Batch size must be positive', 'train.batch_size')
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ConfigError('Gradient clip norm must be positive', 'train.grad_clip')

    @property
    def main(self):
        return self.phase('main')

    def phase(self, name):
        for phase in self.phases:
            if phase.name == name:
                return phase
        raise KeyError(name)

    def to_dict(self):
        return {
            'phases': [phase.to_dict() for phase in self.phases],
            'seed': self.seed,
            'batch_size': self.batch_size,
            'grad_clip': self.grad_clip,
        }

    @classmethod
    def from_dict(cls, fields):
        fields = dict(fields)
        fields['phases'] = [Phase.from_dict(phase) for phase in fields['phases']]
        return cls(**fields)


def apply_stabilizers(model, stabilizers, seed):
    """Fire stabilizers on the encoder of model

    Args:
        model (dumlab.model.DumModel): Model
        stabilizers (list[str]): final_batchnorm attaches a fresh batch norm to the latent,
            reset_last_layer reinitializes the last linear layer
        seed (int): Seed of reinitialization
    """
    if 'final_batchnorm' in stabilizers:
        model.encoder.attach_final_batchnorm()
    if 'reset_last_layer' in stabilizers:
        model.encoder.reset_last_layer(random_generator(seed, RESET_STREAM).integers(2 ** 31))


def _stabilized_encoder_parameters(model, phase):
    names = []
    if 'reset_last_layer' in phase.stabilizers:
        last = model.encoder.num_layers - 1
        names.extend(['linear{0}.weight'.format(last), 'linear{0}.bias'.format(last)])
    if 'final_batchnorm' in phase.stabilizers:
        names.extend(['batchnorm.weight', 'batchnorm.bias'])
    return [model.encoder.param(name) for name in names]


class _PhaseRun(object):
    """Optimizers and forward modes of one phase"""

    def __init__(self, phase, model):
        self.phase = phase
        self.model = model
        encoder_params = []
        self.frozen_encoder = phase.trainable == 'head_only'
        if phase.trainable != 'head_only':
            encoder_params = model.encoder.parameters()
        elif phase.trains_encoder:
            # stabilized layers are retrained on top of the frozen encoder
            encoder_params = _stabilized_encoder_parameters(model, phase)
            self.frozen_encoder = False
        self.encoder_mode = 'eval' if phase.trainable == 'head_only' else 'train'
        self.batchnorm_mode = None
        if self.encoder_mode == 'eval' and 'final_batchnorm' in phase.stabilizers and phase.trains_encoder:
            self.batchnorm_mode = 'train'
        self.reconstruct = phase.trainable != 'head_only'
        self.optimizers = []
        if encoder_params:
            self.optimizers.append(('encoder', Optimizer(phase.encoder_optimizer, encoder_params,
                                                         phase.encoder_weight_decay)))
        if phase.objective == 'cross_entropy':
            self.optimizers.append(('encoder', Optimizer(phase.encoder_optimizer, model.classifier.parameters(),
                                                         phase.encoder_weight_decay)))
        if phase.trains_head and phase.objective == 'head':
            self.optimizers.append(('head', Optimizer(phase.head_optimizer, model.head.parameters(),
                                                      phase.head_weight_decay)))
        self.spectral_layers = []
        if model.encoder.config.spectral:
            # power iteration only follows weights this phase updates
            trained = set(id(param) for param in encoder_params)
            self.spectral_layers = [i for i in range(model.encoder.num_layers)
                                    if id(model.encoder.param('linear{0}.weight'.format(i))) in trained]

    def parameters(self):
        return [param for _, optimizer in self.optimizers for param in optimizer.parameters]

    def learning_rates(self, step, total_steps):
        phase = self.phase
        lr_encoder = 0.0
        lr_head = 0.0
        if phase.trains_encoder or phase.objective == 'cross_entropy':
            lr_encoder = schedule_lr(phase.encoder_schedule, phase.encoder_lr, step, total_steps)
        if phase.trains_head and phase.objective == 'head':
            lr_head = schedule_lr(phase.head_schedule, phase.head_lr, step, total_steps)
        return lr_encoder, lr_head


def batches(order, batch_size):
    """Split a permutation into batches, a trailing single sample joins the previous batch

    Args:
        order (numpy.ndarray): Permutation of sample indices
        batch_size (int): Samples per batch

    Returns:
        list[numpy.ndarray]: batches
    """
    chunks = [order[start:start + batch_size] for start in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def _run_phase(plan, index, phase, model, dataset, progress):
    state = _PhaseRun(phase, model)
    parameters = state.parameters()
    inputs = dataset.inputs
    labels = dataset.labels
    n_total = len(dataset)
    steps_per_epoch = len(batches(np.arange(n_total), plan.batch_size))
    total_steps = phase.epochs * steps_per_epoch
    model.train()
    rows = []
    step = 0
    epochs = range(phase.epochs)
    if progress and phase.epochs:
        epochs = ProgressBar(max_value=phase.epochs)(epochs)
    for epoch in epochs:
        order = random_generator(plan.seed, SHUFFLE_STREAM, index, epoch).permutation(n_total)
        noise = random_generator(plan.seed, NOISE_STREAM, index, epoch)
        lr_encoder, lr_head = state.learning_rates(step, total_steps)
        losses = []
        norms = []
        for batch in batches(order, plan.batch_size):
            lr_encoder_step, lr_head_step = state.learning_rates(step, total_steps)
            model.zero_grad()
            try:
                loss = model.loss(inputs[batch], labels[batch], phase.objective, n_total, noise,
                                  encoder_mode=state.encoder_mode,
                                  frozen_encoder=state.frozen_encoder,
                                  batchnorm_mode=state.batchnorm_mode,
                                  reconstruct=state.reconstruct)
                value = loss.item()
                if not np.isfinite(value):
                    raise NumericalError('Non-finite loss {0}'.format(value))
                loss.backward()
            except NumericalError as e:
                raise NumericalError(e.reason, phase=phase.name, epoch=epoch, layer=e.layer)
            if plan.grad_clip is None:
                norms.append(global_grad_norm(parameters))
            else:
                norms.append(clip_grad_norm(parameters, plan.grad_clip))
            for component, optimizer in state.optimizers:
                optimizer.step(lr_encoder_step if component == 'encoder' else lr_head_step)
            if state.spectral_layers:
                model.encoder.spectral_step(state.spectral_layers)
            losses.append(value)
            step += 1
        row = (epoch, phase.name, float(np.mean(losses)), lr_encoder, lr_head, float(np.mean(norms)))
        LOGGER.debug('Phase %s epoch %d loss %.6g grad norm %.6g', phase.name, epoch, row[2], row[5])
        rows.append(row)
    model.zero_grad()
    return rows


def run(plan, model, data, checkpoint_dir=None, progress=False):
    """Train model according to plan

    Stabilizers of the main phase fire right before it starts.
    The head is initialized from the embedding of the training data before the first phase with the head objective.
    Every phase gets fresh optimizers for encoder and head.

    Args:
        plan (TrainPlan): Training scheme
        model (dumlab.model.DumModel): Model to train in place
        data (TrainData): Training and validation splits
        checkpoint_dir (str): Directory to write a checkpoint to after each phase, None to skip
        progress (bool): Show progress bar of epochs

    Returns:
        tuple[dumlab.model.DumModel, pandas.DataFrame]: trained model in eval mode
            and log with one row per epoch and the columns of :data:`TRAIN_LOG_COLUMNS`

    Raises:
        NumericalError: When loss is not finite, names the phase and epoch
    """
    if data.train is None or len(data.train) == 0:
        raise ConfigError('Training split is missing', 'dataset')
    rows = []
    head_initialized = False
    for index, phase in enumerate(plan.phases):
        if phase.name == 'main' and phase.stabilizers:
            apply_stabilizers(model, phase.stabilizers, plan.seed)
        if phase.objective == 'head' and not head_initialized:
            try:
                model.initialize_head(data.train.inputs, plan.seed)
            except NumericalError as e:
                raise NumericalError(e.reason, phase=phase.name, layer=e.layer)
            head_initialized = True
        dataset = data.train
        if phase.name == 'pretrain' and data.pretrain is not None:
            dataset = data.pretrain
        LOGGER.info('Start %s phase, %d epochs on %d samples', phase.name, phase.epochs, len(dataset))
        rows.extend(_run_phase(plan, index, phase, model, dataset, progress))
        model.eval()
        if data.val is not None and len(data.val) and phase.objective == 'head':
            LOGGER.info('Validation accuracy after %s phase: %.4f', phase.name,
                        accuracy(model.predict(data.val.inputs).predicted_label, data.val.labels))
        if checkpoint_dir is not None:
            save_checkpoint(os.path.join(checkpoint_dir, 'checkpoint_{0}.h5'.format(phase.name)), model, phase.name)
    return model, pd.DataFrame(rows, columns=TRAIN_LOG_COLUMNS)
