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
"""Optimizers and learning rate schedules.

Optimizer state is kept per parameter, so one optimizer over two parameter sets
updates them exactly like two optimizers with the same settings.
"""

import logging

import numpy as np

from .errors import ConfigError, ShapeError

LOGGER = logging.getLogger(__name__)

OPTIMIZERS = ('sgd_momentum', 'adamw')
SCHEDULES = ('constant', 'cosine', 'multistep', 'linear_warmup')
MOMENTUM = 0.9
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Schedule(object):
    """Learning rate schedule

    Args:
        kind (str): constant, cosine, multistep or linear_warmup
        eta_min (float): Final learning rate of cosine
        milestones (tuple[float]): Fractions of total steps at which multistep scales the learning rate
        factor (float): Scale applied by multistep at each milestone

    """

    def __init__(self, kind='constant', eta_min=0.0, milestones=(0.7, 0.9), factor=0.2):
        if kind not in SCHEDULES:
            raise ConfigError('Unknown schedule {0}, must be one of {1}'.format(kind, SCHEDULES), 'kind')
        self.kind = kind
        self.eta_min = float(eta_min)
        self.milestones = tuple(float(m) for m in milestones)
        self.factor = float(factor)
        if self.eta_min < 0:
            raise ConfigError('eta_min must be non-negative', 'eta_min')
        if any(not 0 <= m <= 1 for m in self.milestones):
            raise ConfigError('Milestones must be fractions between 0 and 1', 'milestones')

    def __eq__(self, other):
        return isinstance(other, Schedule) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return 'Schedule({0!r})'.format(self.to_dict())

    def to_dict(self):
        return {
            'kind': self.kind,
            'eta_min': self.eta_min,
            'milestones': list(self.milestones),
            'factor': self.factor,
        }

    @classmethod
    def parse(cls, value):
        """Schedule from its name or dict description"""
        if isinstance(value, Schedule):
            return value
        if isinstance(value, str):
            return cls(value)
        return cls(**value)


def schedule_lr(schedule, base_lr, step, total_steps):
    """Learning rate at a step

    * cosine: eta_min + (base_lr - eta_min) (1 + cos(pi step / total_steps)) / 2
    * linear_warmup: base_lr step / total_steps
    * multistep: base_lr factor^k, k is the number of milestones with step >= milestone * total_steps
    * constant: base_lr

    Args:
        schedule (Schedule|str): Schedule
        base_lr (float): Initial learning rate
        step (int): Current step, between 0 and total_steps
        total_steps (int): Number of steps of the phase

    Returns:
        float: learning rate

    Raises:
        ValueError: When step is outside 0 .. total_steps
    """
    schedule = Schedule.parse(schedule)
    if total_steps == 0:
        return float(base_lr)
    if not 0 <= step <= total_steps:
        raise ValueError('Step {0} outside of 0 .. {1}'.format(step, total_steps))
    progress = float(step) / total_steps
    if schedule.kind == 'cosine':
        return schedule.eta_min + 0.5 * (base_lr - schedule.eta_min) * (1 + np.cos(np.pi * progress))
    if schedule.kind == 'linear_warmup':
        return base_lr * progress
    if schedule.kind == 'multistep':
        passed = sum(1 for milestone in schedule.milestones if step >= milestone * total_steps)
        return base_lr * schedule.factor ** passed
    return float(base_lr)


def optimizer_step(kind, params, grads, state, lr, weight_decay=0.0):
    """One update of a list of parameter arrays

    Weight decay is decoupled, parameters shrink by a factor (1 - lr weight_decay) before the gradient step.

    Args:
        kind (str): sgd_momentum or adamw
        params (list[numpy.ndarray]): Parameter values
        grads (list[numpy.ndarray]): Gradients, None entries leave the parameter untouched
        state (list[dict]): Optimizer state per parameter, empty dicts on the first step
        lr (float): Learning rate
        weight_decay (float): Decoupled weight decay

    Returns:
        tuple[list[numpy.ndarray], list[dict]]: new parameter values and new states

    Raises:
        ShapeError: When a gradient does not match its parameter
    """
    if kind not in OPTIMIZERS:
        raise ConfigError('Unknown optimizer {0}, must be one of {1}'.format(kind, OPTIMIZERS), 'optimizer')
    new_params = []
    new_state = []
    for param, grad, param_state in zip(params, grads, state):
        if grad is None:
            new_params.append(param)
            new_state.append(param_state)
            continue
        if grad.shape != param.shape:
            raise ShapeError('Gradient shape {0} differs from parameter shape {1}'.format(grad.shape, param.shape))
        decayed = param * (1 - lr * weight_decay) if weight_decay else param
        if kind == 'sgd_momentum':
            velocity = MOMENTUM * param_state['velocity'] + grad if 'velocity' in param_state else grad.copy()
            new_params.append(decayed - lr * velocity)
            new_state.append({'velocity': velocity})
        else:
            step = param_state.get('step', 0) + 1
            m = ADAM_BETA1 * param_state.get('m', 0.0) + (1 - ADAM_BETA1) * grad
            v = ADAM_BETA2 * param_state.get('v', 0.0) + (1 - ADAM_BETA2) * grad * grad
            m_hat = m / (1 - ADAM_BETA1 ** step)
            v_hat = v / (1 - ADAM_BETA2 ** step)
            new_params.append(decayed - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS))
            new_state.append({'step': step, 'm': m, 'v': v})
    return new_params, new_state


def global_grad_norm(parameters):
    """Euclidean norm of all gradients together, missing gradients count as zero"""
    total = 0.0
    for param in parameters:
        if param.grad is not None:
            total += float(np.sum(param.grad * param.grad))
    return float(np.sqrt(total))


def clip_grad_norm(parameters, max_norm):
    """Scale gradients in place so their global norm is at most max_norm

    Returns:
        float: global norm before clipping
    """
    norm = global_grad_norm(parameters)
    if norm > max_norm:
        scale = max_norm / norm
        for param in parameters:
            if param.grad is not None:
                param.grad = param.grad * scale
    return norm


class Optimizer(object):
    """Optimizer over a list of parameter tensors

    Args:
        kind (str): sgd_momentum or adamw
        parameters (list[dumlab.numcore.Tensor]): Tensors to update in place
        weight_decay (float): Decoupled weight decay

    """

    def __init__(self, kind, parameters, weight_decay=0.0):
        if kind not in OPTIMIZERS:
            raise ConfigError('Unknown optimizer {0}, must be one of {1}'.format(kind, OPTIMIZERS), 'optimizer')
        self.kind = kind
        self.parameters = list(parameters)
        self.weight_decay = float(weight_decay)
        self.state = [{} for _ in self.parameters]

    def step(self, lr):
        params = [p.data for p in self.parameters]
        grads = [p.grad for p in self.parameters]
        new_params, self.state = optimizer_step(self.kind, params, grads, self.state, lr, self.weight_decay)
        for param, value in zip(self.parameters, new_params):
            param.data = value

    def zero_grad(self):
        for param in self.parameters:
            param.grad = None
