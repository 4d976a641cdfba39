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
"""Named collections of trainable tensors and non-trainable buffers"""

from collections import OrderedDict

import numpy as np

from .errors import ShapeError
from .numcore import Tensor


class ParameterSet(object):
    """Ordered set of named parameters and buffers of a model component

    Parameters are :class:`dumlab.numcore.Tensor` objects which require a gradient,
    buffers are numpy arrays which are updated outside of the gradient tape,
    like running batch norm statistics or power iteration state.

    Sub classes register their state with :meth:`add_parameter`, :meth:`add_buffer` and :meth:`add_child`.
    Names of parameters and buffers of a child are prefixed with the child name and a dot.

    """

    def __init__(self):
        self._parameters = OrderedDict()
        self._buffers = OrderedDict()
        self._children = OrderedDict()
        self.training = True

    def add_parameter(self, name, value):
        """Register a trainable tensor

        Args:
            name (str): Name, unique within the set
            value (array_like): Initial values

        Returns:
            Tensor: The registered parameter
        """
        param = Tensor(value, requires_grad=True)
        self._parameters[name] = param
        return param

    def add_buffer(self, name, value):
        self._buffers[name] = np.array(value, dtype=np.float64)
        return self._buffers[name]

    def add_child(self, name, child):
        self._children[name] = child
        return child

    def param(self, name):
        return self._parameters[name]

    def buffer(self, name):
        return self._buffers[name]

    def set_buffer(self, name, value):
        if name not in self._buffers:
            raise KeyError(name)
        self._buffers[name] = np.array(value, dtype=np.float64)

    def named_parameters(self, prefix=''):
        """List of (name, parameter) pairs, own parameters first then those of children"""
        named = [(prefix + name, param) for name, param in self._parameters.items()]
        for child_name, child in self._children.items():
            named.extend(child.named_parameters(prefix + child_name + '.'))
        return named

    def parameters(self):
        return [param for _, param in self.named_parameters()]

    def named_buffers(self, prefix=''):
        named = [(prefix + name, buf) for name, buf in self._buffers.items()]
        for child_name, child in self._children.items():
            named.extend(child.named_buffers(prefix + child_name + '.'))
        return named

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def zero_grad(self):
        for param in self.parameters():
            param.grad = None

    def train(self, mode=True):
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def state_dict(self, prefix=''):
        """Copy of all parameter and buffer values

        Args:
            prefix (str): Prefix for each key

        Returns:
            OrderedDict: Key is prefixed name, value is numpy array
        """
        state = OrderedDict()
        for name, param in self.named_parameters(prefix):
            state[name] = param.data.copy()
        for name, buf in self.named_buffers(prefix):
            state[name] = buf.copy()
        return state

    def load_state_dict(self, state, prefix=''):
        """Overwrite parameter and buffer values

        Args:
            state (dict): Key is prefixed name, value is array
            prefix (str): Prefix of keys belonging to this set

        Raises:
            KeyError: When a parameter or buffer is missing from state
            ShapeError: When shape of a value does not match
        """
        for name, param in self._parameters.items():
            value = _checked(state, prefix + name, param.shape)
            param.data = value
            param.grad = None
        for name, buf in list(self._buffers.items()):
            self._buffers[name] = _checked(state, prefix + name, buf.shape)
        for child_name, child in self._children.items():
            child.load_state_dict(state, prefix + child_name + '.')


def _checked(state, key, shape):
    value = np.array(state[key], dtype=np.float64)
    if value.shape != shape:
        raise ShapeError('Shape of {0} is {1}, expected {2}'.format(key, value.shape, shape))
    return value
