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
"""Exceptions raised by dumlab"""


class DumLabError(Exception):
    """Base class of all dumlab errors"""


class ShapeError(DumLabError, ValueError):
    """Operands have incompatible dimensions or an axis is invalid"""


class BroadcastError(ShapeError):
    """Shapes can not be broadcast against each other"""


class DomainError(DumLabError, ValueError):
    """Value outside of the domain of an operation, like the log of a negative number"""


class GraphError(DumLabError):
    """Gradient tape used in an invalid way, like calling backward twice"""


class FormatError(DumLabError):
    """File does not follow the expected file format"""


class ConfigError(DumLabError):
    """Invalid configuration

    Args:
        message (str): Description of the problem
        field (str): Dotted path of the offending configuration leaf, if known

    Attributes:
        field (str): Dotted path of the offending configuration leaf or None
        reason (str): Message without the field
    """
    def __init__(self, message, field=None):
        self.reason = message
        self.field = field
        if field:
            message = '{0}: {1}'.format(field, message)
        super(ConfigError, self).__init__(message)

    def __reduce__(self):
        return self.__class__, (self.reason, self.field)


class NumericalError(DumLabError, ArithmeticError):
    """Computation produced non-finite values or a factorization failed

    Args:
        message (str): Description of the problem
        phase (str): Training phase in which it occurred
        epoch (int): Epoch in which it occurred
        layer (int): Index of encoder layer which produced non-finite activations

    """
    def __init__(self, message, phase=None, epoch=None, layer=None):
        self.reason = message
        where = []
        if phase is not None:
            where.append('phase {0}'.format(phase))
        if epoch is not None:
            where.append('epoch {0}'.format(epoch))
        if layer is not None:
            where.append('layer {0}'.format(layer))
        if where:
            message = '{0} ({1})'.format(message, ', '.join(where))
        super(NumericalError, self).__init__(message)
        self.phase = phase
        self.epoch = epoch
        self.layer = layer

    def __reduce__(self):
        return self.__class__, (self.reason, self.phase, self.epoch, self.layer)
