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
"""Model checkpoints using hdf5 as storage backend.

A checkpoint holds the encoder and head configuration as JSON attributes of the root node
and one array per named parameter and buffer under the `/state` group.
"""

import json
import logging

import numpy as np
import tables

from .errors import FormatError
from .model import build_model

LOGGER = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _node_name(key):
    return key.replace('.', '__')


def _key(node_name):
    return node_name.replace('__', '.')


class Checkpoint(object):
    """Checkpoint file of a model

    Args:
        filename (str): File name of hdf5 file to write or read checkpoint from
        mode (str): Can be 'r' for reading, 'w' for writing or 'a' for both
        **kwargs: Passed though to tables.open_file()

    Attributes:
        h5file (tables.File): Object representing an open hdf5 file
    """
    filters = tables.Filters(complevel=6, complib='blosc')

    def __init__(self, filename, mode='r', **kwargs):
        self.h5file = tables.open_file(filename, mode, filters=self.filters, **kwargs)

    def close(self):
        """Closes the hdf5file"""
        self.h5file.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    @property
    def phase(self):
        """Name of training phase after which the checkpoint was written"""
        return self.h5file.root._v_attrs['phase']

    def write(self, model, phase=''):
        """Store configuration, parameters and buffers of model, replacing an earlier checkpoint in the file

        Args:
            model (dumlab.model.DumModel): Model to store
            phase (str): Name of phase which just finished
        """
        attrs = self.h5file.root._v_attrs
        attrs['format_version'] = FORMAT_VERSION
        attrs['phase'] = phase
        attrs['encoder'] = json.dumps(model.encoder.config.to_dict(), sort_keys=True)
        attrs['head'] = json.dumps(model.head.to_dict(), sort_keys=True)
        if '/state' in self.h5file:
            self.h5file.remove_node('/state', recursive=True)
        group = self.h5file.create_group('/', 'state')
        for key, value in model.state_dict().items():
            value = np.asarray(value, dtype=np.float64)
            if value.ndim == 0:
                self.h5file.create_array(group, _node_name(key), obj=value)
            else:
                self.h5file.create_carray(group, _node_name(key), obj=value, filters=self.filters)
        self.h5file.flush()

    def read(self, seed=0):
        """Rebuild the stored model

        Args:
            seed (int): Seed of the initialization which is overwritten by the stored values

        Returns:
            dumlab.model.DumModel: model in eval mode

        Raises:
            FormatError: When the file is not a checkpoint or has another format version
        """
        attrs = self.h5file.root._v_attrs
        if 'format_version' not in attrs._v_attrnames or '/state' not in self.h5file:
            raise FormatError('{0} is not a checkpoint'.format(self.h5file.filename))
        if int(attrs['format_version']) != FORMAT_VERSION:
            raise FormatError('Checkpoint format version {0} is not supported, expected {1}'.format(
                attrs['format_version'], FORMAT_VERSION))
        model = build_model(json.loads(attrs['encoder']), json.loads(attrs['head']), seed)
        state = {}
        for node in self.h5file.list_nodes('/state'):
            state[_key(node.name)] = node.read()
        model.load_state_dict(state)
        return model.eval()


def save_checkpoint(filename, model, phase='', **kwargs):
    """Write model to a new checkpoint file

    Args:
        filename (str): File name of hdf5 file
        model (dumlab.model.DumModel): Model to store
        phase (str): Name of phase which just finished
        **kwargs: Passed though to tables.open_file()
    """
    with Checkpoint(filename, 'w', **kwargs) as checkpoint:
        checkpoint.write(model, phase)
    LOGGER.info('Wrote checkpoint of %s phase to %s', phase, filename)


def load_checkpoint(filename, seed=0, **kwargs):
    """Model stored in a checkpoint file"""
    with Checkpoint(filename, 'r', **kwargs) as checkpoint:
        return checkpoint.read(seed)
