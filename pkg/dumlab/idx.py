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
"""Reading and writing of IDX files, the binary format of the MNIST family of datasets.

An image file is a big-endian header::

    [offset] [type]          [value]
    0000     32 bit integer  0x00000803 magic number
    0004     32 bit integer  number of images
    0008     32 bit integer  number of rows
    0012     32 bit integer  number of columns
    0016     unsigned byte   pixels, row-major

A label file has magic number 0x00000801, the number of items and then one unsigned byte per label.
Files ending with `.gz` are read and written gzip compressed.
"""

import gzip
import logging
import struct

import numpy as np

from .errors import FormatError

LOGGER = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _open(path, mode):
    if str(path).endswith('.gz'):
        return gzip.open(path, mode)
    return open(path, mode)


def _read_exact(stream, count, path):
    data = stream.read(count)
    if len(data) != count:
        raise FormatError('{0} is truncated, expected {1} more bytes, got {2}'.format(path, count, len(data)))
    return data


def read_idx_images(path):
    """Read images from an IDX file

    Args:
        path (str): Filename of IDX images file, optionally gzipped

    Returns:
        numpy.ndarray: uint8 array of shape (images, rows, columns)

    Raises:
        FormatError: When magic number is wrong or file is truncated
    """
    with _open(path, 'rb') as f:
        magic, count, rows, columns = struct.unpack('>IIII', _read_exact(f, 16, path))
        if magic != IMAGES_MAGIC:
            raise FormatError('{0} has magic number {1:#010x}, expected {2:#010x}'.format(path, magic, IMAGES_MAGIC))
        pixels = _read_exact(f, count * rows * columns, path)
    return np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows, columns)


def read_idx_labels(path):
    """Read labels from an IDX file

    Args:
        path (str): Filename of IDX labels file, optionally gzipped

    Returns:
        numpy.ndarray: uint8 array of labels

    Raises:
        FormatError: When magic number is wrong or file is truncated
    """
    with _open(path, 'rb') as f:
        magic, count = struct.unpack('>II', _read_exact(f, 8, path))
        if magic != LABELS_MAGIC:
            raise FormatError('{0} has magic number {1:#010x}, expected {2:#010x}'.format(path, magic, LABELS_MAGIC))
        labels = _read_exact(f, count, path)
    return np.frombuffer(labels, dtype=np.uint8).copy()


def write_idx_images(path, images):
    """Write uint8 images of shape (images, rows, columns) to an IDX file"""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise FormatError('IDX images must have 3 dimensions, got {0}'.format(images.ndim))
    with _open(path, 'wb') as f:
        f.write(struct.pack('>IIII', IMAGES_MAGIC, *images.shape))
        f.write(images.tobytes())
    LOGGER.info('Wrote %d images to %s', len(images), path)


def write_idx_labels(path, labels):
    """Write uint8 labels to an IDX file"""
    labels = np.asarray(labels, dtype=np.uint8)
    with _open(path, 'wb') as f:
        f.write(struct.pack('>II', LABELS_MAGIC, len(labels)))
        f.write(labels.tobytes())
    LOGGER.info('Wrote %d labels to %s', len(labels), path)
