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

import gzip
import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from dumlab.errors import FormatError
from dumlab.idx import read_idx_images, read_idx_labels, write_idx_images, write_idx_labels


@pytest.mark.parametrize('filename', ['images.idx', 'images.idx.gz'])
def test_images(tmpdir, filename):
    images = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    path = str(tmpdir.join(filename))
    write_idx_images(path, images)

    result = read_idx_images(path)

    assert_array_equal(result, images)


def test_labels(tmpdir):
    path = str(tmpdir.join('labels.idx.gz'))
    write_idx_labels(path, [3, 1, 4, 1, 5])

    assert_array_equal(read_idx_labels(path), [3, 1, 4, 1, 5])


def test_header_is_big_endian(tmpdir):
    path = str(tmpdir.join('images.idx'))
    write_idx_images(path, np.zeros((5, 2, 3)))

    with open(path, 'rb') as f:
        header = f.read(16)

    assert header == struct.pack('>IIII', 0x803, 5, 2, 3)


def test_labels_file_as_images(tmpdir):
    path = str(tmpdir.join('labels.idx'))
    write_idx_labels(path, [1, 2])

    with pytest.raises(FormatError) as excinfo:
        read_idx_images(path)

    assert 'magic number' in str(excinfo.value)


def test_images_file_as_labels(tmpdir):
    path = str(tmpdir.join('images.idx'))
    write_idx_images(path, np.zeros((1, 2, 2)))

    with pytest.raises(FormatError):
        read_idx_labels(path)


def test_truncated(tmpdir):
    path = str(tmpdir.join('images.idx.gz'))
    with gzip.open(path, 'wb') as f:
        f.write(struct.pack('>IIII', 0x803, 10, 28, 28))
        f.write(b'\x00' * 100)

    with pytest.raises(FormatError) as excinfo:
        read_idx_images(path)

    assert 'truncated' in str(excinfo.value)


def test_write_flat_images(tmpdir):
    with pytest.raises(FormatError):
        write_idx_images(str(tmpdir.join('images.idx')), np.zeros((2, 4)))
