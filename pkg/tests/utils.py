import os
import tempfile

import numpy as np

from dumlab.checkpoint import Checkpoint


def tmpname():
    tmpf = tempfile.NamedTemporaryFile()
    out_file = tmpf.name
    tmpf.close()
    return out_file


class CheckpointInMemory(object):
    def __init__(self):
        self.checkpoint_fn = tmpname()
        self.checkpoint = Checkpoint(self.checkpoint_fn, 'a', driver='H5FD_CORE', driver_core_backing_store=0)

    def __enter__(self):
        return self.checkpoint

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def close(self):
        self.checkpoint.close()
        if os.path.isfile(self.checkpoint_fn):
            os.remove(self.checkpoint_fn)


def numerical_gradient(func, value, eps=1e-6):
    """Central finite difference gradient of scalar func at value"""
    value = np.array(value, dtype=np.float64)
    grad = np.zeros_like(value)
    for index in np.ndindex(*value.shape):
        plus = value.copy()
        plus[index] += eps
        minus = value.copy()
        minus[index] -= eps
        grad[index] = (func(plus) - func(minus)) / (2 * eps)
    return grad
