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
"""Dense float64 tensors with reverse-mode automatic differentiation.

Each operation on a :class:`Tensor` which needs a gradient records a :class:`Node`
with the operation kind, the input tensors and a closure holding the forward values
required for the backward pass.
:meth:`Tensor.backward` collects the reachable nodes in a :class:`Graph`
and runs the closures in reverse topological order.

Besides the elementwise, matrix product and reduction operations the module contains
the linear algebra needed by the Gaussian process head and the spectral normalization of the encoder::

    >>> from dumlab.numcore import Tensor
    >>> x = Tensor([2.0], requires_grad=True)
    >>> y = x.log().sum()
    >>> y.backward()
    >>> x.grad
    array([0.5])

"""

import itertools
import logging
from contextlib import contextmanager

import numpy as np
from scipy import linalg, special

from .errors import BroadcastError, DomainError, GraphError, NumericalError, ShapeError

LOGGER = logging.getLogger(__name__)

INITIAL_JITTER = 1e-8
"""Jitter added to the diagonal on the first failed Cholesky factorization"""
MAX_JITTER = 1e-2
"""Largest jitter tried before a Cholesky factorization is declared failed"""

_ORDER = itertools.count()


class _GradMode(object):
    enabled = True


@contextmanager
def no_grad():
    """Context manager in which operations are not recorded on the gradient tape

    Examples:
        Evaluate a model without building a graph

        >>> with no_grad():
        ...     z = encoder.forward(x)
    """
    previous = _GradMode.enabled
    _GradMode.enabled = False
    try:
        yield
    finally:
        _GradMode.enabled = previous


def is_grad_enabled():
    return _GradMode.enabled


class Node(object):
    """Record of an operation on the gradient tape

    Args:
        op (str): Operation kind
        inputs (tuple[Tensor]): Input tensors
        backward (callable): Maps gradient of output to tuple of gradients of inputs,
            holds the saved forward values
        order (int): Position in the global topological order

    """
    __slots__ = ('op', 'inputs', 'backward', 'order')

    def __init__(self, op, inputs, backward, order):
        self.op = op
        self.inputs = inputs
        self.backward = backward
        self.order = order


class Tensor(object):
    """Dense n-dimensional array of 64 bit floats which can take part in the gradient tape

    Args:
        data (array_like): Values, copied
        requires_grad (bool): Whether a gradient must be accumulated for this tensor

    Attributes:
        data (numpy.ndarray): Values
        requires_grad (bool): Whether a gradient is accumulated
        grad (numpy.ndarray): Accumulated gradient, same shape as data, None before backward

    """
    # let numpy hand binary operations with a Tensor operand back to the Tensor
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return 'Tensor({0}, requires_grad={1})'.format(self.data, self.requires_grad)

    def numpy(self):
        """Copy of the values"""
        return self.data.copy()

    def item(self):
        return float(self.data)

    def detach(self):
        """Tensor with the same values which is not part of the gradient tape"""
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Compute the gradients of all tensors which require a gradient and from which this tensor was computed

        Args:
            grad (array_like): Gradient of the final objective with respect to this tensor.
                Defaults to ones, which for a scalar is d self / d self.

        Raises:
            GraphError: When backward was already run on this graph
            NumericalError: When a resulting gradient is not finite
        """
        if grad is None:
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
        Graph(self).backward(grad)

    # operators
    def __add__(self, other):
        return elementwise('add', self, other)

    def __radd__(self, other):
        return elementwise('add', other, self)

    def __sub__(self, other):
        return elementwise('sub', self, other)

    def __rsub__(self, other):
        return elementwise('sub', other, self)

    def __mul__(self, other):
        return elementwise('mul', self, other)

    def __rmul__(self, other):
        return elementwise('mul', other, self)

    def __truediv__(self, other):
        return elementwise('div', self, other)

    def __rtruediv__(self, other):
        return elementwise('div', other, self)

    def __pow__(self, other):
        return elementwise('pow', self, other)

    def __rpow__(self, other):
        return elementwise('pow', other, self)

    def __neg__(self):
        return elementwise('neg', self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return take(self, index)

    # unary shortcuts
    def exp(self):
        return elementwise('exp', self)

    def log(self):
        return elementwise('log', self)

    def tanh(self):
        return elementwise('tanh', self)

    def relu(self):
        return elementwise('relu', self)

    def softplus(self):
        return elementwise('softplus', self)

    def sqrt(self):
        return elementwise('sqrt', self)

    def square(self):
        return elementwise('square', self)

    # reductions
    def sum(self, axis=None, keepdims=False):
        return reduce('sum', self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce('mean', self, axis, keepdims)

    def max(self, axis=None, keepdims=False):
        return reduce('max', self, axis, keepdims)

    def logsumexp(self, axis=None, keepdims=False):
        return reduce('logsumexp', self, axis, keepdims)

    # shape
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


class LowerTriangular(Tensor):
    """Lower triangular Cholesky factor

    Attributes:
        jitter (float): Jitter that was added to the diagonal before the factorization succeeded
    """
    jitter = 0.0


class Graph(object):
    """Operation records reachable from a root tensor

    Args:
        root (Tensor): Tensor from which to walk the recorded operations

    Attributes:
        tensors (list[Tensor]): Non-leaf tensors in topological order
        leaves (list[Tensor]): Reachable tensors which require a gradient but were not produced by an operation

    """

    def __init__(self, root):
        self.root = root
        recorded = {}
        leaves = {}
        stack = [root]
        while stack:
            tensor = stack.pop()
            key = id(tensor)
            if tensor._node is None:
                if tensor.requires_grad:
                    leaves[key] = tensor
                continue
            if key in recorded:
                continue
            recorded[key] = tensor
            stack.extend(tensor._node.inputs)
        self.tensors = sorted(recorded.values(), key=lambda t: t._node.order)
        self.leaves = list(leaves.values())

    def backward(self, grad):
        """Propagate grad of root through all recorded operations

        Releases the saved forward values, so backward can only be run once per forward pass.

        Args:
            grad (numpy.ndarray): Gradient with respect to root

        Raises:
            GraphError: When the saved values have already been released
            NumericalError: When a leaf gradient is not finite
        """
        if grad.shape != self.root.shape:
            raise ShapeError('Gradient shape {0} does not match tensor shape {1}'.format(grad.shape, self.root.shape))
        if self.root._node is None:
            if self.root.requires_grad:
                _accumulate(self.root, grad)
            return
        for tensor in self.tensors:
            if tensor._node.backward is None:
                raise GraphError('Backward already ran on this graph, run the forward pass again')

        grads = {id(self.root): grad}
        for tensor in reversed(self.tensors):
            node = tensor._node
            out_grad = grads.pop(id(tensor), None)
            if out_grad is None:
                node.backward = None
                continue
            input_grads = node.backward(out_grad)
            node.backward = None
            for inp, inp_grad in zip(node.inputs, input_grads):
                if inp_grad is None or not inp.requires_grad:
                    continue
                if inp._node is None:
                    _accumulate(inp, inp_grad)
                elif id(inp) in grads:
                    grads[id(inp)] = grads[id(inp)] + inp_grad
                else:
                    grads[id(inp)] = inp_grad

        for leaf in self.leaves:
            if leaf.grad is not None and not np.all(np.isfinite(leaf.grad)):
                raise NumericalError('Non-finite gradient for tensor of shape {0}'.format(leaf.shape))


def _accumulate(tensor, grad):
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != tensor.shape:
        grad = np.broadcast_to(grad, tensor.shape)
    if tensor.grad is None:
        tensor.grad = np.array(grad)
    else:
        tensor.grad = tensor.grad + grad


def _record(data, op, inputs, backward, cls=Tensor):
    out = cls.__new__(cls)
    out.data = data
    out.grad = None
    out._node = None
    out.requires_grad = _GradMode.enabled and any(t.requires_grad for t in inputs)
    if out.requires_grad:
        out._node = Node(op, inputs, backward, next(_ORDER))
    return out


def as_tensor(value):
    """Wrap value in a constant Tensor unless it already is one"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _unbroadcast(grad, shape):
    """Sum grad over the axes which were broadcast to reach its shape from shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def broadcast_shape(shape1, shape2):
    """Shape of the result of broadcasting trailing dimensions

    Raises:
        BroadcastError: When shapes are not broadcastable
    """
    try:
        return np.broadcast_shapes(shape1, shape2)
    except ValueError:
        raise BroadcastError('Shapes {0} and {1} can not be broadcast'.format(shape1, shape2))


# binary elementwise operations

def _add(a, b):
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _record(a.data + b.data, 'add', (a, b), backward)


def _sub(a, b):
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _record(a.data - b.data, 'sub', (a, b), backward)


def _mul(a, b):
    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb
    return _record(a.data * b.data, 'mul', (a, b), backward)


def _div(a, b):
    if np.any(b.data == 0):
        raise DomainError('Division by zero')
    out = a.data / b.data

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb
    return _record(out, 'div', (a, b), backward)


def _pow(a, b):
    with np.errstate(invalid='ignore', divide='ignore'):
        out = np.power(a.data, b.data)
    if not np.all(np.isfinite(out)):
        raise DomainError('Power of negative base with fractional exponent or of zero with negative exponent')

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            with np.errstate(invalid='ignore', divide='ignore'):
                da = b.data * np.power(a.data, b.data - 1)
            ga = _unbroadcast(g * np.where(np.isfinite(da), da, 0.0), a.shape)
        if b.requires_grad:
            if np.any(a.data <= 0):
                raise DomainError('Gradient of exponent requires a positive base')
            gb = _unbroadcast(g * out * np.log(a.data), b.shape)
        return ga, gb
    return _record(out, 'pow', (a, b), backward)


# unary elementwise operations

def _neg(a):
    return _record(-a.data, 'neg', (a,), lambda g: (-g,))


def _exp(a):
    out = np.exp(a.data)
    return _record(out, 'exp', (a,), lambda g: (g * out,))


def _log(a):
    if np.any(a.data <= 0):
        raise DomainError('Log of non-positive value')
    return _record(np.log(a.data), 'log', (a,), lambda g: (g / a.data,))


def _tanh(a):
    out = np.tanh(a.data)
    return _record(out, 'tanh', (a,), lambda g: (g * (1.0 - out * out),))


def _relu(a):
    mask = a.data > 0
    return _record(np.where(mask, a.data, 0.0), 'relu', (a,), lambda g: (g * mask,))


def _softplus(a):
    out = np.logaddexp(0.0, a.data)
    return _record(out, 'softplus', (a,), lambda g: (g * special.expit(a.data),))


def _sqrt(a):
    if np.any(a.data < 0):
        raise DomainError('Square root of negative value')
    out = np.sqrt(a.data)

    def backward(g):
        # zero gradient where the root is zero
        positive = out > 0
        return (np.where(positive, g * 0.5 / np.where(positive, out, 1.0), 0.0),)
    return _record(out, 'sqrt', (a,), backward)


def _square(a):
    return _record(a.data * a.data, 'square', (a,), lambda g: (2.0 * g * a.data,))


def _digamma(a):
    return _record(special.digamma(a.data), 'digamma', (a,), lambda g: (g * special.polygamma(1, a.data),))


def _lgamma(a):
    return _record(special.gammaln(a.data), 'lgamma', (a,), lambda g: (g * special.digamma(a.data),))


_BINARY_OPS = {
    'add': _add,
    'sub': _sub,
    'mul': _mul,
    'div': _div,
    'pow': _pow,
}

_UNARY_OPS = {
    'neg': _neg,
    'exp': _exp,
    'log': _log,
    'tanh': _tanh,
    'relu': _relu,
    'softplus': _softplus,
    'sqrt': _sqrt,
    'square': _square,
    'digamma': _digamma,
    'lgamma': _lgamma,
}


def elementwise(op_kind, a, b=None):
    """Elementwise operation with trailing-dimension broadcasting

    Args:
        op_kind (str): One of add, sub, mul, div, pow (binary)
            or exp, log, tanh, relu, softplus, neg, sqrt, square, digamma, lgamma (unary)
        a (Tensor|array_like): First operand
        b (Tensor|array_like): Second operand of binary operations

    Returns:
        Tensor: result

    Raises:
        BroadcastError: When shapes of a and b are not broadcastable
        DomainError: For log of non-positive values or division by zero
    """
    a = as_tensor(a)
    if op_kind in _UNARY_OPS:
        if b is not None:
            raise ValueError('{0} takes a single operand'.format(op_kind))
        return _UNARY_OPS[op_kind](a)
    if op_kind not in _BINARY_OPS:
        raise ValueError('Unknown elementwise operation {0}'.format(op_kind))
    b = as_tensor(b)
    broadcast_shape(a.shape, b.shape)
    return _BINARY_OPS[op_kind](a, b)


def exp(a):
    return elementwise('exp', a)


def log(a):
    return elementwise('log', a)


def softplus(a):
    return elementwise('softplus', a)


def sqrt(a):
    return elementwise('sqrt', a)


def digamma(a):
    return elementwise('digamma', a)


def lgamma(a):
    return elementwise('lgamma', a)


def clip(a, lower=None, upper=None):
    """Clamp values to [lower, upper], gradient passes only where the value was not clamped"""
    a = as_tensor(a)
    lo = -np.inf if lower is None else lower
    hi = np.inf if upper is None else upper
    mask = (a.data >= lo) & (a.data <= hi)
    return _record(np.clip(a.data, lo, hi), 'clip', (a,), lambda g: (g * mask,))


def matmul(a, b):
    """Matrix product of two 2 dimensional tensors

    Raises:
        ShapeError: When inner dimensions differ or operands are not matrices
    """
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError('matmul requires matrices, got shapes {0} and {1}'.format(a.shape, b.shape))
    if a.shape[1] != b.shape[0]:
        raise ShapeError('Inner dimensions of {0} and {1} do not agree'.format(a.shape, b.shape))

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb
    return _record(a.data @ b.data, 'matmul', (a, b), backward)


def _normalize_axis(axis, ndim):
    if axis is None:
        return None
    axes = axis if isinstance(axis, tuple) else (axis,)
    normalized = []
    for ax in axes:
        if not isinstance(ax, (int, np.integer)) or not -ndim <= ax < ndim:
            raise ShapeError('Invalid axis {0} for tensor with {1} dimensions'.format(axis, ndim))
        normalized.append(int(ax) % ndim)
    return tuple(sorted(set(normalized)))


def _expand(g, axis, keepdims, shape):
    """Bring reduced gradient back to the shape of the reduced operand"""
    if axis is None:
        g = np.reshape(g, (1,) * len(shape))
    elif not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def reduce(op_kind, a, axis=None, keepdims=False):
    """Reduce a tensor along axis

    Args:
        op_kind (str): sum, mean, logsumexp or max
        a (Tensor): Tensor to reduce
        axis (int|tuple[int]|None): Axis or axes to reduce, None reduces all
        keepdims (bool): Keep reduced axes with extent 1

    Returns:
        Tensor: Reduced tensor

    Raises:
        ShapeError: When axis is invalid
    """
    a = as_tensor(a)
    axes = _normalize_axis(axis, a.ndim)
    shape = a.shape
    if op_kind == 'sum':
        out = a.data.sum(axis=axes, keepdims=keepdims)
        return _record(out, 'sum', (a,), lambda g: (_expand(g, axes, keepdims, shape),))
    elif op_kind == 'mean':
        count = a.data.size if axes is None else int(np.prod([shape[ax] for ax in axes]))
        out = a.data.sum(axis=axes, keepdims=keepdims) / count
        return _record(out, 'mean', (a,), lambda g: (_expand(g, axes, keepdims, shape) / count,))
    elif op_kind == 'logsumexp':
        # subtract-max form, overflow safe
        shift = a.data.max(axis=axes, keepdims=True)
        shift = np.where(np.isfinite(shift), shift, 0.0)
        out_keep = np.log(np.exp(a.data - shift).sum(axis=axes, keepdims=True)) + shift
        out = out_keep if keepdims else np.squeeze(out_keep, axis=axes)

        def backward(g):
            return (_expand(g, axes, keepdims, shape) * np.exp(a.data - out_keep),)
        return _record(out, 'logsumexp', (a,), backward)
    elif op_kind == 'max':
        out_keep = a.data.max(axis=axes, keepdims=True)
        out = out_keep if keepdims else np.squeeze(out_keep, axis=axes)
        mask = (a.data == out_keep).astype(np.float64)
        mask /= mask.sum(axis=axes, keepdims=True)
        return _record(out, 'max', (a,), lambda g: (_expand(g, axes, keepdims, shape) * mask,))
    raise ValueError('Unknown reduction {0}'.format(op_kind))


def logsumexp(a, axis=None, keepdims=False):
    return reduce('logsumexp', a, axis, keepdims)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    return a - logsumexp(a, axis=axis, keepdims=True)


def softmax(a, axis=-1):
    return log_softmax(a, axis).exp()


def reshape(a, shape):
    a = as_tensor(a)
    original = a.shape
    try:
        out = np.reshape(a.data, shape)
    except ValueError:
        raise ShapeError('Can not reshape {0} into {1}'.format(original, shape))
    return _record(out, 'reshape', (a,), lambda g: (np.reshape(g, original),))


def transpose(a, axes=None):
    a = as_tensor(a)
    out = np.transpose(a.data, axes)
    inverse = None if axes is None else np.argsort(axes)
    return _record(out, 'transpose', (a,), lambda g: (np.transpose(g, inverse),))


def take(a, index):
    """Index a tensor with numpy basic or advanced indexing"""
    a = as_tensor(a)
    shape = a.shape

    def backward(g):
        full = np.zeros(shape)
        np.add.at(full, index, g)
        return (full,)
    return _record(a.data[index], 'take', (a,), backward)


def stack(tensors, axis=0):
    tensors = tuple(as_tensor(t) for t in tensors)
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))
    return _record(out, 'stack', tensors, backward)


def concatenate(tensors, axis=0):
    tensors = tuple(as_tensor(t) for t in tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(str(e))
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))
    return _record(out, 'concatenate', tensors, backward)


def cholesky(a, jitter=0.0, max_jitter=MAX_JITTER):
    """Cholesky factor of a symmetric matrix with escalating jitter

    The factorization of A + jitter I is retried with the jitter multiplied by 10,
    starting at 1e-8 when jitter is zero, until max_jitter is passed.

    Args:
        a (Tensor): Symmetric n x n matrix
        jitter (float): Initial jitter added to the diagonal
        max_jitter (float): Largest jitter to try

    Returns:
        LowerTriangular: L with L L^T = A + L.jitter I

    Raises:
        ShapeError: When a is not square
        NumericalError: When A + max_jitter I is not positive definite
    """
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError('Cholesky requires a square matrix, got shape {0}'.format(a.shape))
    if not np.all(np.isfinite(a.data)):
        raise NumericalError('Cholesky of matrix with non-finite entries')
    n = a.shape[0]
    identity = np.eye(n)
    current = float(jitter)
    while True:
        try:
            factor = np.linalg.cholesky(a.data + current * identity)
            break
        except np.linalg.LinAlgError:
            current = current * 10.0 if current > 0 else INITIAL_JITTER
            if current > max_jitter * (1 + 1e-6):
                raise NumericalError('Matrix not positive definite, even with jitter {0}'.format(max_jitter))
            LOGGER.debug('Cholesky failed, retrying with jitter %g', current)
    if current != jitter:
        LOGGER.info('Cholesky needed jitter %g', current)

    def backward(g):
        phi = np.tril(factor.T @ g)
        phi = 0.5 * (phi + np.tril(phi, -1).T)
        left = linalg.solve_triangular(factor, phi, lower=True, trans='T')
        return (linalg.solve_triangular(factor, left.T, lower=True, trans='T').T,)
    out = _record(factor, 'cholesky', (a,), backward, cls=LowerTriangular)
    out.jitter = current
    return out


def solve_triangular(l, b, trans=False):
    """Solve L X = B, or L^T X = B when trans, for lower triangular L

    Args:
        l (Tensor): Lower triangular n x n matrix
        b (Tensor): Right hand side, n or n x m
        trans (bool): Solve with the transpose of l

    Returns:
        Tensor: X
    """
    l = as_tensor(l)
    b = as_tensor(b)
    if l.ndim != 2 or l.shape[0] != l.shape[1] or b.shape[0] != l.shape[0]:
        raise ShapeError('Can not solve {0} system with right hand side {1}'.format(l.shape, b.shape))
    forward_trans = 'T' if trans else 'N'
    backward_trans = 'N' if trans else 'T'
    x = linalg.solve_triangular(l.data, b.data, lower=True, trans=forward_trans)

    def backward(g):
        gb = linalg.solve_triangular(l.data, g, lower=True, trans=backward_trans)
        gl = None
        if l.requires_grad:
            gb2 = gb.reshape(gb.shape[0], -1)
            x2 = x.reshape(x.shape[0], -1)
            if trans:
                gl = -np.tril(x2 @ gb2.T)
            else:
                gl = -np.tril(gb2 @ x2.T)
        return gl, gb
    return _record(x, 'solve_triangular', (l, b), backward)


def cholesky_solve(l, b):
    """Solve A X = B given the Cholesky factor l of A"""
    return solve_triangular(l, solve_triangular(l, b), trans=True)


def random_generator(seed, *streams):
    """Random generator keyed by a seed and stream numbers

    Independent streams of one seed (init, shuffling, sampling) never share state,
    so consuming one does not shift another.

    Args:
        seed (int): Non-negative seed
        *streams (int): Non-negative stream identifiers

    Returns:
        numpy.random.Generator: generator
    """
    return np.random.default_rng([int(seed)] + [int(s) for s in streams])


def unit_vector(size, rng):
    """Random-normal vector normalized to unit length

    Args:
        size (int): Length of vector
        rng (numpy.random.Generator): Random generator

    Returns:
        numpy.ndarray: unit vector
    """
    u = rng.standard_normal(size)
    return u / np.linalg.norm(u)


def power_iteration(w, u_state, steps=1):
    """Estimate the largest singular value of w by power iteration

    The left singular vector estimate u is returned so it can be persisted,
    one step per call then converges over many calls.

    Args:
        w (Tensor|numpy.ndarray): m x n matrix
        u_state (numpy.ndarray): Unit-norm vector of length m
        steps (int): Number of power iteration steps

    Returns:
        tuple[float, numpy.ndarray]: sigma_hat, updated u_state
    """
    if steps < 1:
        raise ValueError('Power iteration needs at least one step')
    w = np.asarray(getattr(w, 'data', w), dtype=np.float64)
    u = np.array(u_state, dtype=np.float64)
    if u.shape != (w.shape[0],):
        raise ShapeError('u_state of shape {0} does not match matrix {1}'.format(u.shape, w.shape))
    if not np.any(w):
        return 0.0, u
    for _ in range(steps):
        v = w.T @ u
        v_norm = np.linalg.norm(v)
        if v_norm == 0:
            return 0.0, u
        v /= v_norm
        u = w @ v
        u /= np.linalg.norm(u)
    sigma = float(u @ w @ v)
    return sigma, u
