"""Tensors and the reverse-mode tape.

A Tensor is a float64 numpy array plus, when it was produced inside an
active Tape from something that requires a gradient, a handle (node_id)
into that tape. Operations live in otfslab.autodiff.ops.
"""
import contextvars

import numpy as np

from otfslab.core.errors import DimensionError

_active_tape = contextvars.ContextVar('otfslab_active_tape', default=None)


def current_tape():
    return _active_tape.get()


class Tensor(object):

    # Makes ndarray <op> Tensor defer to Tensor's reflected operators
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.node_id = None
        self.tape = None

    def __repr__(self):
        return "Tensor(shape=%s%s%s)" % (
            self.shape,
            ', name=%r' % self.name if self.name else '',
            ', node=%d' % self.node_id if self.node_id is not None else '')

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.size != 1:
            raise DimensionError("item() needs a single-element tensor, got shape %s" % (self.shape,))
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data

    # Operator sugar; the implementations are in ops
    def __add__(self, other):
        from otfslab.autodiff import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from otfslab.autodiff import ops
        return ops.subtract(self, other)

    def __rsub__(self, other):
        from otfslab.autodiff import ops
        return ops.subtract(other, self)

    def __mul__(self, other):
        from otfslab.autodiff import ops
        return ops.multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from otfslab.autodiff import ops
        if isinstance(other, Tensor):
            return ops.multiply(self, ops.reciprocal(other))
        return ops.scale(self, 1.0 / other)

    def __neg__(self):
        from otfslab.autodiff import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from otfslab.autodiff import ops
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from otfslab.autodiff import ops
        return ops.matmul(other, self)

    def __getitem__(self, key):
        from otfslab.autodiff import ops
        return ops.index(self, key)

    @property
    def T(self):
        from otfslab.autodiff import ops
        return ops.transpose(self)

    def sum(self, axis=None, keepdims=False):
        from otfslab.autodiff import ops
        return ops.reduce_sum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from otfslab.autodiff import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


class GradientMap(dict):
    """Maps leaf Tensors (by identity) to gradient arrays."""

    def named(self):
        return dict((leaf.name, grad) for leaf, grad in self.items() if leaf.name)


class _Node(object):

    __slots__ = ('out', 'parents', 'vjp', 'op')

    def __init__(self, out, parents, vjp, op):
        self.out = out
        self.parents = parents
        self.vjp = vjp
        self.op = op


class Tape(object):
    """Ordered record of differentiable operations.

    Use as a context manager; every operation evaluated inside the block
    whose inputs require a gradient is appended to the tape. Nodes are
    appended after their parents exist, so the record is already in
    topological order and backward() is a single reverse sweep.

    A tape belongs to one thread of control. Independent tapes may be used
    concurrently; forward evaluation outside any tape records nothing.
    """

    def __init__(self):
        self.nodes = []
        self._tokens = []

    def __enter__(self):
        self._tokens.append(_active_tape.set(self))
        return self

    def __exit__(self, *exc_info):
        _active_tape.reset(self._tokens.pop())
        return False

    def __len__(self):
        return len(self.nodes)

    def record(self, out, parents, vjp, op):
        out.node_id = len(self.nodes)
        out.tape = self
        out.requires_grad = True
        self.nodes.append(_Node(out, tuple(parents), vjp, op))
        return out

    def backward(self, root, leaves=None):
        """Gradients of the scalar `root` with respect to the leaves.

        Returns a GradientMap covering every leaf reached from root, plus a
        zero gradient for any requested leaf that wasn't reached."""
        if root.size != 1:
            raise DimensionError("backward() needs a scalar root, got shape %s" % (root.shape,))
        if root.tape is not self or root.node_id is None:
            raise DimensionError("backward() root was not recorded on this tape")

        grads = {id(root): np.ones_like(root.data)}
        reached = {}
        for node in reversed(self.nodes[:root.node_id + 1]):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                if parent.node_id is None:
                    reached[key] = parent

        result = GradientMap()
        for key, leaf in reached.items():
            result[leaf] = np.asarray(grads[key], dtype=np.float64).reshape(leaf.shape)
        for leaf in (leaves or []):
            if leaf not in result:
                result[leaf] = np.zeros_like(leaf.data)
        return result


def backward(root, leaves=None):
    if root.tape is None:
        raise DimensionError("backward() root is not on any tape")
    return root.tape.backward(root, leaves)
