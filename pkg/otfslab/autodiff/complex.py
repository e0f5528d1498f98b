"""Complex matrices as (real, imaginary) tensor pairs.

Only real scalar costs are ever differentiated, so complex arithmetic is
expressed through real operations and the tape never sees a complex
number.
"""
import numpy as np

from otfslab.autodiff import ops
from otfslab.autodiff.tensor import Tensor
from otfslab.core.errors import DimensionError, SingularMatrixError

PIVOT_TOLERANCE = 1e-12


class ComplexMatrix(object):

    def __init__(self, re, im):
        re, im = ops.as_tensor(re), ops.as_tensor(im)
        if re.shape != im.shape:
            raise DimensionError("Real part %s and imaginary part %s differ in shape" % (re.shape, im.shape))
        self.re = re
        self.im = im

    @classmethod
    def from_numpy(cls, array, requires_grad=False, name=None):
        array = np.asarray(array, dtype=np.complex128)
        return cls(
            Tensor(array.real, requires_grad=requires_grad, name=name and name + '.re'),
            Tensor(array.imag, requires_grad=requires_grad, name=name and name + '.im'))

    def __repr__(self):
        return "ComplexMatrix(shape=%s)" % (self.shape,)

    @property
    def shape(self):
        return self.re.shape

    def numpy(self):
        return self.re.data + 1j * self.im.data

    @property
    def H(self):
        return ComplexMatrix(ops.transpose(self.re), ops.scale(ops.transpose(self.im), -1.0))

    def __matmul__(self, other):
        return complex_matmul(self, other)

    def __add__(self, other):
        return ComplexMatrix(ops.add(self.re, other.re), ops.add(self.im, other.im))

    def __sub__(self, other):
        return ComplexMatrix(ops.subtract(self.re, other.re), ops.subtract(self.im, other.im))

    def scale(self, c):
        return ComplexMatrix(ops.scale(self.re, c), ops.scale(self.im, c))

    def abs2(self):
        """Entrywise squared magnitude, as a real Tensor."""
        return ops.add(ops.square(self.re), ops.square(self.im))

    def leaves(self):
        return [self.re, self.im]


def complex_matmul(a, b):
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError("complex_matmul: inner dimensions of %s and %s differ" % (a.shape, b.shape))
    re = ops.subtract(ops.matmul(a.re, b.re), ops.matmul(a.im, b.im))
    im = ops.add(ops.matmul(a.re, b.im), ops.matmul(a.im, b.re))
    return ComplexMatrix(re, im)


def gauss_jordan_inverse(a):
    """Inverse of a (batch of) square complex matrices by Gaussian
    elimination with partial pivoting.

    A pivot whose magnitude is at or below 1e-12 times the largest row
    norm of its matrix raises SingularMatrixError."""
    a = np.array(a, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError("Inverse needs square matrices, got %s" % (a.shape,))
    n = a.shape[-1]
    batch_shape = a.shape[:-2]
    work = a.reshape((-1, n, n))
    count = work.shape[0]
    inv = np.broadcast_to(np.eye(n, dtype=np.complex128), (count, n, n)).copy()
    rows = np.arange(count)
    tolerance = PIVOT_TOLERANCE * np.sqrt((np.abs(work) ** 2).sum(axis=-1)).max(axis=-1)

    for col in range(n):
        pivot = col + np.argmax(np.abs(work[:, col:, col]), axis=1)
        magnitude = np.abs(work[rows, pivot, col])
        singular = magnitude <= tolerance
        if singular.any():
            first = int(np.flatnonzero(singular)[0])
            raise SingularMatrixError(col, float(magnitude[first]), float(tolerance[first]))
        for m in (work, inv):
            held = m[rows, col].copy()
            m[rows, col] = m[rows, pivot]
            m[rows, pivot] = held
        diag = work[:, col, col][:, None].copy()
        work[:, col] /= diag
        inv[:, col] /= diag
        factors = work[:, :, col].copy()
        factors[:, col] = 0
        work -= factors[:, :, None] * work[:, col, None, :]
        inv -= factors[:, :, None] * inv[:, col, None, :]
    return inv.reshape(batch_shape + (n, n))


def complex_inverse(a):
    """Differentiable inverse. The backward pass applies
    d(A^-1) = -A^-1 dA A^-1, i.e. grad_A = -B^H G B^H with B = A^-1 and
    G the complex cotangent (grad_re + j grad_im)."""
    inv = gauss_jordan_inverse(a.numpy())
    inv_h = np.conj(np.swapaxes(inv, -1, -2))

    def vjp(g):
        ga = -np.matmul(np.matmul(inv_h, g[0] + 1j * g[1]), inv_h)
        return ga.real, ga.imag
    packed = ops.primitive(np.stack([inv.real, inv.imag]), (a.re, a.im), vjp, 'complex_inverse')
    return ComplexMatrix(packed[0], packed[1])


def identity(n, batch_shape=()):
    eye = np.broadcast_to(np.eye(n), tuple(batch_shape) + (n, n))
    return ComplexMatrix(Tensor(eye), Tensor(np.zeros(eye.shape)))
