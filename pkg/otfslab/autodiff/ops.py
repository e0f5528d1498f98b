"""Differentiable operations on real tensors.

Every operation evaluates its forward value with numpy, refuses to hand
back NaN/Inf, and (inside an active Tape, when an input requires a
gradient) records a vector-Jacobian product for the backward sweep.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from otfslab.autodiff.tensor import Tensor, current_tape
from otfslab.core.errors import DimensionError, NumericError

TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def primitive(data, parents, vjp, op):
    """Wraps a forward result as a Tensor, recording `vjp` on the active
    tape when any parent needs a gradient. `vjp(g)` returns one gradient
    (or None) per parent."""
    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise NumericError("Non-finite output from %s" % op, operation=op)
    out = Tensor(data)
    tape = current_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        tape.record(out, parents, vjp, op)
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError("%s: shapes %s and %s don't broadcast" % (op, a.shape, b.shape))


# Elementwise arithmetic

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'add')
    return primitive(a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), 'add')


def subtract(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'subtract')
    return primitive(a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), 'subtract')


def multiply(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'multiply')
    return primitive(a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)), 'multiply')


def scale(a, c):
    a = as_tensor(a)
    c = float(c)
    return primitive(a.data * c, (a,), lambda g: (g * c,), 'scale')


def square(a):
    a = as_tensor(a)
    return primitive(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,), 'square')


def sqrt(a):
    a = as_tensor(a)
    with np.errstate(invalid='ignore'):
        out = np.sqrt(a.data)

    def vjp(g):
        with np.errstate(divide='ignore'):
            return (0.5 * g / out,)
    return primitive(out, (a,), vjp, 'sqrt')


def reciprocal(a):
    a = as_tensor(a)
    with np.errstate(divide='ignore'):
        out = 1.0 / a.data
    return primitive(out, (a,), lambda g: (-g * out * out,), 'reciprocal')


def exp(a):
    a = as_tensor(a)
    with np.errstate(over='ignore'):
        out = np.exp(a.data)
    return primitive(out, (a,), lambda g: (g * out,), 'exp')


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return primitive(out, (a,), lambda g: (g * (1.0 - out * out),), 'tanh')


def sigmoid(a):
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return primitive(out, (a,), lambda g: (g * out * (1.0 - out),), 'sigmoid')


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return primitive(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), 'relu')


def erfc(a):
    """Complementary error function.

    The forward value comes from scipy's rational approximation; the
    derivative is the exact -(2/sqrt(pi)) exp(-x^2), not a derivative of
    the approximation."""
    a = as_tensor(a)
    out = special.erfc(a.data)
    return primitive(out, (a,),
        lambda g: (-TWO_OVER_SQRT_PI * np.exp(-a.data * a.data) * g,), 'erfc')


def clamp_min(a, floor):
    a = as_tensor(a)
    mask = a.data >= floor
    return primitive(np.where(mask, a.data, floor), (a,), lambda g: (g * mask,), 'clamp_min')


def clamp_max(a, ceiling):
    a = as_tensor(a)
    mask = a.data <= ceiling
    return primitive(np.where(mask, a.data, ceiling), (a,), lambda g: (g * mask,), 'clamp_max')


# Shapes and reductions

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul: can't multiply %s by %s" % (a.shape, b.shape))
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError("matmul: batch shapes %s and %s don't broadcast" % (a.shape, b.shape))

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return primitive(out, (a, b), vjp, 'matmul')


def transpose(a, axes=None):
    """Swaps the last two axes, or permutes by `axes` when given."""
    a = as_tensor(a)
    if axes is None:
        if a.ndim < 2:
            raise DimensionError("transpose needs at least 2 dimensions, got %s" % (a.shape,))
        axes = list(range(a.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return primitive(np.transpose(a.data, axes), (a,),
        lambda g: (np.transpose(g, inverse),), 'transpose')


def reshape(a, shape):
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError("reshape: can't view %s as %s" % (a.shape, shape))
    return primitive(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def reduce_sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return primitive(out, (a,), vjp, 'reduce_sum')


def mean(a, axis=None):
    a = as_tensor(a)
    count = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scale(reduce_sum(a, axis=axis), 1.0 / count)


def prod(a, axis=-1):
    """Product along one axis. The gradient uses prefix/suffix products,
    so zero factors are handled exactly."""
    a = as_tensor(a)
    moved = np.moveaxis(a.data, axis, -1)
    out = np.prod(moved, axis=-1)

    def vjp(g):
        ones = np.ones(moved.shape[:-1] + (1,))
        prefix = np.concatenate([ones, np.cumprod(moved, axis=-1)[..., :-1]], axis=-1)
        suffix = np.concatenate([np.cumprod(moved[..., ::-1], axis=-1)[..., :-1][..., ::-1], ones], axis=-1)
        return (np.moveaxis(prefix * suffix * g[..., None], -1, axis),)
    return primitive(out, (a,), vjp, 'prod')


def index(a, key):
    """Basic (slice/integer) indexing."""
    a = as_tensor(a)
    out = a.data[key]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[key] += g
        return (full,)
    return primitive(out, (a,), vjp, 'index')


def concatenate(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError("concatenate: incompatible shapes %s" % [t.shape for t in tensors])
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return primitive(out, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)), 'concatenate')


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError("stack: incompatible shapes %s" % [t.shape for t in tensors])

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))
    return primitive(out, tensors, vjp, 'stack')


# Convolution and pooling, channels-last (batch, height, width, channels)

def _conv_padding(padding, kh, kw):
    if padding == 'same':
        top, left = (kh - 1) // 2, (kw - 1) // 2
        return (top, kh - 1 - top), (left, kw - 1 - left)
    if padding == 'valid':
        return (0, 0), (0, 0)
    p = int(padding)
    return (p, p), (p, p)


def conv2d(x, w, b=None, padding='same'):
    """Stride-1 multi-channel 2-D convolution (cross-correlation).

    x: (batch, H, W, C_in); w: (C_out, kh, kw, C_in); b: (C_out,).
    padding is 'same' (output keeps H x W), 'valid', or an int."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[3] != w.shape[3]:
        raise DimensionError("conv2d: input %s incompatible with filters %s" % (x.shape, w.shape))
    _, kh, kw, _ = w.shape
    (pt, pb), (pl, pr) = _conv_padding(padding, kh, kw)
    xp = np.pad(x.data, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    if xp.shape[1] < kh or xp.shape[2] < kw:
        raise DimensionError("conv2d: %s input is smaller than %dx%d filters" % (x.shape, kh, kw))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    out = np.einsum('bhwcij,oijc->bhwo', windows, w.data)
    parents = [x, w]
    if b is not None:
        b = as_tensor(b)
        out = out + b.data
        parents.append(b)
    out_h, out_w = out.shape[1], out.shape[2]

    def vjp(g):
        gw = np.einsum('bhwcij,bhwo->oijc', windows, g)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, i:i + out_h, j:j + out_w, :] += np.einsum('bhwo,oc->bhwc', g, w.data[:, i, j, :])
        gx = gxp[:, pt:pt + x.shape[1], pl:pl + x.shape[2], :]
        grads = [gx, gw]
        if b is not None:
            grads.append(g.sum(axis=(0, 1, 2)))
        return grads
    return primitive(out, parents, vjp, 'conv2d')


def max_pool2d(x, size=2):
    """Max pooling with stride equal to the window size; trailing rows or
    columns that don't fill a window are dropped. Ties go to the first
    element in row-major window order."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise DimensionError("max_pool2d: expected (batch, H, W, C), got %s" % (x.shape,))
    bsz, height, width, chans = x.shape
    oh, ow = height // size, width // size
    if oh == 0 or ow == 0:
        raise DimensionError("max_pool2d: %s input is smaller than the %dx%d window" % (x.shape, size, size))
    cropped = x.data[:, :oh * size, :ow * size, :]
    blocks = cropped.reshape(bsz, oh, size, ow, size, chans).transpose(0, 1, 3, 5, 2, 4)
    blocks = blocks.reshape(bsz, oh, ow, chans, size * size)
    winner = np.argmax(blocks, axis=-1)
    out = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]

    def vjp(g):
        scattered = np.zeros((bsz, oh, ow, chans, size * size))
        np.put_along_axis(scattered, winner[..., None], g[..., None], axis=-1)
        scattered = scattered.reshape(bsz, oh, ow, chans, size, size).transpose(0, 1, 4, 2, 5, 3)
        full = np.zeros_like(x.data)
        full[:, :oh * size, :ow * size, :] = scattered.reshape(bsz, oh * size, ow * size, chans)
        return (full,)
    return primitive(out, (x,), vjp, 'max_pool2d')
