"""The analytic frame error rate as a tape-differentiable function of the
precoder. Channels and the noise variance are constants; only the
precoder carries gradients."""
import numpy as np

from otfslab.autodiff import ops
from otfslab.autodiff.complex import ComplexMatrix, complex_inverse, identity
from otfslab.link.analytics import (DENOMINATOR_FLOOR, ERFC_ARGUMENT_FLOOR, GRAY_BIT, MMSE,
    NEAREST_NEIGHBOUR, SINR_CAP, equalizer_kind, ser_coefficients)


def _constant(matrix):
    if isinstance(matrix, ComplexMatrix):
        return matrix
    return ComplexMatrix.from_numpy(matrix)


def equalizer(p, h_est, noise_variance, kind):
    kind = equalizer_kind(kind)
    a = _constant(h_est) @ p
    a_h = a.H
    gram = a_h @ a
    if kind == MMSE:
        gram = gram + identity(p.shape[-1]).scale(noise_variance)
    return complex_inverse(gram) @ a_h


def sinr(e, h_true, p, noise_variance):
    g = e @ (_constant(h_true) @ p)
    power = g.abs2()
    eye = np.eye(power.shape[-1])
    signal = ops.reduce_sum(ops.multiply(power, eye), axis=-1)
    interference = ops.subtract(ops.reduce_sum(power, axis=-1), signal)
    noise = ops.scale(ops.reduce_sum(e.abs2(), axis=-1), noise_variance)
    denominator = ops.clamp_min(ops.add(interference, noise), DENOMINATOR_FLOOR)
    return ops.clamp_max(ops.multiply(signal, ops.reciprocal(denominator)), SINR_CAP)


def ser(sinr_k, order, rule=None):
    alpha, beta = ser_coefficients(order, rule)
    argument = ops.sqrt(ops.clamp_min(ops.scale(sinr_k, beta), ERFC_ARGUMENT_FLOOR))
    if (rule or GRAY_BIT) == NEAREST_NEIGHBOUR:
        axis = ops.scale(ops.erfc(argument), 0.5 * alpha)
        value = ops.subtract(1.0, ops.square(ops.subtract(1.0, axis)))
    else:
        value = ops.scale(ops.erfc(argument), alpha)
    return ops.clamp_max(ops.clamp_min(value, 0.0), 1.0)


def fer(ser_k):
    return ops.subtract(1.0, ops.prod(ops.subtract(1.0, ser_k), axis=-1))


def frame_error_rate(h_true, h_est, p, noise_variance, order, kind, rule=None):
    """f_FER(H, H_est, P): FER per batch entry, on the active tape.

    `p` is a ComplexMatrix of shape (..., MN, K); channels are numpy
    arrays (or constant ComplexMatrix) broadcastable against it."""
    e = equalizer(p, h_est, noise_variance, kind)
    return fer(ser(sinr(e, h_true, p, noise_variance), order, rule))


def mean_frame_error_rate(h_true, h_est, p, noise_variance, order, kind, rule=None):
    """The training cost: batch mean of f_FER."""
    return ops.mean(frame_error_rate(h_true, h_est, p, noise_variance, order, kind, rule))
