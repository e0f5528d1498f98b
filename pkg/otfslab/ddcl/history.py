"""Real-valued network inputs built from complex channel matrices.

A channel becomes two planes (real, imaginary) in the last axis, so a
history of tau estimates is a (tau, MN, MN, 2) array, oldest first."""
import numpy as np

from otfslab.core.errors import DimensionError


def _check_square(matrices, what):
    if matrices.ndim < 2 or matrices.shape[-1] != matrices.shape[-2]:
        raise DimensionError("%s must be square MN x MN matrices, got %s" % (what, matrices.shape))


def pack_channel(h):
    """(..., MN, MN) complex -> (..., MN, MN, 2) real."""
    h = np.asarray(h, dtype=np.complex128)
    _check_square(h, 'Channels')
    return np.stack([h.real, h.imag], axis=-1)


def unpack_channel(planes):
    planes = np.asarray(planes, dtype=np.float64)
    if planes.shape[-1] != 2:
        raise DimensionError("Expected a trailing (re, im) axis, got %s" % (planes.shape,))
    return planes[..., 0] + 1j * planes[..., 1]


def pack_history(estimates, tau=None):
    """tau estimates (oldest first) -> HistoryTensor (tau, MN, MN, 2).
    A leading batch axis is carried through."""
    estimates = np.asarray(estimates, dtype=np.complex128)
    if estimates.ndim not in (3, 4):
        raise DimensionError("A history is (tau, MN, MN) or (batch, tau, MN, MN), got %s" % (estimates.shape,))
    _check_square(estimates, 'History estimates')
    if tau is not None and estimates.shape[-3] != tau:
        raise DimensionError("Expected %d historical estimates, got %d" % (tau, estimates.shape[-3]))
    return pack_channel(estimates)


def unpack_history(history):
    return unpack_channel(history)
