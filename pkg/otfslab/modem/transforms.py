"""Discrete OTFS transforms.

Grids are M x N (delay x Doppler). Vectors are the column-major
vectorization of a grid, delay index fastest: x[l + M*k] = X[l, k].
All DFTs are unitary (1/sqrt(N) normalisation).
"""
import numpy as np
from scipy.linalg import dft

from otfslab.core.errors import DimensionError


def dft_matrix(n):
    """Unitary n-point DFT matrix F_n."""
    return dft(n, scale='sqrtn')


def dd_to_time_matrix(m, n):
    """(F_N^H kron I_M)."""
    return np.kron(dft_matrix(n).conj().T, np.eye(m))


def time_to_dd_matrix(m, n):
    """(F_N kron I_M)."""
    return np.kron(dft_matrix(n), np.eye(m))


def isfft(x_dd):
    """DD grid -> TF grid:
    X_TF[m, n] = 1/sqrt(MN) sum_k sum_l X_DD[l, k] exp(j2pi(nk/N - ml/M))."""
    x_dd = np.asarray(x_dd, dtype=np.complex128)
    if x_dd.ndim != 2:
        raise DimensionError("isfft expects an M x N grid, got %s" % (x_dd.shape,))
    return np.fft.ifft(np.fft.fft(x_dd, axis=0, norm='ortho'), axis=1, norm='ortho')


def sfft(x_tf):
    x_tf = np.asarray(x_tf, dtype=np.complex128)
    if x_tf.ndim != 2:
        raise DimensionError("sfft expects an M x N grid, got %s" % (x_tf.shape,))
    return np.fft.ifft(np.fft.fft(x_tf, axis=1, norm='ortho'), axis=0, norm='ortho')


def vectorize(grid):
    return np.asarray(grid).reshape(-1, order='F')


def unvectorize(vector, m, n):
    return np.asarray(vector).reshape((m, n), order='F')


def _as_grid(vector, m, n, op):
    vector = np.asarray(vector, dtype=np.complex128)
    if vector.shape[0] != m * n:
        raise DimensionError("%s expects length-%d vectors, got %s" % (op, m * n, vector.shape))
    # Leading axis is the vector; any trailing axes are independent columns
    return vector.reshape((n, m) + vector.shape[1:]), vector.shape


def dd_to_time(x_dd, m, n):
    """s = (F_N^H kron I_M) x_dd. Accepts a vector or an MN x B block of
    column vectors."""
    grid, shape = _as_grid(x_dd, m, n, 'dd_to_time')
    return np.fft.ifft(grid, axis=0, norm='ortho').reshape(shape)


def time_to_dd(r, m, n):
    """y_dd = (F_N kron I_M) r; exact adjoint (and inverse) of dd_to_time."""
    grid, shape = _as_grid(r, m, n, 'time_to_dd')
    return np.fft.fft(grid, axis=0, norm='ortho').reshape(shape)


def complex_gaussian(rng, shape, variance=1.0):
    """Circularly-symmetric complex Gaussian samples, CN(0, variance)."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(h_t, s, noise_variance, rng=None):
    """r = H_T s + w, w ~ CN(0, sigma^2 I). noise_variance = 0 is noiseless
    and needs no rng."""
    if noise_variance < 0:
        raise ValueError("Noise variance must be non-negative")
    h_t = np.asarray(h_t, dtype=np.complex128)
    s = np.asarray(s, dtype=np.complex128)
    if h_t.shape[-1] != s.shape[0]:
        raise DimensionError("apply_channel: H_T %s can't act on %s" % (h_t.shape, s.shape))
    r = h_t @ s
    if noise_variance > 0:
        r = r + complex_gaussian(rng, r.shape, noise_variance)
    return r
