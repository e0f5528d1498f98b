"""Materialization of path states into channel matrices, plus the
estimation-error model applied to them."""
import numpy as np

from otfslab.channel.paths import path_sequence
from otfslab.core.errors import ConfigurationError
from otfslab.modem.transforms import complex_gaussian, dd_to_time_matrix, time_to_dd_matrix


def cyclic_shift(mn, shift):
    """Pi^shift: moves entry i of a vector to position i + shift (mod MN)."""
    return np.roll(np.eye(mn, dtype=np.complex128), shift, axis=0)


def doppler_phases(mn, doppler):
    """Diagonal of Delta^k: exp(j 2 pi i k / MN), principal branch for real k."""
    return np.exp(2j * np.pi * np.arange(mn) * doppler / mn)


def build_time_channel(paths, m, n):
    """H_T = sum_p h_p exp(-j2pi k_p l_p / MN) Delta^(k_p) Pi^(l_p)."""
    mn = m * n
    h_t = np.zeros((mn, mn), dtype=np.complex128)
    for delay, doppler, gain in zip(paths.delays, paths.dopplers, paths.gains):
        coeff = gain * np.exp(-2j * np.pi * doppler * delay / mn)
        h_t += coeff * doppler_phases(mn, doppler)[:, None] * cyclic_shift(mn, int(delay))
    return h_t


def build_dd_channel(paths, m, n):
    """H_DD = (F_N kron I_M) H_T (F_N^H kron I_M)."""
    return time_to_dd_matrix(m, n) @ build_time_channel(paths, m, n) @ dd_to_time_matrix(m, n)


def estimate_channel(h, nmse, rng):
    """H + V with V i.i.d. CN(0, nmse ||H||_F^2 / (MN)^2), so that
    E||V||_F^2 = nmse ||H||_F^2."""
    if nmse < 0:
        raise ConfigurationError("NMSE must be non-negative")
    h = np.asarray(h, dtype=np.complex128)
    if nmse == 0:
        return h.copy()
    variance = nmse * np.sum(np.abs(h) ** 2) / h.size
    return h + complex_gaussian(rng, h.shape, variance)


class ChannelTrajectory(object):
    """Consecutive frames of (path state, true H_DD, estimated H_DD)."""

    def __init__(self, states, true_channels, estimates):
        self.states = list(states)
        self.true_channels = np.asarray(true_channels)
        self.estimates = np.asarray(estimates)

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.states, self.true_channels, self.estimates))

    def history(self, tau, target):
        """The tau estimates preceding frame `target`, oldest first."""
        if target < tau:
            raise ConfigurationError("Frame %d has fewer than %d frames of history" % (target, tau))
        return self.estimates[target - tau:target]


def materialize(states, cfg, noise_rng):
    """Rebuilds true and estimated channels from stored path states; the
    estimates are drawn from `noise_rng` in frame order."""
    true_channels = np.array([build_dd_channel(s, cfg.m, cfg.n) for s in states])
    estimates = np.array([estimate_channel(h, cfg.nmse, noise_rng) for h in true_channels])
    return ChannelTrajectory(states, true_channels, estimates)


def generate_trajectory(cfg, length, rng, noise_rng=None):
    """`length` frames chained by evolve(). Estimation noise comes from
    `noise_rng` when given, so stored path states can be re-materialized
    later without replaying the path stream."""
    states = path_sequence(cfg, length, rng)
    return materialize(states, cfg, rng if noise_rng is None else noise_rng)
