"""Multipath state of the delay-Doppler channel and its frame-to-frame
evolution.

A channel realization is P resolvable paths, each with an integer delay
index, a real (possibly fractional) Doppler index and a complex gain.
Between frames the indices drift by bounded uniform offsets, clamped to
their generation ranges, and the gains follow a first-order Gauss-Markov
process.
"""
import numpy as np

from otfslab.core.errors import ConfigurationError, DimensionError
from otfslab.modem.transforms import complex_gaussian

import logging
logger = logging.getLogger(__name__)


class ChannelConfig(object):

    FIELDS = ('m', 'n', 'paths', 'max_delay', 'max_doppler', 'rho', 'offset_bound', 'nmse')

    def __init__(self, m=8, n=4, paths=4, max_delay=5, max_doppler=2, rho=0.9,
            offset_bound=1.0, nmse=0.01):
        self.m = int(m)
        self.n = int(n)
        self.paths = int(paths)
        self.max_delay = int(max_delay)
        self.max_doppler = float(max_doppler)
        self.rho = float(rho)
        self.offset_bound = float(offset_bound)
        self.nmse = float(nmse)
        self.validate()

    def validate(self):
        if min(self.m, self.n, self.paths) < 1:
            raise ConfigurationError("M, N and P must all be at least 1")
        if not 0 <= self.max_delay < self.mn:
            raise ConfigurationError("Maximum delay index %d must lie in [0, MN=%d)" % (self.max_delay, self.mn))
        if self.max_doppler < 0:
            raise ConfigurationError("Maximum Doppler index must be non-negative")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError("Gauss-Markov correlation %r is outside [0, 1]" % self.rho)
        if self.offset_bound < 0:
            raise ConfigurationError("Offset range bound must be non-negative")
        if self.nmse < 0:
            raise ConfigurationError("NMSE must be non-negative")

    def __repr__(self):
        return "ChannelConfig(%s)" % ', '.join('%s=%r' % (f, getattr(self, f)) for f in self.FIELDS)

    def __eq__(self, other):
        return isinstance(other, ChannelConfig) and self.to_dict() == other.to_dict()

    @property
    def mn(self):
        return self.m * self.n

    @property
    def innovation_variance(self):
        return 1.0 / self.paths

    def replace(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return ChannelConfig(**values)

    def to_dict(self):
        return dict((f, getattr(self, f)) for f in self.FIELDS)

    @classmethod
    def from_dict(cls, data):
        return cls(**dict((f, data[f]) for f in cls.FIELDS if f in data))


class PathState(object):
    """The P paths of one frame, as parallel arrays."""

    def __init__(self, delays, dopplers, gains):
        self.delays = np.asarray(delays, dtype=np.int64)
        self.dopplers = np.asarray(dopplers, dtype=np.float64)
        self.gains = np.asarray(gains, dtype=np.complex128)
        if not (self.delays.shape == self.dopplers.shape == self.gains.shape) or self.delays.ndim != 1:
            raise DimensionError("Path arrays disagree: %s, %s, %s" % (
                self.delays.shape, self.dopplers.shape, self.gains.shape))

    def __len__(self):
        return len(self.delays)

    def __repr__(self):
        return "PathState(%d paths)" % len(self)

    def __eq__(self, other):
        return (isinstance(other, PathState)
            and np.array_equal(self.delays, other.delays)
            and np.array_equal(self.dopplers, other.dopplers)
            and np.array_equal(self.gains, other.gains))

    def to_dict(self):
        return {
            'delays': [int(d) for d in self.delays],
            'dopplers': [float(k) for k in self.dopplers],
            'gains': [[float(g.real), float(g.imag)] for g in self.gains],
        }

    @classmethod
    def from_dict(cls, data):
        gains = [complex(re, im) for re, im in data['gains']]
        return cls(data['delays'], data['dopplers'], gains)


def init_paths(cfg, rng):
    """Delay indices uniform on {0..l_max}, Doppler indices uniform on
    [-k_max, k_max], gains CN(0, 1/P)."""
    delays = rng.integers(0, cfg.max_delay + 1, size=cfg.paths)
    dopplers = rng.uniform(-cfg.max_doppler, cfg.max_doppler, size=cfg.paths)
    gains = complex_gaussian(rng, cfg.paths, cfg.innovation_variance)
    return PathState(delays, dopplers, gains)


def evolve(paths, cfg, rng):
    """One frame of drift. Delay offsets are integers on {-floor(zeta)..floor(zeta)},
    Doppler offsets are real on [-zeta, zeta]; both are clamped to the
    generation ranges."""
    bound = int(np.floor(cfg.offset_bound))
    delay_offsets = rng.integers(-bound, bound + 1, size=len(paths))
    doppler_offsets = rng.uniform(-cfg.offset_bound, cfg.offset_bound, size=len(paths))
    innovation = complex_gaussian(rng, len(paths), cfg.innovation_variance)
    return PathState(
        np.clip(paths.delays + delay_offsets, 0, cfg.max_delay),
        np.clip(paths.dopplers + doppler_offsets, -cfg.max_doppler, cfg.max_doppler),
        cfg.rho * paths.gains + np.sqrt(1.0 - cfg.rho ** 2) * innovation)


def path_sequence(cfg, length, rng):
    """`length` consecutive frames of path states, starting from a fresh draw."""
    if length < 1:
        raise ConfigurationError("A trajectory needs at least one frame")
    states = [init_paths(cfg, rng)]
    while len(states) < length:
        states.append(evolve(states[-1], cfg, rng))
    return states
