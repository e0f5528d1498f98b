"""Square QAM with per-axis binary-reflected Gray labeling.

Symbol labels are integers whose binary expansion (most significant bit
first) is the bit pattern: the first half of the bits selects the
in-phase amplitude, the second half the quadrature amplitude. On each
axis, bit pattern 0...0 maps to the largest positive amplitude and the
labels follow the reflected Gray code down to the most negative one, so
QPSK maps 00 -> (1 + j)/sqrt(2). Constellations have unit mean energy.
"""
import numpy as np

from otfslab.core.errors import ConfigurationError, DimensionError
from otfslab.core.utils import memoize_property

SUPPORTED_ORDERS = (4, 16, 64)


def gray_code(i):
    return i ^ (i >> 1)


class Constellation(object):

    def __init__(self, order):
        if order not in SUPPORTED_ORDERS:
            raise ConfigurationError("Unsupported QAM order %r (expected one of %s)" % (order, SUPPORTED_ORDERS))
        self.order = order
        self.levels = int(round(np.sqrt(order)))
        self.bits_per_axis = int(np.log2(self.levels))
        self.bits_per_symbol = 2 * self.bits_per_axis
        self.scale = 1.0 / np.sqrt(2.0 * (order - 1) / 3.0)

    def __repr__(self):
        return "Constellation(%d-QAM)" % self.order

    @property
    @memoize_property
    def axis_labels(self):
        """axis_labels[i] is the Gray label of amplitude level i, where
        level i has amplitude (2i - (L-1)) * scale, ascending."""
        return np.array([gray_code(self.levels - 1 - i) for i in range(self.levels)])

    @property
    @memoize_property
    def label_to_level(self):
        lookup = np.empty(self.levels, dtype=int)
        lookup[self.axis_labels] = np.arange(self.levels)
        return lookup

    @property
    @memoize_property
    def points(self):
        """points[label] is the complex point carrying that label."""
        labels = np.arange(self.order)
        i_level = self.label_to_level[labels >> self.bits_per_axis]
        q_level = self.label_to_level[labels & (self.levels - 1)]
        return self.scale * ((2 * i_level - (self.levels - 1)) + 1j * (2 * q_level - (self.levels - 1)))

    def bits_to_labels(self, bits):
        bits = np.asarray(bits, dtype=int).reshape(-1)
        if bits.size % self.bits_per_symbol:
            raise DimensionError("%d bits don't divide into %d-bit symbols" % (bits.size, self.bits_per_symbol))
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return bits.reshape(-1, self.bits_per_symbol) @ weights

    def labels_to_bits(self, labels):
        labels = np.asarray(labels, dtype=int).reshape(-1)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((labels[:, None] >> shifts) & 1).reshape(-1)

    def modulate(self, bits):
        return self.points[self.bits_to_labels(bits)]

    def decide(self, symbols):
        """Nearest-point decisions. Square grids decide each axis
        independently, which is the exact Euclidean nearest point."""
        symbols = np.asarray(symbols, dtype=np.complex128)
        top = self.levels - 1

        def axis_level(values):
            return np.clip(np.rint((values / self.scale + top) / 2.0), 0, top).astype(int)
        i_label = self.axis_labels[axis_level(symbols.real)]
        q_label = self.axis_labels[axis_level(symbols.imag)]
        return (i_label << self.bits_per_axis) | q_label

    def demodulate(self, symbols):
        """Returns (bits, hard symbol decisions)."""
        labels = self.decide(symbols)
        return self.labels_to_bits(labels), self.points[labels]

    def random_labels(self, rng, shape):
        return rng.integers(0, self.order, size=shape)

    def labeling_table(self):
        """(bit string, complex point) rows in label order."""
        return [(format(label, '0%db' % self.bits_per_symbol), complex(self.points[label]))
                for label in range(self.order)]
