"""The predictive precoder network and the perfect-CSI CNN baseline.

Both models share a tail: an affine map to 2 K MN outputs, reshaped to
(2MN, K), scaled to Frobenius norm sqrt(P_0), with the top MN rows the
real part and the bottom MN rows the imaginary part of the MN x K
precoder.

Parameters are an ordered mapping of name -> numpy array; forward()
takes the same mapping with Tensors as values, so the trainer can put
them on a tape. Layout is channels-last throughout; conv filters are
(C_out, kh, kw, C_in) and LSTM gates are ordered (input, forget,
candidate, output).
"""
from collections import OrderedDict

import numpy as np

from otfslab.autodiff import ops
from otfslab.autodiff.complex import ComplexMatrix
from otfslab.autodiff.tensor import Tensor
from otfslab.core.errors import ConfigurationError, DegeneratePrecoderError, DimensionError
from otfslab.core.utils import memoize_property
from otfslab.ddcl.history import pack_channel, pack_history

import logging
logger = logging.getLogger(__name__)

FILTERS = 2
KERNEL = 3
POOL = 2
FORGET_BIAS = 1.0
DEFAULT_HIDDEN = 32


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def lstm_cell(x, state, w, u, b):
    """One step of a standard LSTM.

    x: (batch, F); state: (h, c), each (batch, H); w: (F, 4H);
    u: (H, 4H); b: (4H,). Returns (h', (h', c'))."""
    h, c = state
    hidden = h.shape[-1]
    z = ops.add(ops.add(ops.matmul(x, w), ops.matmul(h, u)), b)
    i = ops.sigmoid(z[:, :hidden])
    f = ops.sigmoid(z[:, hidden:2 * hidden])
    g = ops.tanh(z[:, 2 * hidden:3 * hidden])
    o = ops.sigmoid(z[:, 3 * hidden:])
    c_next = ops.add(ops.multiply(f, c), ops.multiply(i, g))
    h_next = ops.multiply(o, ops.tanh(c_next))
    return h_next, (h_next, c_next)


def power_normalize(raw, power_budget, mn):
    """(batch, 2MN, K) real -> MN x K complex precoders with
    ||P||_F^2 = P_0 each."""
    energy = np.sum(raw.data ** 2, axis=(1, 2))
    if np.any(energy == 0):
        raise DegeneratePrecoderError()
    norm = ops.sqrt(ops.reduce_sum(ops.square(raw), axis=(1, 2), keepdims=True))
    scaled = ops.multiply(ops.scale(raw, np.sqrt(power_budget)), ops.reciprocal(norm))
    return ComplexMatrix(scaled[:, :mn, :], scaled[:, mn:, :])


class PrecoderModel(object):
    """What the trainer needs from a model: parameter shapes and
    initialisation, inputs built from channel trajectories, and a
    forward pass to a ComplexMatrix batch of precoders."""

    architecture = None
    perfect_csi = False

    def __init__(self, m, n, k, power_budget, tau=1, hidden=DEFAULT_HIDDEN):
        self.m, self.n, self.k = int(m), int(n), int(k)
        self.mn = self.m * self.n
        self.tau = int(tau)
        self.hidden = int(hidden)
        self.power_budget = float(power_budget)
        if not 1 <= self.k <= self.mn:
            raise ConfigurationError("K=%d must lie in [1, MN=%d]" % (self.k, self.mn))
        if self.mn < POOL:
            raise ConfigurationError("MN=%d is too small for %dx%d pooling" % (self.mn, POOL, POOL))
        if self.tau < 1 or self.hidden < 1 or self.power_budget <= 0:
            raise ConfigurationError("tau, hidden size and power budget must be positive")

    def __repr__(self):
        return "%s(M=%d, N=%d, K=%d, tau=%d)" % (self.__class__.__name__, self.m, self.n, self.k, self.tau)

    @property
    def features(self):
        """Flattened size after conv + pooling."""
        return (self.mn // POOL) ** 2 * FILTERS

    @property
    def outputs(self):
        return 2 * self.k * self.mn

    def config(self):
        return {
            'architecture': self.architecture,
            'M': self.m, 'N': self.n, 'K': self.k, 'tau': self.tau,
            'hidden': self.hidden, 'power_budget': self.power_budget,
        }

    @property
    @memoize_property
    def shapes(self):
        return OrderedDict(self._shapes())

    def _shapes(self):
        raise NotImplementedError

    def _fans(self, name, shape):
        if name.startswith('conv.'):
            return KERNEL * KERNEL * shape[-1], KERNEL * KERNEL * FILTERS
        return shape[0], shape[1]

    def init_params(self, rng):
        """Glorot-uniform weights, zero biases, forget-gate biases at 1."""
        params = OrderedDict()
        for name, shape in self.shapes.items():
            if name.endswith('.b'):
                value = np.zeros(shape)
                if name.startswith('lstm'):
                    value[self.hidden:2 * self.hidden] = FORGET_BIAS
            else:
                value = glorot_uniform(rng, shape, *self._fans(name, shape))
            params[name] = value
        return params

    def check_params(self, params):
        for name, shape in self.shapes.items():
            if name not in params:
                raise DimensionError("Missing parameter %s" % name)
            if tuple(np.shape(params[name].data if isinstance(params[name], Tensor) else params[name])) != shape:
                raise DimensionError("Parameter %s should be %s" % (name, shape))

    def _features(self, params, images):
        """(batch, MN, MN, 2) -> (batch, features)."""
        x = ops.conv2d(images, params['conv.w'], params['conv.b'], padding='same')
        x = ops.max_pool2d(ops.relu(x), POOL)
        return ops.reshape(x, (images.shape[0], self.features))

    def _precoder(self, params, hidden):
        raw = ops.add(ops.matmul(hidden, params['fc.w']), params['fc.b'])
        raw = ops.reshape(raw, (hidden.shape[0], 2 * self.mn, self.k))
        return power_normalize(raw, self.power_budget, self.mn)

    def forward(self, params, inputs):
        raise NotImplementedError

    def inputs(self, trajectories):
        raise NotImplementedError

    def targets(self, trajectories):
        """(true channels, channels the receiver equalizes with) for the
        last frame of each trajectory, the frame being designed for."""
        h_true = np.array([t.true_channels[-1] for t in trajectories])
        if self.perfect_csi:
            return h_true, h_true
        return h_true, np.array([t.estimates[-1] for t in trajectories])

    def design_precoder(self, params, single_input):
        """Frozen-network inference for one input; returns MN x K complex."""
        tensors = OrderedDict((name, Tensor(value)) for name, value in params.items())
        return self.forward(tensors, np.asarray(single_input)[None]).numpy()[0]


class DdclNet(PrecoderModel):
    """CNN -> two LSTM layers -> affine -> power normalisation, driven by
    the last tau estimated channels."""

    architecture = 'ddcl'

    def _shapes(self):
        h = self.hidden
        return [
            ('conv.w', (FILTERS, KERNEL, KERNEL, 2)),
            ('conv.b', (FILTERS,)),
            ('lstm1.w', (self.features, 4 * h)),
            ('lstm1.u', (h, 4 * h)),
            ('lstm1.b', (4 * h,)),
            ('lstm2.w', (h, 4 * h)),
            ('lstm2.u', (h, 4 * h)),
            ('lstm2.b', (4 * h,)),
            ('fc.w', (h, self.outputs)),
            ('fc.b', (self.outputs,)),
        ]

    def forward(self, params, history):
        """history: (batch, tau, MN, MN, 2) -> ComplexMatrix (batch, MN, K)."""
        history = np.asarray(history, dtype=np.float64)
        expected = (self.tau, self.mn, self.mn, 2)
        if history.ndim != 5 or history.shape[1:] != expected:
            raise DimensionError("History should be (batch,) + %s, got %s" % (expected, history.shape))
        batch = history.shape[0]
        images = Tensor(history.reshape((batch * self.tau,) + expected[1:]))
        features = ops.reshape(self._features(params, images), (batch, self.tau, self.features))

        zeros = Tensor(np.zeros((batch, self.hidden)))
        state1, state2 = (zeros, zeros), (zeros, zeros)
        for step in range(self.tau):
            out1, state1 = lstm_cell(features[:, step, :], state1,
                params['lstm1.w'], params['lstm1.u'], params['lstm1.b'])
            out2, state2 = lstm_cell(out1, state2,
                params['lstm2.w'], params['lstm2.u'], params['lstm2.b'])
        return self._precoder(params, out2)

    def inputs(self, trajectories):
        return pack_history([t.history(self.tau, len(t) - 1) for t in trajectories], self.tau)


class BaselineCnn(PrecoderModel):
    """conv -> pool -> flatten -> affine -> power normalisation, fed the
    current true channel. With perfect CSI at both ends it bounds what a
    predictive design can reach."""

    architecture = 'lower_bound'
    perfect_csi = True

    def _shapes(self):
        return [
            ('conv.w', (FILTERS, KERNEL, KERNEL, 2)),
            ('conv.b', (FILTERS,)),
            ('fc.w', (self.features, self.outputs)),
            ('fc.b', (self.outputs,)),
        ]

    def forward(self, params, channels):
        """channels: (batch, MN, MN, 2) -> ComplexMatrix (batch, MN, K)."""
        channels = np.asarray(channels, dtype=np.float64)
        expected = (self.mn, self.mn, 2)
        if channels.ndim != 4 or channels.shape[1:] != expected:
            raise DimensionError("Channels should be (batch,) + %s, got %s" % (expected, channels.shape))
        return self._precoder(params, self._features(params, Tensor(channels)))

    def inputs(self, trajectories):
        return pack_channel(np.array([t.true_channels[-1] for t in trajectories]))


ARCHITECTURES = {
    DdclNet.architecture: DdclNet,
    BaselineCnn.architecture: BaselineCnn,
}


def build_model(config):
    """Rebuilds a model from the config block stored with its parameters."""
    try:
        cls = ARCHITECTURES[config['architecture']]
    except KeyError:
        raise ConfigurationError("Unknown architecture %r" % config.get('architecture'))
    return cls(config['M'], config['N'], config['K'], config['power_budget'],
        tau=config.get('tau', 1), hidden=config.get('hidden', DEFAULT_HIDDEN))


def forward(params, history, model):
    """Functional form of model.forward for numpy parameters."""
    tensors = OrderedDict((name, value if isinstance(value, Tensor) else Tensor(value))
        for name, value in params.items())
    return model.forward(tensors, history)


def baseline_cnn_forward(params, h_true_current, model):
    return forward(params, h_true_current, model)
