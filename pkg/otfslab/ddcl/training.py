"""Unsupervised training of a precoder model against the analytic frame
error rate.

The cost of a minibatch is the mean f_FER of the precoders the model
designs, evaluated with the MMSE (by default) equalizer built from the
current estimated channel and the SINR taken on the true channel. There
are no labels.

Batches are drawn from a per-epoch permutation seeded by (seed, epoch),
so iteration i always sees the same examples and a resumed run
continues exactly where it left off.
"""
from collections import OrderedDict, namedtuple

import numpy as np

from otfslab.autodiff.tensor import Tape, Tensor
from otfslab.core.errors import ConfigurationError, NumericError, TrainingDivergedError
from otfslab.core.utils import rng_stream, snr_to_noise_variance
from otfslab.link.analytics import MMSE, analytic_fer
from otfslab.link.objective import mean_frame_error_rate

import logging
logger = logging.getLogger(__name__)

SPLIT_STREAM = 0
BATCH_STREAM = 1
INIT_STREAM = 2

LossRecord = namedtuple('LossRecord', 'iteration train_cost validation_cost')


class TrainConfig(object):

    FIELDS = ('batch_size', 'learning_rate', 'iterations', 'patience', 'eval_every',
        'validation_fraction', 'seed', 'snr_db', 'mod_order', 'equalizer', 'ser_rule')

    def __init__(self, batch_size=64, learning_rate=1e-3, iterations=20000, patience=10,
            eval_every=100, validation_fraction=0.1, seed=2024, snr_db=20.0, mod_order=4,
            equalizer=MMSE, ser_rule=None):
        self.batch_size = int(batch_size)
        self.learning_rate = float(learning_rate)
        self.iterations = int(iterations)
        self.patience = int(patience)
        self.eval_every = int(eval_every)
        self.validation_fraction = float(validation_fraction)
        self.seed = int(seed)
        self.snr_db = float(snr_db)
        self.mod_order = int(mod_order)
        self.equalizer = equalizer
        self.ser_rule = ser_rule
        if min(self.batch_size, self.iterations, self.patience, self.eval_every) < 1:
            raise ConfigurationError("Batch size, iterations, patience and evaluation interval must be positive")
        if self.learning_rate < 0:
            raise ConfigurationError("Learning rate must be non-negative")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError("Validation fraction must lie in (0, 1)")

    def to_dict(self):
        return dict((f, getattr(self, f)) for f in self.FIELDS)


class Adam(object):
    """First-order descent with bias-corrected moment estimates."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = OrderedDict()
        self.v = OrderedDict()

    def step(self, params, grads):
        """Returns updated parameters; `params` is left untouched."""
        self.t += 1
        updated = OrderedDict()
        for name, value in params.items():
            g = grads[name]
            m = self.beta1 * self.m.get(name, 0.0) + (1 - self.beta1) * g
            v = self.beta2 * self.v.get(name, 0.0) + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            updated[name] = value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated


class TrainingState(object):
    """Everything needed to continue a run: current and best parameters,
    optimizer moments, and early-stopping bookkeeping."""

    def __init__(self, params, optimizer, iteration=0, best_params=None, best_cost=None,
            bad_evaluations=0, stopped=False, history=None):
        self.params = params
        self.optimizer = optimizer
        self.iteration = iteration
        self.best_params = best_params if best_params is not None else params
        self.best_cost = best_cost
        self.bad_evaluations = bad_evaluations
        self.stopped = stopped
        self.history = history or []


def split_indices(count, cfg):
    """(training, validation) index arrays, fixed by the seed."""
    n_val = max(1, int(round(cfg.validation_fraction * count)))
    if count - n_val < 1:
        raise ConfigurationError("%d examples leave nothing to train on after validation" % count)
    order = rng_stream(cfg.seed, SPLIT_STREAM).permutation(count)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def batch_indices(train_indices, cfg, iteration):
    size = min(cfg.batch_size, len(train_indices))
    per_epoch = len(train_indices) // size
    epoch, slot = divmod(iteration, per_epoch)
    order = rng_stream(cfg.seed, BATCH_STREAM, epoch).permutation(train_indices)
    return order[slot * size:(slot + 1) * size]


class Trainer(object):
    """Trains any PrecoderModel on a TrajectoryDataset."""

    def __init__(self, model, dataset, cfg):
        self.model = model
        self.dataset = dataset
        self.cfg = cfg
        self.noise_variance = snr_to_noise_variance(cfg.snr_db, model.power_budget, model.k)
        if dataset.length < model.tau + 1:
            raise ConfigurationError("Trajectories of %d frames can't feed tau=%d" % (dataset.length, model.tau))
        self.train_indices, self.validation_indices = split_indices(len(dataset), cfg)

    def initial_state(self):
        params = self.model.init_params(rng_stream(self.cfg.seed, INIT_STREAM))
        return TrainingState(params, Adam(self.cfg.learning_rate))

    def examples(self, indices):
        trajectories = [self.dataset.trajectory(int(i)) for i in indices]
        h_true, h_est = self.model.targets(trajectories)
        return self.model.inputs(trajectories), h_true, h_est

    def cost_and_gradients(self, params, indices):
        inputs, h_true, h_est = self.examples(indices)
        leaves = OrderedDict((name, Tensor(value, requires_grad=True, name=name))
            for name, value in params.items())
        with Tape() as tape:
            precoders = self.model.forward(leaves, inputs)
            cost = mean_frame_error_rate(h_true, h_est, precoders, self.noise_variance,
                self.cfg.mod_order, self.cfg.equalizer, self.cfg.ser_rule)
        grads = tape.backward(cost, list(leaves.values()))
        return cost.item(), dict((name, grads[leaf]) for name, leaf in leaves.items())

    def mean_fer(self, params, indices, batch_size=256):
        """Mean analytic FER of the designed precoders, evaluated without a
        tape, in fixed-size chunks."""
        total = 0.0
        for start in range(0, len(indices), batch_size):
            chunk = indices[start:start + batch_size]
            inputs, h_true, h_est = self.examples(chunk)
            precoders = self.model.forward(
                OrderedDict((n, Tensor(v)) for n, v in params.items()), inputs).numpy()
            total += float(np.sum(analytic_fer(h_true, h_est, precoders, self.noise_variance,
                self.cfg.mod_order, self.cfg.equalizer, self.cfg.ser_rule)))
        return total / len(indices)

    def validation_cost(self, params):
        return self.mean_fer(params, self.validation_indices)

    def run(self, state=None, on_iteration=None):
        """Runs until the iteration budget is spent or validation stops
        improving for `patience` evaluations. Returns the final state;
        state.best_params are the parameters to deploy."""
        state = state or self.initial_state()
        cfg = self.cfg
        while state.iteration < cfg.iterations and not state.stopped:
            indices = batch_indices(self.train_indices, cfg, state.iteration)
            try:
                cost, grads = self.cost_and_gradients(state.params, indices)
            except NumericError as e:
                logger.error("Training diverged at iteration %d: %s" % (state.iteration, e))
                raise TrainingDivergedError(state.iteration, state.params)
            params = state.optimizer.step(state.params, grads)
            if not all(np.all(np.isfinite(v)) for v in params.values()):
                raise TrainingDivergedError(state.iteration, state.params)
            state.params = params
            state.iteration += 1

            validation = None
            if state.iteration % cfg.eval_every == 0 or state.iteration == cfg.iterations:
                validation = self.validation_cost(state.params)
                if state.best_cost is None or validation < state.best_cost:
                    state.best_cost = validation
                    state.best_params = state.params
                    state.bad_evaluations = 0
                else:
                    state.bad_evaluations += 1
                    if state.bad_evaluations >= cfg.patience:
                        state.stopped = True
                        logger.info("Early stop at iteration %d (best validation cost %.6g)" % (
                            state.iteration, state.best_cost))
                logger.info("iteration %d: train cost %.6g, validation cost %.6g" % (
                    state.iteration, cost, validation))
            else:
                logger.debug("iteration %d: train cost %.6g" % (state.iteration, cost))
            record = LossRecord(state.iteration, cost, validation)
            state.history.append(record)
            if on_iteration:
                on_iteration(record, state)
        return state


def train(model, dataset, cfg, state=None):
    """Returns (best parameters, loss history, final state)."""
    state = Trainer(model, dataset, cfg).run(state)
    return state.best_params, state.history, state
