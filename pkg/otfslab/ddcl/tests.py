import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from otfslab.autodiff import ops
from otfslab.autodiff.gradcheck import gradient_mismatches
from otfslab.autodiff.tensor import Tensor
from otfslab.channel.paths import ChannelConfig
from otfslab.channel.storage import generate_dataset
from otfslab.core.errors import (CheckpointError, DegeneratePrecoderError, DimensionError,
    NumericError, TrainingDivergedError)
from otfslab.core.utils import snr_to_noise_variance
from otfslab.ddcl.checkpoint import decode_checkpoint, load_checkpoint, save_checkpoint
from otfslab.ddcl.history import pack_channel, pack_history, unpack_history
from otfslab.ddcl.network import BaselineCnn, DdclNet, build_model, forward, lstm_cell
from otfslab.ddcl.training import Trainer, TrainConfig, batch_indices, split_indices, train
from otfslab.link.analytics import MMSE, NEAREST_NEIGHBOUR, analytic_fer, identity_precoder
from otfslab.link.objective import mean_frame_error_rate

TOY_CHANNEL = ChannelConfig(m=2, n=2, paths=2, max_delay=2, max_doppler=1)


def toy_dataset(count=64, seed=1, tau=2):
    return generate_dataset(TOY_CHANNEL, seed, count, tau + 1)


class HistoryTests(SimpleTestCase):

    def test_zeros(self):
        np.testing.assert_array_equal(pack_history(np.zeros((5, 32, 32))), np.zeros((5, 32, 32, 2)))

    def test_identity_planes(self):
        packed = pack_history(np.array([np.eye(4)] * 3))
        np.testing.assert_array_equal(packed[..., 0], np.array([np.eye(4)] * 3))
        np.testing.assert_array_equal(packed[..., 1], 0)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        estimates = rng.standard_normal((2, 5, 4, 4)) + 1j * rng.standard_normal((2, 5, 4, 4))
        np.testing.assert_array_equal(unpack_history(pack_history(estimates)), estimates)

    def test_shape_errors(self):
        with self.assertRaises(DimensionError):
            pack_history(np.zeros((5, 4, 3)))
        with self.assertRaises(DimensionError):
            pack_history(np.zeros((4, 4, 4)), tau=5)
        with self.assertRaises(DimensionError):
            pack_channel(np.zeros(4))


class LstmCellTests(SimpleTestCase):

    def test_zero_weights(self):
        x = Tensor(np.random.default_rng(2).standard_normal((3, 6)))
        zeros = Tensor(np.zeros((3, 4)))
        out, (h, c) = lstm_cell(x, (zeros, zeros), np.zeros((6, 16)), np.zeros((4, 16)), np.zeros(16))
        np.testing.assert_array_equal(out.numpy(), 0)
        np.testing.assert_array_equal(c.numpy(), 0)

    def test_bounded_output(self):
        rng = np.random.default_rng(3)
        state = (Tensor(np.zeros((5, 4))), Tensor(np.zeros((5, 4))))
        for _ in range(10):
            out, state = lstm_cell(Tensor(10 * rng.standard_normal((5, 6))), state,
                5 * rng.standard_normal((6, 16)), 5 * rng.standard_normal((4, 16)), rng.standard_normal(16))
            self.assertTrue(np.all(np.abs(out.numpy()) < 1))

    def test_unrolled_gradient(self):
        rng = np.random.default_rng(4)
        xs = rng.standard_normal((5, 2, 3))
        weights = rng.standard_normal((3, 8)) * 0.5

        def unrolled(w, u, b):
            state = (Tensor(np.zeros((2, 2))), Tensor(np.zeros((2, 2))))
            for step in range(5):
                out, state = lstm_cell(Tensor(xs[step]), state, w, u, b)
            return ops.reduce_sum(ops.multiply(out, np.array([[1.0, -2.0], [0.5, 3.0]])))
        arrays = [weights, rng.standard_normal((2, 8)) * 0.5, rng.standard_normal(8) * 0.1]
        self.assertEqual(gradient_mismatches(unrolled, arrays), [])


class ForwardTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(5)
        self.model = DdclNet(8, 4, 32, 32.0, tau=5)
        self.params = self.model.init_params(self.rng)
        self.history = self.rng.standard_normal((3, 5, 32, 32, 2))

    def test_shapes(self):
        self.assertEqual(self.model.features, 512)
        self.assertEqual(self.model.shapes['fc.w'], (32, 2048))
        np.testing.assert_array_equal(self.params['lstm1.b'][32:64], 1.0)
        np.testing.assert_array_equal(self.params['lstm1.b'][:32], 0.0)

    def test_power_constraint(self):
        precoders = forward(self.params, self.history, self.model).numpy()
        self.assertEqual(precoders.shape, (3, 32, 32))
        for p in precoders:
            self.assertLess(abs(np.sum(np.abs(p) ** 2) - 32.0), 1e-9 * 32.0)

    def test_deterministic(self):
        a = forward(self.params, self.history, self.model).numpy()
        b = forward(self.params, self.history, self.model).numpy()
        np.testing.assert_array_equal(a, b)

    def test_design_precoder(self):
        single = self.model.design_precoder(self.params, self.history[1])
        np.testing.assert_array_equal(single, forward(self.params, self.history[1:2], self.model).numpy()[0])

    def test_scale_invariance(self):
        scaled = dict(self.params)
        scaled['fc.w'] = 3.0 * self.params['fc.w']
        scaled['fc.b'] = 3.0 * self.params['fc.b']
        np.testing.assert_allclose(forward(scaled, self.history, self.model).numpy(),
            forward(self.params, self.history, self.model).numpy(), atol=1e-12)

    def test_degenerate_output(self):
        zero = dict((name, np.zeros_like(value)) for name, value in self.params.items())
        with self.assertRaises(DegeneratePrecoderError):
            forward(zero, self.history, self.model)

    def test_bad_history(self):
        with self.assertRaises(DimensionError):
            forward(self.params, self.history[:, :4], self.model)

    def test_end_to_end_gradient(self):
        model = DdclNet(2, 2, 2, 4.0, tau=2)
        rng = np.random.default_rng(6)
        params = model.init_params(rng)
        dataset = toy_dataset(4)
        trajectories = [dataset.trajectory(i) for i in range(4)]
        inputs = model.inputs(trajectories)
        h_true, h_est = model.targets(trajectories)
        variance = snr_to_noise_variance(10.0, 4.0, model.k)
        names = list(params)

        def cost(*tensors):
            precoders = model.forward(dict(zip(names, tensors)), inputs)
            return mean_frame_error_rate(h_true, h_est, precoders, variance, 4, MMSE)
        mismatches = gradient_mismatches(cost, [params[n] for n in names], samples=120, seed=3)
        self.assertEqual(mismatches, [])


class BaselineTests(SimpleTestCase):

    def setUp(self):
        self.model = BaselineCnn(8, 4, 32, 32.0)
        self.params = self.model.init_params(np.random.default_rng(7))
        self.channels = np.random.default_rng(8).standard_normal((2, 32, 32, 2))

    def test_power_constraint(self):
        for p in forward(self.params, self.channels, self.model).numpy():
            self.assertLess(abs(np.sum(np.abs(p) ** 2) - 32.0), 1e-9 * 32.0)

    def test_deterministic(self):
        np.testing.assert_array_equal(forward(self.params, self.channels, self.model).numpy(),
            forward(self.params, self.channels, self.model).numpy())

    def test_rebuild_from_config(self):
        rebuilt = build_model(self.model.config())
        self.assertIsInstance(rebuilt, BaselineCnn)
        self.assertEqual(rebuilt.shapes, self.model.shapes)


class TrainingTests(SimpleTestCase):

    def setUp(self):
        self.model = DdclNet(2, 2, 2, 4.0, tau=2)
        self.dataset = toy_dataset(64)
        self.cfg = TrainConfig(batch_size=16, learning_rate=1e-2, iterations=50, eval_every=10,
            validation_fraction=0.25, seed=3, snr_db=10.0)

    def test_split_and_batches(self):
        train_idx, val_idx = split_indices(64, self.cfg)
        self.assertEqual((len(train_idx), len(val_idx)), (48, 16))
        self.assertFalse(set(train_idx) & set(val_idx))
        first = [tuple(batch_indices(train_idx, self.cfg, i)) for i in range(3)]
        epoch = np.concatenate([batch_indices(train_idx, self.cfg, i) for i in range(3)])
        self.assertEqual(sorted(epoch), sorted(train_idx))
        self.assertEqual(first, [tuple(batch_indices(train_idx, self.cfg, i)) for i in range(3)])

    def test_descent(self):
        trainer = Trainer(self.model, self.dataset, self.cfg)
        state = trainer.initial_state()
        before = trainer.mean_fer(state.params, trainer.train_indices)
        state = trainer.run(state)
        self.assertLess(trainer.mean_fer(state.params, trainer.train_indices), before)
        self.assertEqual(len(state.history), state.iteration)

    def test_zero_learning_rate(self):
        cfg = TrainConfig(batch_size=16, learning_rate=0.0, iterations=5, eval_every=5, seed=3)
        trainer = Trainer(self.model, self.dataset, cfg)
        initial = trainer.initial_state().params
        params, history, _ = train(self.model, self.dataset, cfg)
        for name in initial:
            np.testing.assert_array_equal(params[name], initial[name])

    def test_replay(self):
        cfg = TrainConfig(batch_size=16, iterations=8, eval_every=4, seed=3)
        _, first, _ = train(self.model, self.dataset, cfg)
        _, second, _ = train(self.model, toy_dataset(64), cfg)
        self.assertEqual(first, second)

    def test_resume(self):
        cfg = TrainConfig(batch_size=16, iterations=8, eval_every=2, seed=3)
        _, unbroken, _ = train(self.model, self.dataset, cfg)

        head = TrainConfig(batch_size=16, iterations=4, eval_every=2, seed=3)
        _, _, state = train(self.model, self.dataset, head)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'partial.ckpt')
            save_checkpoint(path, self.model, state.best_params, {'seed': 3}, state=state)
            restored = load_checkpoint(path).training_state()
        restored.history = list(state.history)
        resumed = Trainer(self.model, self.dataset, cfg).run(restored)
        self.assertEqual(resumed.history, unbroken)

    def test_early_stopping(self):
        cfg = TrainConfig(batch_size=16, learning_rate=0.0, iterations=100, eval_every=1, patience=3, seed=3)
        _, history, state = train(self.model, self.dataset, cfg)
        self.assertTrue(state.stopped)
        self.assertEqual(len(history), 4)

    def test_divergence(self):
        class Exploding(DdclNet):
            calls = 0

            def forward(self, params, history):
                Exploding.calls += 1
                if Exploding.calls > 2:
                    raise NumericError("Non-finite output from matmul", operation='matmul')
                return super(Exploding, self).forward(params, history)
        cfg = TrainConfig(batch_size=16, iterations=10, eval_every=100, seed=3)
        with self.assertRaises(TrainingDivergedError) as caught:
            train(Exploding(2, 2, 2, 4.0, tau=2), self.dataset, cfg)
        self.assertEqual(caught.exception.iteration, 2)
        self.assertIn('fc.w', caught.exception.last_finite_params)

    def test_baseline_trains(self):
        model = BaselineCnn(2, 2, 2, 4.0, tau=2)
        trainer = Trainer(model, self.dataset, self.cfg)
        state = trainer.initial_state()
        before = trainer.mean_fer(state.params, trainer.train_indices)
        state = trainer.run(state)
        self.assertLess(trainer.mean_fer(state.params, trainer.train_indices), before)

    def test_baseline_beats_identity_precoder(self):
        # one data symbol: the trained network has the whole frame to beamform with
        model = BaselineCnn(2, 2, 1, 4.0, tau=2)
        cfg = TrainConfig(batch_size=16, learning_rate=1e-2, iterations=200, eval_every=50,
            validation_fraction=0.25, seed=3, snr_db=20.0, ser_rule=NEAREST_NEIGHBOUR)
        trainer = Trainer(model, self.dataset, cfg)
        state = trainer.run()
        _, h_true, h_est = trainer.examples(trainer.train_indices)
        identity = float(np.mean(analytic_fer(h_true, h_est, identity_precoder(4, 1, 4.0),
            trainer.noise_variance, 4, MMSE, NEAREST_NEIGHBOUR)))
        self.assertLess(trainer.mean_fer(state.params, trainer.train_indices), identity)


class CheckpointTests(SimpleTestCase):

    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.dir.cleanup)
        self.path = os.path.join(self.dir.name, 'model.ckpt')
        self.model = DdclNet(2, 2, 2, 4.0, tau=2)
        self.params = self.model.init_params(np.random.default_rng(9))
        save_checkpoint(self.path, self.model, self.params, {'seed': 9, 'mod_order': 4})

    def _bytes(self):
        with open(self.path, 'rb') as f:
            return f.read()

    def test_round_trip(self):
        checkpoint = load_checkpoint(self.path, expect={'M': 2, 'N': 2, 'K': 2, 'tau': 2, 'seed': 9})
        self.assertEqual(checkpoint.config['architecture'], 'ddcl')
        history = np.random.default_rng(10).standard_normal((2, 2, 4, 4, 2))
        np.testing.assert_array_equal(forward(checkpoint.params, history, checkpoint.model()).numpy(),
            forward(self.params, history, self.model).numpy())

    def test_header(self):
        data = self._bytes()
        self.assertEqual(data[:8], b'OTFSCKPT')
        self.assertEqual(data[8:10], b'\x01\x00')

    def test_truncated(self):
        data = self._bytes()
        for cut in (5, 40, len(data) - 1):
            with self.assertRaises(CheckpointError):
                decode_checkpoint(data[:cut])

    def test_corrupt(self):
        data = bytearray(self._bytes())
        data[60] ^= 0xFF
        with self.assertRaises(CheckpointError):
            decode_checkpoint(bytes(data))

    def test_mismatched_config(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path, expect={'tau': 5})
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path, expect={'M': 8})

    def test_shape_signature(self):
        other = DdclNet(2, 2, 1, 4.0, tau=2)
        save_checkpoint(self.path, other, other.init_params(np.random.default_rng(1)))
        checkpoint = load_checkpoint(self.path)
        checkpoint.config['K'] = 2
        with self.assertRaises(CheckpointError):
            checkpoint.model()

    def test_no_training_state(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path).training_state()
