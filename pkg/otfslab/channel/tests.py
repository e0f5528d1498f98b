import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from otfslab.channel.matrices import (build_dd_channel, build_time_channel, cyclic_shift,
    doppler_phases, estimate_channel, generate_trajectory)
from otfslab.channel.paths import ChannelConfig, PathState, evolve, init_paths, path_sequence
from otfslab.channel.storage import generate_dataset, load_dataset
from otfslab.core.errors import ConfigurationError, DatasetFormatError
from otfslab.core.utils import rng_stream
from otfslab.modem.transforms import apply_channel, dd_to_time, time_to_dd


def symbolwise_received(paths, s):
    """r[i] = sum_p h_p exp(j2pi k_p (i - l_p)/MN) s[(i - l_p) mod MN], one
    entry at a time."""
    mn = len(s)
    r = np.zeros(mn, dtype=complex)
    for i in range(mn):
        for delay, doppler, gain in zip(paths.delays, paths.dopplers, paths.gains):
            r[i] += gain * np.exp(2j * np.pi * doppler * (i - delay) / mn) * s[(i - delay) % mn]
    return r


class ChannelConfigTests(SimpleTestCase):

    def test_defaults(self):
        cfg = ChannelConfig()
        self.assertEqual(cfg.mn, 32)
        self.assertEqual(cfg.innovation_variance, 0.25)

    def test_validation(self):
        for bad in ({'m': 0}, {'max_delay': 32}, {'rho': 1.5}, {'offset_bound': -1}, {'nmse': -0.1}):
            with self.assertRaises(ConfigurationError):
                ChannelConfig(**bad)

    def test_dict_round_trip(self):
        cfg = ChannelConfig(m=4, n=2, rho=0.5)
        self.assertEqual(ChannelConfig.from_dict(cfg.to_dict()), cfg)
        self.assertEqual(cfg.replace(nmse=0).nmse, 0)


class PathTests(SimpleTestCase):

    def setUp(self):
        self.cfg = ChannelConfig()
        self.rng = np.random.default_rng(11)

    def test_init_ranges(self):
        for _ in range(200):
            paths = init_paths(self.cfg, self.rng)
            self.assertEqual(len(paths), 4)
            self.assertTrue(np.all((paths.delays >= 0) & (paths.delays <= 5)))
            self.assertTrue(np.all(np.abs(paths.dopplers) <= 2))

    def test_degenerate_support(self):
        paths = init_paths(self.cfg.replace(max_delay=0, max_doppler=0), self.rng)
        np.testing.assert_array_equal(paths.delays, 0)
        np.testing.assert_array_equal(paths.dopplers, 0)

    def test_gain_power(self):
        total = np.mean([np.sum(np.abs(init_paths(self.cfg, self.rng).gains) ** 2)
            for _ in range(100000)])
        self.assertAlmostEqual(total, 1.0, delta=0.01)

    def test_frozen_gains(self):
        paths = init_paths(self.cfg, self.rng)
        nxt = evolve(paths, self.cfg.replace(rho=1.0), self.rng)
        np.testing.assert_array_equal(nxt.gains, paths.gains)

    def test_zero_offsets(self):
        paths = init_paths(self.cfg, self.rng)
        nxt = evolve(paths, self.cfg.replace(offset_bound=0.0), self.rng)
        np.testing.assert_array_equal(nxt.delays, paths.delays)
        np.testing.assert_array_equal(nxt.dopplers, paths.dopplers)

    def test_uncorrelated_gains(self):
        cfg = self.cfg.replace(rho=0.0)
        paths = init_paths(cfg, self.rng)
        gains = [paths.gains]
        for _ in range(100000):
            paths = evolve(paths, cfg, self.rng)
            gains.append(paths.gains)
        gains = np.array(gains)
        lag1 = np.sum(gains[1:] * gains[:-1].conj()) / np.sum(np.abs(gains[:-1]) ** 2)
        self.assertLess(abs(lag1), 0.01)

    def test_clamped_drift(self):
        cfg = self.cfg.replace(offset_bound=3.0)
        for paths in path_sequence(cfg, 500, self.rng):
            self.assertTrue(np.all((paths.delays >= 0) & (paths.delays <= cfg.max_delay)))
            self.assertTrue(np.all(np.abs(paths.dopplers) <= cfg.max_doppler))

    def test_path_sequence_needs_a_frame(self):
        with self.assertRaises(ConfigurationError):
            path_sequence(self.cfg, 0, self.rng)


class ChannelMatrixTests(SimpleTestCase):

    def setUp(self):
        self.cfg = ChannelConfig()
        self.rng = np.random.default_rng(12)

    def test_single_path_identity(self):
        paths = PathState([0], [0.0], [1.0])
        np.testing.assert_array_equal(build_time_channel(paths, 8, 4), np.eye(32))
        np.testing.assert_allclose(build_dd_channel(paths, 8, 4), np.eye(32), atol=1e-12)

    def test_single_path_shift(self):
        paths = PathState([1], [0.0], [1.0])
        expected = np.array([[0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]])
        np.testing.assert_array_equal(build_time_channel(paths, 2, 2), expected)

    def test_shift_and_phase_structure(self):
        shift = cyclic_shift(32, 1)
        np.testing.assert_array_equal(np.linalg.matrix_power(shift, 32), np.eye(32))
        np.testing.assert_allclose(np.abs(doppler_phases(32, 1.37)), 1.0, atol=1e-15)

    def test_symbolwise_oracle(self):
        for _ in range(20):
            paths = init_paths(self.cfg, self.rng)
            s = self.rng.standard_normal(32) + 1j * self.rng.standard_normal(32)
            h_t = build_time_channel(paths, 8, 4)
            np.testing.assert_allclose(h_t @ s, symbolwise_received(paths, s), atol=1e-12)
            np.testing.assert_allclose(apply_channel(h_t, s, 0.0), symbolwise_received(paths, s), atol=1e-12)

    def test_frobenius_norm_preserved(self):
        paths = init_paths(self.cfg, self.rng)
        self.assertAlmostEqual(np.linalg.norm(build_dd_channel(paths, 8, 4)),
            np.linalg.norm(build_time_channel(paths, 8, 4)), delta=1e-10)

    def test_integer_doppler_sparsity(self):
        for _ in range(20):
            paths = init_paths(self.cfg, self.rng)
            paths = PathState(paths.delays, np.round(paths.dopplers), paths.gains)
            nonzero = np.sum(np.abs(build_dd_channel(paths, 8, 4)) > 1e-10, axis=1)
            self.assertTrue(np.all(nonzero <= 4))

    def test_pipeline_oracle(self):
        """H_DD column i is time_to_dd(H_T dd_to_time(e_i)), with fractional Doppler."""
        eye = np.eye(32)
        for _ in range(100):
            paths = init_paths(self.cfg, self.rng)
            h_t = build_time_channel(paths, 8, 4)
            composed = time_to_dd(h_t @ dd_to_time(eye, 8, 4), 8, 4)
            np.testing.assert_allclose(build_dd_channel(paths, 8, 4), composed, atol=1e-10)

    def test_estimate_exact_and_zero(self):
        h = build_dd_channel(init_paths(self.cfg, self.rng), 8, 4)
        np.testing.assert_array_equal(estimate_channel(h, 0.0, self.rng), h)
        np.testing.assert_array_equal(estimate_channel(np.zeros((32, 32)), 0.01, self.rng), 0)
        with self.assertRaises(ConfigurationError):
            estimate_channel(h, -1, self.rng)

    def test_estimate_nmse(self):
        h = build_dd_channel(init_paths(self.cfg, self.rng), 8, 4)
        power = np.sum(np.abs(h) ** 2)
        ratios = [np.sum(np.abs(estimate_channel(h, 0.01, self.rng) - h) ** 2) / power
            for _ in range(10000)]
        self.assertAlmostEqual(np.mean(ratios), 0.01, delta=0.001)


class TrajectoryTests(SimpleTestCase):

    def setUp(self):
        self.cfg = ChannelConfig()

    def test_history_and_target(self):
        traj = generate_trajectory(self.cfg, 6, rng_stream(1, 0))
        self.assertEqual(len(traj), 6)
        self.assertEqual(traj.history(5, 5).shape, (5, 32, 32))
        np.testing.assert_array_equal(traj.history(5, 5)[-1], traj.estimates[4])
        with self.assertRaises(ConfigurationError):
            traj.history(5, 4)

    def test_frozen_channel(self):
        cfg = self.cfg.replace(offset_bound=0.0, rho=1.0, nmse=0.0)
        traj = generate_trajectory(cfg, 6, rng_stream(1, 0))
        for h, h_est in zip(traj.true_channels, traj.estimates):
            np.testing.assert_array_equal(h, traj.true_channels[0])
            np.testing.assert_array_equal(h_est, traj.true_channels[0])

    def test_replay(self):
        a = generate_trajectory(self.cfg, 6, rng_stream(3, 9), rng_stream(3, 9, 1))
        b = generate_trajectory(self.cfg, 6, rng_stream(3, 9), rng_stream(3, 9, 1))
        np.testing.assert_array_equal(a.true_channels, b.true_channels)
        np.testing.assert_array_equal(a.estimates, b.estimates)


class DatasetTests(SimpleTestCase):

    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.dir.cleanup)
        self.cfg = ChannelConfig(m=4, n=2, max_delay=3, max_doppler=1)

    def _path(self, name):
        return os.path.join(self.dir.name, name)

    def test_round_trip(self):
        dataset = generate_dataset(self.cfg, 5, 10, 6)
        dataset.save(self._path('a.jsonl'))
        loaded = load_dataset(self._path('a.jsonl'))
        self.assertEqual(len(loaded), 10)
        self.assertEqual(loaded.cfg, self.cfg)
        self.assertEqual(loaded.records, dataset.records)
        np.testing.assert_array_equal(loaded.trajectory(3).estimates, dataset.trajectory(3).estimates)
        np.testing.assert_array_equal(loaded.trajectory(3).true_channels, dataset.trajectory(3).true_channels)

    def test_byte_identical(self):
        generate_dataset(self.cfg, 5, 10, 6).save(self._path('a.jsonl'))
        generate_dataset(self.cfg, 5, 10, 6).save(self._path('b.jsonl'))
        with open(self._path('a.jsonl'), 'rb') as a, open(self._path('b.jsonl'), 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_truncated(self):
        generate_dataset(self.cfg, 5, 10, 6).save(self._path('a.jsonl'))
        with open(self._path('a.jsonl')) as f:
            lines = f.readlines()
        with open(self._path('cut.jsonl'), 'w') as f:
            f.writelines(lines[:-3])
        with self.assertRaises(DatasetFormatError):
            load_dataset(self._path('cut.jsonl'))

    def test_bad_version(self):
        with open(self._path('v.jsonl'), 'w') as f:
            f.write('{"format":"otfslab-trajectories","version":99}\n')
        with self.assertRaises(DatasetFormatError):
            load_dataset(self._path('v.jsonl'))

    def test_not_a_dataset(self):
        with open(self._path('x.jsonl'), 'w') as f:
            f.write('hello\n')
        with self.assertRaises(DatasetFormatError):
            load_dataset(self._path('x.jsonl'))
