import numpy as np
from django.test import SimpleTestCase
from scipy import special, stats

from otfslab.autodiff.complex import ComplexMatrix
from otfslab.autodiff.gradcheck import gradient_mismatches
from otfslab.autodiff.tensor import Tensor
from otfslab.channel.matrices import build_dd_channel
from otfslab.channel.paths import ChannelConfig, init_paths
from otfslab.core.errors import ConfigurationError, SingularMatrixError
from otfslab.core.utils import snr_to_noise_variance
from otfslab.link.analytics import (MMSE, NEAREST_NEIGHBOUR, ZF, analytic_fer, build_equalizer,
    fer_from_sers, identity_precoder, link_metrics, reliability, ser_coefficients, ser_from_sinr,
    sinr_per_symbol, zero_sinr_fer)
from otfslab.link.montecarlo import (TrialJob, TrialSpec, count_errors, monte_carlo_fer, run_trials,
    simulate_frame, wilson_interval)
from otfslab.link.objective import frame_error_rate, mean_frame_error_rate


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(rng, n):
    q, r = np.linalg.qr(random_complex(rng, n, n))
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


class SerTests(SimpleTestCase):

    def test_coefficients(self):
        np.testing.assert_allclose(ser_coefficients(4), (0.5, 1.5))
        np.testing.assert_allclose(ser_coefficients(16), (0.375, 0.5))
        np.testing.assert_allclose(ser_coefficients(4, NEAREST_NEIGHBOUR), (1.0, 0.5))
        np.testing.assert_allclose(ser_coefficients(16, NEAREST_NEIGHBOUR), (1.5, 0.1))

    def test_bad_order_or_rule(self):
        with self.assertRaises(ConfigurationError):
            ser_coefficients(8)
        with self.assertRaises(ConfigurationError):
            ser_coefficients(4, 'exact')

    def test_zero_sinr(self):
        self.assertAlmostEqual(float(ser_from_sinr(0.0, 4)), 0.5, places=12)
        self.assertAlmostEqual(float(ser_from_sinr(0.0, 16, NEAREST_NEIGHBOUR)), 1 - 1 / 16.0, places=12)
        self.assertAlmostEqual(zero_sinr_fer(32, 4), 1 - 0.5 ** 32)
        self.assertAlmostEqual(zero_sinr_fer(2, 4, NEAREST_NEIGHBOUR), 1 - 0.25 ** 2)

    def test_nearest_neighbour_is_per_axis(self):
        # QPSK: each axis flips with probability Q(sqrt(SINR))
        sinr = np.array([0.5, 2.0, 10.0])
        axis = stats.norm.sf(np.sqrt(sinr))
        np.testing.assert_allclose(ser_from_sinr(sinr, 4, NEAREST_NEIGHBOUR), 1 - (1 - axis) ** 2, rtol=1e-12)

    def test_monotone_in_sinr(self):
        sers = ser_from_sinr(np.linspace(0, 50, 200), 16)
        self.assertTrue(np.all(np.diff(sers) <= 0))

    def test_fer_from_sers(self):
        self.assertEqual(fer_from_sers([0.0, 0.0, 0.0]), 0.0)
        self.assertAlmostEqual(fer_from_sers([0.1, 0.2]), 0.28, places=15)
        self.assertEqual(fer_from_sers([0.3, 1.0]), 1.0)

    def test_reliability(self):
        self.assertAlmostEqual(reliability(1e-9), 99.9999999)


class EqualizerTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(21)

    def test_identity_examples(self):
        eye = np.eye(4)
        np.testing.assert_allclose(build_equalizer(eye, eye, 1.0, ZF), eye, atol=1e-15)
        np.testing.assert_allclose(build_equalizer(eye, eye, 1.0, MMSE), 0.5 * eye, atol=1e-15)
        np.testing.assert_allclose(build_equalizer(eye, eye, 1.0, 'mmse'), 0.5 * eye, atol=1e-15)

    def test_zero_forcing_property(self):
        h = random_complex(self.rng, 8, 8)
        p = random_complex(self.rng, 8, 4)
        e = build_equalizer(p, h, 0.3, ZF)
        self.assertEqual(e.shape, (4, 8))
        np.testing.assert_allclose(e @ h @ p, np.eye(4), atol=1e-9)

    def test_zero_forcing_singular(self):
        with self.assertRaises(SingularMatrixError):
            build_equalizer(np.eye(4), np.zeros((4, 4)), 0.1, ZF)

    def test_bad_kind(self):
        with self.assertRaises(ConfigurationError):
            build_equalizer(np.eye(2), np.eye(2), 0.1, 2)

    def test_identity_precoder(self):
        p = identity_precoder(32, 16, 32.0)
        self.assertAlmostEqual(np.sum(np.abs(p) ** 2), 32.0)
        np.testing.assert_array_equal(identity_precoder(32, 32, 32.0), np.eye(32))
        with self.assertRaises(ConfigurationError):
            identity_precoder(4, 5, 4.0)


class SinrTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(22)

    def test_identity_link(self):
        eye = np.eye(4)
        e = build_equalizer(eye, eye, 0.1, ZF)
        np.testing.assert_allclose(sinr_per_symbol(e, eye, eye, 0.1), 10.0)
        np.testing.assert_array_equal(sinr_per_symbol(e, eye, eye, 0.0), 1e12)

    def test_scalar_loop_oracle(self):
        h = random_complex(self.rng, 8, 8)
        h_est = h + 0.1 * random_complex(self.rng, 8, 8)
        p = random_complex(self.rng, 8, 4)
        variance = 0.2
        e = build_equalizer(p, h_est, variance, MMSE)
        g = e @ h @ p
        expected = []
        for k in range(4):
            interference = sum(abs(g[k, j]) ** 2 for j in range(4) if j != k)
            noise = variance * sum(abs(e[k, i]) ** 2 for i in range(8))
            expected.append(abs(g[k, k]) ** 2 / (interference + noise))
        np.testing.assert_allclose(sinr_per_symbol(e, h, p, variance), expected, rtol=1e-12)

    def test_zf_power_scaling(self):
        h = random_complex(self.rng, 8, 8)
        p = random_complex(self.rng, 8, 4)
        base = sinr_per_symbol(build_equalizer(p, h, 0.1, ZF), h, p, 0.1)
        scaled = sinr_per_symbol(build_equalizer(0.6 * p, h, 0.1, ZF), h, 0.6 * p, 0.1)
        np.testing.assert_allclose(scaled, 0.36 * base, rtol=1e-9)


class AnalyticFerTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(23)
        self.cfg = ChannelConfig()

    def test_identity_link_value(self):
        eye = np.eye(4)
        expected = 1 - (1 - 0.5 * special.erfc(np.sqrt(15))) ** 4
        self.assertAlmostEqual(float(analytic_fer(eye, eye, eye, 0.1, 4, ZF)), expected, delta=1e-14)

    def test_monotone_in_noise(self):
        h = build_dd_channel(init_paths(self.cfg, self.rng), 8, 4)
        p = identity_precoder(32, 32, 32.0)
        fers = [float(analytic_fer(h, h, p, v, 4, MMSE)) for v in np.logspace(-3, 0, 10)]
        self.assertTrue(np.all(np.diff(fers) >= 0))

    def test_mmse_dominates_zf(self):
        p = identity_precoder(32, 32, 32.0)
        h = np.stack([build_dd_channel(init_paths(self.cfg, self.rng), 8, 4) for _ in range(500)])
        for snr in range(0, 35, 5):
            variance = snr_to_noise_variance(snr, 32.0, 32)
            for rule in (None, NEAREST_NEIGHBOUR):
                mmse = analytic_fer(h, h, p, variance, 4, MMSE, rule)
                zf = analytic_fer(h, h, p, variance, 4, ZF, rule)
                self.assertEqual(mmse.shape, (500,))
                self.assertTrue(np.all(mmse <= zf + 1e-12))

    def test_unitary_rotation(self):
        h = random_complex(self.rng, 8, 8)
        h_est = h + 0.05 * random_complex(self.rng, 8, 8)
        p = random_complex(self.rng, 8, 4)
        u = random_unitary(self.rng, 8)
        for kind in (ZF, MMSE):
            self.assertAlmostEqual(float(analytic_fer(u @ h, u @ h_est, p, 0.5, 4, kind)),
                float(analytic_fer(h, h_est, p, 0.5, 4, kind)), delta=1e-10)

    def test_batched(self):
        h = random_complex(self.rng, 3, 8, 8)
        p = random_complex(self.rng, 8, 4)
        metrics = link_metrics(h, h, p, 0.5, 4, MMSE)
        self.assertEqual(metrics.sinr.shape, (3, 4))
        self.assertEqual(metrics.fer.shape, (3,))
        self.assertAlmostEqual(metrics.fer[1], float(analytic_fer(h[1], h[1], p, 0.5, 4, MMSE)), delta=1e-15)


class ObjectiveTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(24)

    def test_matches_numpy(self):
        h = random_complex(self.rng, 5, 8, 8)
        h_est = h + 0.1 * random_complex(self.rng, 5, 8, 8)
        p = random_complex(self.rng, 5, 8, 4)
        for kind in (ZF, MMSE):
            for rule in (None, NEAREST_NEIGHBOUR):
                taped = frame_error_rate(h, h_est, ComplexMatrix.from_numpy(p), 0.7, 4, kind, rule)
                np.testing.assert_allclose(taped.numpy(), analytic_fer(h, h_est, p, 0.7, 4, kind, rule),
                    atol=1e-12)

    def test_gradient(self):
        h = random_complex(self.rng, 4, 4)
        h_est = h + 0.1 * random_complex(self.rng, 4, 4)
        p = random_complex(self.rng, 4, 2)

        def cost(re, im):
            return mean_frame_error_rate(h, h_est, ComplexMatrix(re, im), 0.5, 4, MMSE)
        self.assertEqual(gradient_mismatches(cost, [p.real, p.imag]), [])

    def test_zf_gradient(self):
        h = random_complex(self.rng, 4, 4)
        p = random_complex(self.rng, 4, 2)

        def cost(re, im):
            return mean_frame_error_rate(h, h, ComplexMatrix(re, im), 0.5, 16, ZF)
        self.assertEqual(gradient_mismatches(cost, [p.real, p.imag]), [])

    def test_scalar_result(self):
        eye = np.eye(4)
        cost = mean_frame_error_rate(eye, eye, ComplexMatrix.from_numpy(eye), 0.1, 4, ZF)
        self.assertIsInstance(cost, Tensor)
        self.assertEqual(cost.shape, ())


class MonteCarloTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(25)

    def test_noiseless_zero_forcing(self):
        h = build_dd_channel(init_paths(ChannelConfig(), self.rng), 8, 4)
        for order in (4, 16, 64):
            spec = TrialSpec(h, h, identity_precoder(32, 32, 32.0), 0.0, order, ZF)
            result = count_errors(spec, 200, self.rng)
            self.assertEqual((result.frame_errors, result.symbol_errors, result.bit_errors), (0, 0, 0))
            outcome = simulate_frame(spec, self.rng)
            self.assertFalse(outcome.frame_error)
            self.assertEqual(len(outcome.decoded), 32)

    def test_replay(self):
        eye = np.eye(4)
        spec = TrialSpec(eye, eye, eye, 0.5, 4, MMSE)
        a = [simulate_frame(spec, np.random.default_rng(9)) for _ in range(3)]
        b = [simulate_frame(spec, np.random.default_rng(9)) for _ in range(3)]
        self.assertEqual([o.symbol_errors for o in a], [o.symbol_errors for o in b])
        np.testing.assert_array_equal(a[0].decoded, b[0].decoded)

    def test_matches_analytic(self):
        eye = np.eye(4)
        for kind in (ZF, MMSE):
            spec = TrialSpec(eye, eye, eye, 0.1, 4, kind)
            expected = float(analytic_fer(eye, eye, eye, 0.1, 4, kind, NEAREST_NEIGHBOUR))
            estimate, half, result = monte_carlo_fer(spec, 100000, seed=1)
            sigma = np.sqrt(expected * (1 - expected) / result.frames)
            self.assertLessEqual(abs(estimate - expected), 3 * sigma)
            self.assertGreater(half, 0)
            self.assertLess(result.ber, result.ser)

    def test_mmse_decisions_are_rescaled(self):
        # 16-QAM outer points only survive MMSE shrinkage after the gain correction
        eye = np.eye(4)
        spec = TrialSpec(eye, eye, eye, 0.05, 16, MMSE)
        expected = float(analytic_fer(eye, eye, eye, 0.05, 16, MMSE, NEAREST_NEIGHBOUR))
        estimate, _, result = monte_carlo_fer(spec, 50000, seed=4)
        sigma = np.sqrt(expected * (1 - expected) / result.frames)
        self.assertLessEqual(abs(estimate - expected), 3 * sigma)

    def test_singular_zero_forcing_counts_errors(self):
        spec = TrialSpec(np.zeros((4, 4)), np.zeros((4, 4)), np.eye(4), 0.1, 4, ZF)
        result = count_errors(spec, 10, self.rng)
        self.assertEqual(result.frame_errors, 10)
        self.assertEqual(result.singular_frames, 10)
        with self.assertRaises(SingularMatrixError):
            simulate_frame(spec, self.rng)

    def test_worker_count_independent(self):
        eye = np.eye(4)
        jobs = [TrialJob(TrialSpec(eye, eye, eye, v, 4, MMSE), 5000, 7, (i,))
            for i, v in enumerate((0.3, 0.5))]
        serial = run_trials(jobs, workers=1, chunk_size=1000)
        pooled = run_trials(jobs, workers=3, chunk_size=1000)
        self.assertEqual(serial, pooled)
        self.assertEqual(serial[0].frames, 5000)

    def test_wilson(self):
        interval = wilson_interval(0, 1000)
        self.assertEqual(interval.estimate, 0)
        self.assertGreater(interval.upper, 0)
        coin = int(np.random.default_rng(3).integers(0, 2, 10000).sum())
        interval = wilson_interval(coin, 10000)
        self.assertAlmostEqual(interval.estimate, 0.5, delta=0.015)
        self.assertLessEqual(interval.lower, interval.estimate)
        self.assertGreaterEqual(interval.upper, interval.estimate)
        with self.assertRaises(ValueError):
            wilson_interval(0, 0)
