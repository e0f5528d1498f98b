import numpy as np
from django.test import SimpleTestCase

from otfslab.core.errors import ConfigurationError, DimensionError
from otfslab.modem.qam import Constellation
from otfslab.modem.transforms import (apply_channel, dd_to_time, dd_to_time_matrix, isfft, sfft,
    time_to_dd, time_to_dd_matrix, unvectorize, vectorize)


class TransformTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def _random_grid(self, m, n):
        return self.rng.standard_normal((m, n)) + 1j * self.rng.standard_normal((m, n))

    def test_isfft_inverse(self):
        x = self._random_grid(8, 4)
        np.testing.assert_allclose(sfft(isfft(x)), x, atol=1e-12)
        self.assertAlmostEqual(np.linalg.norm(isfft(x)), np.linalg.norm(x), delta=1e-12)

    def test_isfft_all_ones(self):
        np.testing.assert_allclose(isfft(np.ones((2, 2))), [[2, 0], [0, 0]], atol=1e-15)

    def test_isfft_against_double_sum(self):
        m, n = 3, 4
        x = self._random_grid(m, n)
        expected = np.zeros((m, n), dtype=complex)
        for mm in range(m):
            for nn in range(n):
                for k in range(n):
                    for l in range(m):
                        expected[mm, nn] += x[l, k] * np.exp(2j * np.pi * (nn * k / n - mm * l / m))
        np.testing.assert_allclose(isfft(x), expected / np.sqrt(m * n), atol=1e-12)

    def test_isfft_wants_a_grid(self):
        with self.assertRaises(DimensionError):
            isfft(np.ones(4))

    def test_vectorization_is_column_major(self):
        grid = np.arange(6).reshape(2, 3)
        np.testing.assert_array_equal(vectorize(grid), [0, 3, 1, 4, 2, 5])
        np.testing.assert_array_equal(unvectorize(vectorize(grid), 2, 3), grid)

    def test_dd_to_time_examples(self):
        e1 = np.array([1, 0, 0, 0])
        expected = np.array([1, 0, 1, 0]) / np.sqrt(2)
        np.testing.assert_allclose(dd_to_time(e1, 2, 2), expected, atol=1e-15)
        np.testing.assert_allclose(time_to_dd(expected, 2, 2), e1, atol=1e-15)
        x = self.rng.standard_normal(5) + 1j * self.rng.standard_normal(5)
        np.testing.assert_allclose(dd_to_time(x, 5, 1), x, atol=1e-15)

    def test_dd_to_time_matches_kronecker(self):
        m, n = 8, 4
        x = self.rng.standard_normal((m * n, 3)) + 1j * self.rng.standard_normal((m * n, 3))
        np.testing.assert_allclose(dd_to_time(x, m, n), dd_to_time_matrix(m, n) @ x, atol=1e-12)
        np.testing.assert_allclose(time_to_dd(x, m, n), time_to_dd_matrix(m, n) @ x, atol=1e-12)
        np.testing.assert_allclose(time_to_dd(dd_to_time(x, m, n), m, n), x, atol=1e-12)

    def test_transforms_are_unitary(self):
        m, n = 8, 4
        for matrix in (dd_to_time_matrix(m, n), time_to_dd_matrix(m, n)):
            np.testing.assert_allclose(matrix.conj().T @ matrix, np.eye(m * n), atol=1e-12)
        x = self.rng.standard_normal(m * n) + 1j * self.rng.standard_normal(m * n)
        self.assertAlmostEqual(np.linalg.norm(dd_to_time(x, m, n)) / np.linalg.norm(x), 1.0, delta=1e-12)

    def test_dd_to_time_length_check(self):
        with self.assertRaises(DimensionError):
            dd_to_time(np.ones(7), 2, 4)
        with self.assertRaises(DimensionError):
            time_to_dd(np.ones(7), 2, 4)

    def test_apply_channel_noiseless(self):
        s = self.rng.standard_normal(16) + 1j * self.rng.standard_normal(16)
        np.testing.assert_array_equal(apply_channel(np.eye(16), s, 0.0), s)

    def test_apply_channel_noise_power(self):
        mn, variance, draws = 32, 0.5, 10000
        r = apply_channel(np.eye(mn), np.zeros((mn, draws)), variance, self.rng)
        power = np.mean(np.sum(np.abs(r) ** 2, axis=0))
        self.assertAlmostEqual(power / (mn * variance), 1.0, delta=0.02)

    def test_apply_channel_rejects_negative_variance(self):
        with self.assertRaises(ValueError):
            apply_channel(np.eye(2), np.ones(2), -1.0)


class ConstellationTests(SimpleTestCase):

    def test_qpsk_labeling(self):
        qpsk = Constellation(4)
        np.testing.assert_allclose(qpsk.modulate([0, 0]), [(1 + 1j) / np.sqrt(2)])
        np.testing.assert_allclose(qpsk.modulate([0, 1, 1, 0, 1, 1]),
            np.array([1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2))

    def test_unit_mean_energy(self):
        for order in (4, 16, 64):
            points = Constellation(order).points
            self.assertEqual(len(set(points)), order)
            self.assertAlmostEqual(np.mean(np.abs(points) ** 2), 1.0, delta=1e-12)

    def test_gray_adjacency(self):
        for order in (4, 16, 64):
            const = Constellation(order)
            step = 2 * const.scale
            for a in range(order):
                for b in range(a + 1, order):
                    d = const.points[a] - const.points[b]
                    neighbours = (abs(abs(d.real) - step) < 1e-9 and abs(d.imag) < 1e-9) or \
                        (abs(abs(d.imag) - step) < 1e-9 and abs(d.real) < 1e-9)
                    if neighbours:
                        self.assertEqual(bin(a ^ b).count('1'), 1, "%d-QAM labels %d, %d" % (order, a, b))

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for order in (4, 16, 64):
            const = Constellation(order)
            bits, decisions = const.demodulate(const.points)
            np.testing.assert_array_equal(decisions, const.points)
            np.testing.assert_array_equal(const.bits_to_labels(bits), np.arange(order))
            payload = rng.integers(0, 2, size=const.bits_per_symbol * 50)
            np.testing.assert_array_equal(const.demodulate(const.modulate(payload))[0], payload)

    def test_nearest_point_decisions(self):
        const = Constellation(16)
        rng = np.random.default_rng(5)
        received = rng.uniform(-1.5, 1.5, 200) + 1j * rng.uniform(-1.5, 1.5, 200)
        _, decisions = const.demodulate(received)
        brute = const.points[np.argmin(np.abs(received[:, None] - const.points[None, :]), axis=1)]
        np.testing.assert_allclose(decisions, brute)

    def test_bad_order(self):
        with self.assertRaises(ConfigurationError):
            Constellation(8)

    def test_bit_count_must_fill_symbols(self):
        with self.assertRaises(DimensionError):
            Constellation(16).modulate([0, 1, 0])

    def test_labeling_table(self):
        table = Constellation(4).labeling_table()
        self.assertEqual([bits for bits, _ in table], ['00', '01', '10', '11'])
        self.assertAlmostEqual(table[3][1], (-1 - 1j) / np.sqrt(2))
