import math

import numpy as np
from django.test import SimpleTestCase

from otfslab.autodiff import ops
from otfslab.autodiff.complex import (ComplexMatrix, complex_inverse, complex_matmul,
    gauss_jordan_inverse)
from otfslab.autodiff.gradcheck import gradient_mismatches, numeric_derivative
from otfslab.autodiff.tensor import Tape, Tensor, backward
from otfslab.core.errors import DimensionError, NumericError, SingularMatrixError


def _weighted(op, shape, seed=0):
    """Reduces op's output to a scalar through fixed random weights, so the
    gradient check isn't looking at a plain sum."""
    weights = np.random.default_rng(seed + 100).uniform(-1, 1, shape)
    return lambda *xs: ops.reduce_sum(ops.multiply(op(*xs), weights))


def _conv_reference(x, w, b):
    bsz, height, width, cin = x.shape
    cout, kh, kw, _ = w.shape
    pt, pl = (kh - 1) // 2, (kw - 1) // 2
    out = np.zeros((bsz, height, width, cout))
    for n in range(bsz):
        for i in range(height):
            for j in range(width):
                for o in range(cout):
                    total = b[o]
                    for di in range(kh):
                        for dj in range(kw):
                            si, sj = i + di - pt, j + dj - pl
                            if 0 <= si < height and 0 <= sj < width:
                                for c in range(cin):
                                    total += x[n, si, sj, c] * w[o, di, dj, c]
                    out[n, i, j, o] = total
    return out


class RealOpTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_erfc_values(self):
        self.assertEqual(ops.erfc(Tensor(0.0)).item(), 1.0)
        for x in (-2.0, -0.3, 0.5, 1.7, 4.0):
            self.assertAlmostEqual(ops.erfc(Tensor(x)).item(), math.erfc(x), delta=1.5e-7)

    def test_erfc_derivative(self):
        with Tape() as tape:
            x = Tensor(0.5, requires_grad=True)
            y = ops.erfc(x)
        analytic = tape.backward(y)[x]
        numeric = numeric_derivative(lambda t: ops.erfc(t), [np.array(0.5)], 0, (), h=1e-5)
        self.assertAlmostEqual(float(analytic), -2 / math.sqrt(math.pi) * math.exp(-0.25), places=12)
        self.assertLess(abs(analytic - numeric) / abs(numeric), 1e-6)

    def test_matmul_identity(self):
        a = self.rng.normal(size=(3, 3))
        np.testing.assert_array_equal(ops.matmul(Tensor(np.eye(3)), Tensor(a)).data, a)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with self.assertRaises(DimensionError):
            ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))

    def test_non_finite_output_names_operation(self):
        with self.assertRaises(NumericError) as ctx:
            ops.reciprocal(Tensor([1.0, 0.0]))
        self.assertEqual(ctx.exception.operation, 'reciprocal')
        with self.assertRaises(NumericError) as ctx:
            ops.sqrt(Tensor([-1.0]))
        self.assertEqual(ctx.exception.operation, 'sqrt')

    def test_elementwise_gradients(self):
        shape = (3, 4)
        general = self.rng.uniform(-2, 2, shape)
        positive = self.rng.uniform(0.5, 2, shape)
        other = self.rng.uniform(-2, 2, shape)
        cases = [
            (ops.exp, [general]),
            (ops.tanh, [general]),
            (ops.sigmoid, [general]),
            (ops.relu, [general]),
            (ops.erfc, [general]),
            (ops.square, [general]),
            (ops.sqrt, [positive]),
            (ops.reciprocal, [positive]),
            (lambda t: ops.scale(t, -1.5), [general]),
            (ops.add, [general, other]),
            (ops.subtract, [general, other]),
            (ops.multiply, [general, other]),
            (lambda t: ops.transpose(t), [general]),
            (lambda t: ops.reshape(t, (4, 3)), [general]),
            (lambda t: t[1:, ::2], [general]),
        ]
        for op, inputs in cases:
            out_shape = op(*[Tensor(a) for a in inputs]).shape
            self.assertEqual(gradient_mismatches(_weighted(op, out_shape), inputs), [], op)

    def test_broadcast_gradients(self):
        a = self.rng.uniform(-2, 2, (2, 3, 4))
        b = self.rng.uniform(-2, 2, (4,))
        for op in (ops.add, ops.multiply, ops.subtract):
            self.assertEqual(gradient_mismatches(_weighted(op, (2, 3, 4)), [a, b]), [])

    def test_matmul_and_reduction_gradients(self):
        a = self.rng.uniform(-2, 2, (2, 3, 4))
        b = self.rng.uniform(-2, 2, (4, 5))
        self.assertEqual(gradient_mismatches(_weighted(ops.matmul, (2, 3, 5)), [a, b]), [])
        self.assertEqual(gradient_mismatches(
            _weighted(lambda t: ops.reduce_sum(t, axis=1), (2, 4)), [a]), [])
        self.assertEqual(gradient_mismatches(
            _weighted(lambda t: ops.prod(t, axis=-1), (2, 3)), [a]), [])

    def test_prod_gradient_with_zero_factor(self):
        x = Tensor([2.0, 0.0, 3.0], requires_grad=True)
        with Tape() as tape:
            y = ops.prod(x)
        np.testing.assert_array_equal(tape.backward(y)[x], [0.0, 6.0, 0.0])

    def test_conv2d_matches_loops(self):
        # Integer-valued inputs keep every partial sum exact
        x = self.rng.integers(-3, 4, (2, 5, 6, 2)).astype(float)
        w = self.rng.integers(-3, 4, (3, 3, 3, 2)).astype(float)
        b = self.rng.integers(-3, 4, (3,)).astype(float)
        np.testing.assert_array_equal(ops.conv2d(Tensor(x), Tensor(w), Tensor(b)).data,
                                      _conv_reference(x, w, b))

    def test_conv2d_padding(self):
        x = Tensor(np.ones((1, 5, 5, 1)))
        w = Tensor(np.ones((1, 3, 3, 1)))
        self.assertEqual(ops.conv2d(x, w, padding='valid').shape, (1, 3, 3, 1))
        self.assertEqual(ops.conv2d(x, w, padding=2).shape, (1, 7, 7, 1))
        self.assertEqual(ops.conv2d(x, w).data[0, 0, 0, 0], 4.0)

    def test_max_pool_matches_loops(self):
        x = self.rng.integers(-50, 50, (2, 5, 4, 3)).astype(float)
        out = ops.max_pool2d(Tensor(x), 2).data
        self.assertEqual(out.shape, (2, 2, 2, 3))
        for n in range(2):
            for i in range(2):
                for j in range(2):
                    for c in range(3):
                        self.assertEqual(out[n, i, j, c], x[n, 2 * i:2 * i + 2, 2 * j:2 * j + 2, c].max())

    def test_conv_pool_gradients(self):
        x = self.rng.uniform(-2, 2, (2, 4, 4, 2))
        w = self.rng.uniform(-2, 2, (2, 3, 3, 2))
        b = self.rng.uniform(-2, 2, (2,))
        self.assertEqual(gradient_mismatches(_weighted(ops.conv2d, (2, 4, 4, 2)), [x, w, b]), [])
        self.assertEqual(gradient_mismatches(
            _weighted(lambda t: ops.max_pool2d(t, 2), (2, 2, 2, 2)), [x]), [])


class ComplexOpTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def _random(self, *shape):
        return self.rng.normal(size=shape) + 1j * self.rng.normal(size=shape)

    def test_complex_matmul(self):
        b = self._random(3, 3)
        ident = ComplexMatrix.from_numpy(np.eye(3))
        np.testing.assert_array_equal(complex_matmul(ident, ComplexMatrix.from_numpy(b)).numpy(), b)

        j_eye = ComplexMatrix.from_numpy(1j * np.eye(3))
        np.testing.assert_array_equal((j_eye @ j_eye).numpy(), -np.eye(3))

        a, b = self._random(4, 4), self._random(4, 4)
        product = complex_matmul(ComplexMatrix.from_numpy(a), ComplexMatrix.from_numpy(b)).numpy()
        for i in range(4):
            for j in range(4):
                expected = sum(complex(a[i, k]) * complex(b[k, j]) for k in range(4))
                self.assertLess(abs(product[i, j] - expected), 1e-12)

    def test_complex_matmul_dimension_error(self):
        with self.assertRaises(DimensionError):
            complex_matmul(ComplexMatrix.from_numpy(np.ones((2, 3))), ComplexMatrix.from_numpy(np.ones((2, 3))))

    def test_inverse_examples(self):
        np.testing.assert_array_equal(
            complex_inverse(ComplexMatrix.from_numpy(2 * np.eye(4))).numpy(), 0.5 * np.eye(4))
        np.testing.assert_allclose(
            complex_inverse(ComplexMatrix.from_numpy(np.diag([1, 1j]))).numpy(),
            np.diag([1, -1j]), atol=1e-15)

    def test_inverse_accuracy(self):
        for n in (2, 8, 32, 64):
            a = self._random(n, n)
            inv = gauss_jordan_inverse(a)
            bound = 1e-12 * n * max(1.0, np.linalg.cond(a))
            self.assertLess(np.linalg.norm(a @ inv - np.eye(n)), bound)
            self.assertLess(np.linalg.norm(inv - np.linalg.inv(a)) / np.linalg.norm(inv), bound)

    def test_inverse_needs_row_swaps(self):
        swap = np.array([[0, 2], [3j, 0]])
        np.testing.assert_allclose(gauss_jordan_inverse(swap), [[0, -1j / 3], [0.5, 0]], atol=1e-15)
        a = np.roll(np.diag(np.arange(1, 7) * (1 + 1j)), 1, axis=0) + 0.01 * self._random(6, 6)
        self.assertLess(np.abs(a @ gauss_jordan_inverse(a) - np.eye(6)).max(), 1e-12)

    def test_inverse_scaled_identity(self):
        for scale in (2.0, 0.25, 3 - 4j):
            inv = gauss_jordan_inverse(scale * np.eye(5))
            np.testing.assert_allclose(inv, np.eye(5) / scale, atol=1e-15)

    def test_batched_inverse(self):
        a = self._random(5, 6, 6) + 4 * np.eye(6)
        inv = gauss_jordan_inverse(a)
        self.assertEqual(inv.shape, (5, 6, 6))
        self.assertLess(np.abs(np.matmul(a, inv) - np.eye(6)).max(), 1e-12)

    def test_singular_matrix(self):
        a = np.array([[1, 2, 0], [2, 4, 0], [0, 0, 1]], dtype=complex)
        with self.assertRaises(SingularMatrixError) as ctx:
            gauss_jordan_inverse(a)
        self.assertEqual(ctx.exception.pivot_index, 1)
        with self.assertRaises(SingularMatrixError):
            gauss_jordan_inverse(np.zeros((3, 3)))

    def test_inverse_gradient(self):
        a = self._random(4, 4) + 3 * np.eye(4)

        def cost(re, im):
            return complex_inverse(ComplexMatrix(re, im)).abs2().sum()
        self.assertEqual(gradient_mismatches(cost, [a.real, a.imag]), [])


class BackwardTests(SimpleTestCase):

    def test_sum_gradient_is_ones(self):
        x = Tensor(np.random.default_rng(0).normal(size=(3, 2)), requires_grad=True)
        with Tape() as tape:
            y = x.sum()
        np.testing.assert_array_equal(tape.backward(y)[x], np.ones((3, 2)))

    def test_product_rule(self):
        x = Tensor(3.0, requires_grad=True)
        y = Tensor(-2.0, requires_grad=True)
        with Tape():
            z = x * y
        grads = backward(z)
        self.assertEqual(float(grads[x]), -2.0)
        self.assertEqual(float(grads[y]), 3.0)

    def test_unreached_leaf_gets_zero(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        unused = Tensor([[5.0]], requires_grad=True)
        with Tape() as tape:
            y = ops.square(x).sum()
        grads = tape.backward(y, leaves=[x, unused])
        np.testing.assert_array_equal(grads[unused], [[0.0]])
        np.testing.assert_array_equal(grads[x], [2.0, 4.0])

    def test_non_scalar_root(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            y = ops.scale(x, 2.0)
        with self.assertRaises(DimensionError):
            tape.backward(y)

    def test_reused_node_accumulates(self):
        x = Tensor(2.0, requires_grad=True)
        with Tape() as tape:
            y = x * x + x
        self.assertEqual(float(tape.backward(y)[x]), 5.0)

    def test_no_tape_records_nothing(self):
        x = Tensor(1.0, requires_grad=True)
        y = ops.exp(x)
        self.assertIsNone(y.node_id)

    def test_replay_is_bitwise_identical(self):
        def run():
            rng = np.random.default_rng(3)
            w = Tensor(rng.normal(size=(4, 4)), requires_grad=True)
            x = Tensor(rng.normal(size=(2, 4, 4)))
            with Tape() as tape:
                y = ops.tanh(ops.matmul(x, w)).sum()
            return y.data.copy(), tape.backward(y)[w]
        first, second = run(), run()
        self.assertEqual(first[0].tobytes(), second[0].tobytes())
        self.assertEqual(first[1].tobytes(), second[1].tobytes())
