#!/usr/bin/env python3

# pylint: disable=missing-docstring
import unittest

import icontract
import numpy as np

from qocr import tensor
from qocr.errors import DimensionError, InvalidArgumentError


class TestMatmul(unittest.TestCase):
    def test_two_by_two(self) -> None:
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[5.0, 6.0], [7.0, 8.0]])
        self.assertListEqual([[19.0, 22.0], [43.0, 50.0]], tensor.matmul(a, b).tolist())

    def test_identity(self) -> None:
        stream = np.random.RandomState(0)
        a = stream.randn(4, 3)
        np.testing.assert_array_equal(a, tensor.matmul(a, np.eye(3)))

    def test_against_explicit_sum(self) -> None:
        stream = np.random.RandomState(1)
        a = stream.randn(3, 5)
        b = stream.randn(5, 2)

        expected = np.zeros((3, 2))
        for i in range(3):
            for j in range(2):
                expected[i, j] = sum(a[i, k] * b[k, j] for k in range(5))

        np.testing.assert_allclose(expected, tensor.matmul(a, b), rtol=1e-12)

    def test_identity_on_both_sides(self) -> None:
        stream = np.random.RandomState(2)
        for _ in range(20):
            rows, columns = stream.randint(1, 6, size=2)
            x = stream.uniform(-10.0, 10.0, size=(rows, columns))

            np.testing.assert_array_equal(x, tensor.matmul(np.eye(rows), x))
            np.testing.assert_array_equal(x, tensor.matmul(x, np.eye(columns)))

    def test_distributive(self) -> None:
        stream = np.random.RandomState(3)
        for _ in range(50):
            m, k, n = stream.randint(1, 4, size=3)
            a = stream.uniform(-10.0, 10.0, size=(m, k))
            b = stream.uniform(-10.0, 10.0, size=(k, n))
            c = stream.uniform(-10.0, 10.0, size=(k, n))

            left = tensor.matmul(a, tensor.elementwise(b, c, tensor.ElementwiseOp.ADD))
            right = tensor.elementwise(tensor.matmul(a, b), tensor.matmul(a, c), tensor.ElementwiseOp.ADD)
            np.testing.assert_allclose(left, right, rtol=0.0, atol=1e-12)

    def test_zero_matrix(self) -> None:
        b = np.random.RandomState(4).randn(3, 2)
        result = tensor.matmul(tensor.zeros((2, 3)), b)

        self.assertEqual((2, 2), result.shape)
        self.assertListEqual([[0.0, 0.0], [0.0, 0.0]], result.tolist())

    def test_zero_sized(self) -> None:
        self.assertEqual((0, 2), tensor.matmul(np.zeros((0, 3)), np.ones((3, 2))).shape)
        self.assertListEqual([[0.0, 0.0]], tensor.matmul(np.zeros((1, 0)), np.zeros((0, 2))).tolist())

        with self.assertRaises(icontract.ViolationError):
            tensor.zeros((0, 3))

    def test_mismatch_names_both_shapes(self) -> None:
        with self.assertRaises(DimensionError) as ctx:
            tensor.matmul(np.zeros((2, 3)), np.zeros((2, 3)))

        self.assertIn("[2, 3]", str(ctx.exception))
        self.assertEqual("dimension", ctx.exception.as_mapping()['identifier'])


class TestElementwise(unittest.TestCase):
    def test_same_shape(self) -> None:
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[10.0, 20.0], [30.0, 40.0]])

        self.assertListEqual([[11.0, 22.0], [33.0, 44.0]], tensor.elementwise(a, b, tensor.ElementwiseOp.ADD).tolist())
        self.assertListEqual([[-9.0, -18.0], [-27.0, -36.0]],
                             tensor.elementwise(a, b, tensor.ElementwiseOp.SUB).tolist())
        self.assertListEqual([[10.0, 40.0], [90.0, 160.0]], tensor.elementwise(a, b, tensor.ElementwiseOp.MUL).tolist())

    def test_bias_along_last_axis(self) -> None:
        a = np.zeros((2, 3, 4))
        bias = np.arange(4, dtype=np.float64)

        result = tensor.elementwise(a, bias, tensor.ElementwiseOp.ADD)
        for i in range(2):
            for j in range(3):
                self.assertListEqual([0.0, 1.0, 2.0, 3.0], result[i, j].tolist())

    def test_mismatch(self) -> None:
        with self.assertRaises(DimensionError):
            tensor.elementwise(np.zeros((2, 3)), np.zeros((3, 2)), tensor.ElementwiseOp.ADD)

        with self.assertRaises(DimensionError):
            tensor.elementwise(np.zeros((2, 3)), np.zeros(2), tensor.ElementwiseOp.ADD)


class TestReduce(unittest.TestCase):
    def test_sum_and_mean(self) -> None:
        a = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])

        self.assertListEqual([5.0, 7.0, 9.0], tensor.reduce(a, axis=0, op=tensor.ReduceOp.SUM).values.tolist())
        self.assertListEqual([2.0, 5.0], tensor.reduce(a, axis=1, op=tensor.ReduceOp.MEAN).values.tolist())
        self.assertIsNone(tensor.reduce(a, axis=1, op=tensor.ReduceOp.SUM).indices)

    def test_max_returns_indices(self) -> None:
        a = np.array([[1.0, 9.0, 3.0], [7.0, 5.0, 6.0]])
        reduction = tensor.reduce(a, axis=1, op=tensor.ReduceOp.MAX)

        self.assertListEqual([9.0, 7.0], reduction.values.tolist())
        assert reduction.indices is not None
        self.assertListEqual([1, 0], reduction.indices.tolist())

    def test_max_ties_go_to_lowest_index(self) -> None:
        reduction = tensor.reduce(np.array([[2.0, 2.0, 1.0]]), axis=1, op=tensor.ReduceOp.MAX)
        assert reduction.indices is not None
        self.assertListEqual([0], reduction.indices.tolist())

    def test_sum_composes_over_axes(self) -> None:
        stream = np.random.RandomState(5)
        for _ in range(20):
            a = stream.uniform(-10.0, 10.0, size=tuple(stream.randint(1, 5, size=3)))
            total = float(np.sum(a))
            tolerance = 1e-12 * max(1.0, float(np.sum(np.abs(a))))

            for axis in range(3):
                partial = tensor.reduce(a, axis=axis, op=tensor.ReduceOp.SUM).values
                rows = tensor.reduce(partial, axis=0, op=tensor.ReduceOp.SUM).values
                composed = tensor.reduce(rows, axis=0, op=tensor.ReduceOp.SUM).values

                self.assertEqual((), composed.shape)
                self.assertAlmostEqual(total, float(composed), delta=tolerance)

    def test_mean_of_constant(self) -> None:
        for value in [0.0, -3.25, 7.0, 1e-3]:
            a = np.full((3, 4, 5), value)
            for axis in range(3):
                mean = tensor.reduce(a, axis=axis, op=tensor.ReduceOp.MEAN).values
                np.testing.assert_allclose(mean, np.full(mean.shape, value), rtol=1e-14, atol=0.0)

    def test_invalid_axis(self) -> None:
        with self.assertRaises(InvalidArgumentError):
            tensor.reduce(np.zeros((2, 3)), axis=2, op=tensor.ReduceOp.SUM)


if __name__ == '__main__':
    unittest.main()
