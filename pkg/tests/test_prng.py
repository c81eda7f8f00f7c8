#!/usr/bin/env python3

# pylint: disable=missing-docstring
import unittest

import numpy as np

from qocr import prng


class TestSplitMix64(unittest.TestCase):
    def test_reference_values(self) -> None:
        stream = prng.SplitMix64(seed=0)
        self.assertEqual(0xe220a8397b1dcdaf, stream.next_u64())
        self.assertEqual(0x6e789e6aa1b965f4, stream.next_u64())

    def test_block_matches_scalar_draws(self) -> None:
        scalar = prng.SplitMix64(seed=12345)
        block = prng.SplitMix64(seed=12345)

        expected = [scalar.next_u64() for _ in range(17)]
        self.assertListEqual(expected, [int(value) for value in block.next_u64_block(17)])

        # The states stay in step after a block draw.
        self.assertEqual(scalar.next_u64(), block.next_u64())

    def test_uniform_range(self) -> None:
        values = prng.SplitMix64(seed=1).uniform(10000)
        self.assertTrue(bool(np.all((values >= 0.0) & (values < 1.0))))
        self.assertAlmostEqual(0.5, float(np.mean(values)), delta=0.02)

    def test_normal_moments(self) -> None:
        values = prng.SplitMix64(seed=2).normal(20001)
        self.assertEqual((20001, ), values.shape)
        self.assertAlmostEqual(0.0, float(np.mean(values)), delta=0.05)
        self.assertAlmostEqual(1.0, float(np.std(values)), delta=0.05)

    def test_permutation(self) -> None:
        permutation = prng.SplitMix64(seed=3).permutation(50)
        self.assertListEqual(list(range(50)), sorted(permutation))
        self.assertNotEqual(list(range(50)), permutation)
        self.assertListEqual(permutation, prng.SplitMix64(seed=3).permutation(50))

    def test_below(self) -> None:
        stream = prng.SplitMix64(seed=4)
        draws = {stream.below(3) for _ in range(100)}
        self.assertSetEqual({0, 1, 2}, draws)


class TestDeriveSeed(unittest.TestCase):
    def test_deterministic_and_distinct(self) -> None:
        self.assertEqual(prng.derive_seed(7, 1, 2), prng.derive_seed(7, 1, 2))
        seeds = {prng.derive_seed(7, key) for key in range(100)}
        self.assertEqual(100, len(seeds))

    def test_key_order_matters(self) -> None:
        self.assertNotEqual(prng.derive_seed(7, 1, 2), prng.derive_seed(7, 2, 1))

    def test_no_keys(self) -> None:
        self.assertEqual(7, prng.derive_seed(7))


if __name__ == '__main__':
    unittest.main()
