#!/usr/bin/env python3

# pylint: disable=missing-docstring
import pathlib
import struct
import tempfile
import unittest
import zlib
from typing import List, Tuple

import numpy as np

import tests.common
from qocr import checkpoint, model, nn
from qocr.errors import CheckpointMismatchError, CheckpointVersionError, CorruptCheckpointError


def trained_state(seed: int, hidden_size: int = 3) -> model.TrainingState:
    config = tests.common.tiny_config()
    config = model.ModelConfig(
        conv_specs=config.conv_specs,
        hidden_size=hidden_size,
        lstm_layers=config.lstm_layers,
        vocabulary_size=config.vocabulary_size,
        input_width=config.input_width,
        input_height=config.input_height)

    state = model.build_model(
        config, seed=seed, vocabulary=tests.common.tiny_vocabulary(),
        hyperparameters=model.Hyperparameters(learning_rate=1e-2, batch_size=2))

    stream = np.random.RandomState(seed)
    for _ in range(3):
        model.train_step(state, stream.randn(2, 8, 4), [[0, 1], [2]])

    return state


def sections_of(data: bytes) -> List[Tuple[str, bytes]]:
    """Split the checkpoint into its named sections in file order."""
    result = []  # type: List[Tuple[str, bytes]]
    offset = len(checkpoint.MAGIC) + 2
    while offset < len(data):
        (name_length, ) = struct.unpack_from('<H', data, offset)
        offset += 2
        name = data[offset:offset + name_length].decode('utf-8')
        offset += name_length
        (payload_length, ) = struct.unpack_from('<Q', data, offset)
        offset += 8
        result.append((name, data[offset:offset + payload_length]))
        offset += payload_length + 4

    return result


def assemble(sections: List[Tuple[str, bytes]], version: int = checkpoint.VERSION) -> bytes:
    parts = [checkpoint.MAGIC, struct.pack('<H', version)]
    for name, payload in sections:
        parts.append(struct.pack('<H', len(name)))
        parts.append(name.encode('utf-8'))
        parts.append(struct.pack('<Q', len(payload)))
        parts.append(payload)
        parts.append(struct.pack('<I', zlib.crc32(payload) & 0xFFFFFFFF))

    return b''.join(parts)


class TestRoundTrip(unittest.TestCase):
    def test_bit_exact(self) -> None:
        state = trained_state(seed=0)
        data = checkpoint.serialize_checkpoint(state)
        restored = checkpoint.deserialize_checkpoint(data)

        self.assertEqual(data, checkpoint.serialize_checkpoint(restored))
        self.assertEqual(3, restored.iteration)
        self.assertEqual(state.config, restored.config)
        self.assertEqual(state.vocabulary, restored.vocabulary)
        self.assertEqual(state.seed, restored.seed)
        self.assertEqual(state.hyperparameters.to_mapping(), restored.hyperparameters.to_mapping())

        for name, value in state.params.tensors().items():
            np.testing.assert_array_equal(value, restored.params.tensors()[name], err_msg=name)

        for name, value in state.accumulators.items():
            np.testing.assert_array_equal(value, restored.accumulators[name], err_msg=name)

    def test_same_outputs(self) -> None:
        state = trained_state(seed=1)
        batch = np.random.RandomState(10).randn(3, 8, 4)

        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / 'model.ckpt'
            checkpoint.save_checkpoint(state, path)
            restored = checkpoint.load_checkpoint(path)

        np.testing.assert_array_equal(
            model.forward(state, batch, mode=nn.Mode.INFER), model.forward(restored, batch, mode=nn.Mode.INFER))

    def test_training_continues_identically(self) -> None:
        state = trained_state(seed=2)
        restored = checkpoint.deserialize_checkpoint(checkpoint.serialize_checkpoint(state))

        batch = np.random.RandomState(11).randn(2, 8, 4)
        labels = [[2, 1], [0]]

        self.assertEqual(model.train_step(state, batch, labels), model.train_step(restored, batch, labels))
        for name, value in state.params.tensors().items():
            np.testing.assert_array_equal(value, restored.params.tensors()[name], err_msg=name)

    def test_best_record(self) -> None:
        state = trained_state(seed=3)
        restored = checkpoint.deserialize_checkpoint(checkpoint.serialize_checkpoint(state))
        self.assertIsNone(restored.best_crr)
        self.assertIsNone(restored.best_iteration)

        state.record_best(0.8125)
        data = checkpoint.serialize_checkpoint(state)
        restored = checkpoint.deserialize_checkpoint(data)
        self.assertEqual(0.8125, restored.best_crr)
        self.assertEqual(3, restored.best_iteration)
        self.assertEqual(data, checkpoint.serialize_checkpoint(restored))

    def test_sections_in_order(self) -> None:
        data = checkpoint.serialize_checkpoint(trained_state(seed=0))
        self.assertTrue(data.startswith(b'QOCR\x02\x00'))
        self.assertListEqual(list(checkpoint.SECTION_NAMES), [name for name, _ in sections_of(data)])


class TestErrors(unittest.TestCase):
    def setUp(self) -> None:
        self.data = checkpoint.serialize_checkpoint(trained_state(seed=0))

    def test_version(self) -> None:
        data = assemble(sections_of(self.data), version=checkpoint.VERSION + 1)
        with self.assertRaises(CheckpointVersionError):
            checkpoint.deserialize_checkpoint(data)

    def test_magic(self) -> None:
        with self.assertRaises(CorruptCheckpointError):
            checkpoint.deserialize_checkpoint(b'XOCR' + self.data[4:])

    def test_flipped_byte(self) -> None:
        data = bytearray(self.data)
        data[len(data) // 2] ^= 0xFF

        with self.assertRaises(CorruptCheckpointError):
            checkpoint.deserialize_checkpoint(bytes(data))

    def test_truncated(self) -> None:
        for length in [0, 5, len(self.data) // 3, len(self.data) - 1]:
            with self.assertRaises(CorruptCheckpointError, msg=str(length)):
                checkpoint.deserialize_checkpoint(self.data[:length])

    def test_missing_section(self) -> None:
        sections = [(name, payload) for name, payload in sections_of(self.data) if name != 'optimizer']
        with self.assertRaises(CorruptCheckpointError) as ctx:
            checkpoint.deserialize_checkpoint(assemble(sections))

        self.assertIn('optimizer', str(ctx.exception))

    def test_malformed_config(self) -> None:
        sections = [(name, b'{"model": {}}' if name == 'config' else payload)
                    for name, payload in sections_of(self.data)]
        with self.assertRaises(CorruptCheckpointError):
            checkpoint.deserialize_checkpoint(assemble(sections))

    def test_tensors_of_another_model(self) -> None:
        other = dict(sections_of(checkpoint.serialize_checkpoint(trained_state(seed=0, hidden_size=4))))
        sections = [(name, other['tensors'] if name == 'tensors' else payload)
                    for name, payload in sections_of(self.data)]

        with self.assertRaises(CheckpointMismatchError) as ctx:
            checkpoint.deserialize_checkpoint(assemble(sections))

        self.assertIn('lstm0.fwd.w', str(ctx.exception))

    def test_invalid_best_record(self) -> None:
        for flag, best_crr, best_iteration in [(2, 0.5, 1), (1, float('nan'), 1), (1, 0.5, 4)]:
            counter = struct.pack('<QBdQ', 3, flag, best_crr, best_iteration)
            sections = [(name, counter if name == 'counter' else payload) for name, payload in sections_of(self.data)]

            with self.assertRaises(CorruptCheckpointError, msg=str((flag, best_crr, best_iteration))):
                checkpoint.deserialize_checkpoint(assemble(sections))

        sections = [(name, payload + b'\x00' if name == 'counter' else payload)
                    for name, payload in sections_of(self.data)]
        with self.assertRaises(CorruptCheckpointError):
            checkpoint.deserialize_checkpoint(assemble(sections))

    def test_vocabulary_mismatch(self) -> None:
        sections = [(name, 'a\nb\nc\nd\n'.encode('utf-8') if name == 'vocabulary' else payload)
                    for name, payload in sections_of(self.data)]

        with self.assertRaises(CheckpointMismatchError):
            checkpoint.deserialize_checkpoint(assemble(sections))

    def test_file_name_in_error(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / 'broken.ckpt'
            path.write_bytes(self.data[:-1])

            with self.assertRaises(CorruptCheckpointError) as ctx:
                checkpoint.load_checkpoint(path)

        self.assertTrue(str(ctx.exception).startswith(str(path)))
        self.assertIn('(checkpoint-corrupt)', str(ctx.exception))


if __name__ == '__main__':
    unittest.main()
