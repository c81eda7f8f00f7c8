"""
Persist the training state in a versioned binary file.

The file starts with the magic ``QOCR`` and a little-endian u16 format version, followed by the named sections.
Each section is stored as a u16 name length, the UTF-8 name, a u64 payload length, the payload and the CRC-32 of the
payload (u32). The sections are:

* ``config``: the model configuration, the hyperparameters and the seed as UTF-8 JSON,
* ``vocabulary``: the symbols, one per line,
* ``tensors``: all the parameter tensors including the running statistics,
* ``optimizer``: the RMSProp accumulators, and
* ``counter``: the iteration counter as u64, followed by the best validation CRR so far: a u8 flag, the CRR as
  f64 and the iteration it was reached at as u64 (both zero if the flag is unset).

A tensor block is a u32 count followed by the tensors, each given as a u16 name length, the name, a u8 rank, the
u32 extents and the little-endian doubles in row-major order.
"""
import collections
import json
import math
import pathlib
import struct
import zlib
from typing import Dict, List, Mapping, Optional, Tuple

import icontract
import numpy as np

from qocr import model
from qocr.errors import CheckpointMismatchError, CheckpointVersionError, CorruptCheckpointError, QocrError
from qocr.tensor import Tensor
from qocr.vocabulary import parse_vocabulary, serialize_vocabulary

MAGIC = b'QOCR'
VERSION = 2

SECTION_NAMES = ('config', 'vocabulary', 'tensors', 'optimizer', 'counter')


class _Reader:
    """Read little-endian values from a buffer and report truncation as a corrupt section."""

    def __init__(self, data: bytes, section: str) -> None:
        """Initialize with the buffer and the name of the section for the error messages."""
        self.data = data
        self.section = section
        self.offset = 0

    def take(self, size: int) -> bytes:
        """Consume ``size`` bytes."""
        if self.offset + size > len(self.data):
            raise CorruptCheckpointError("The section {} is truncated: expected {} more byte(s) at offset {}".format(
                self.section, size, self.offset))

        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> Tuple[int, ...]:
        """Consume and unpack a ``struct`` format."""
        layout = struct.Struct(fmt)
        return layout.unpack(self.take(layout.size))

    def at_end(self) -> bool:
        """Check whether the whole buffer has been consumed."""
        return self.offset == len(self.data)


def _encode_tensors(tensors: Mapping[str, Tensor]) -> bytes:
    parts = [struct.pack('<I', len(tensors))]
    for name, value in tensors.items():
        encoded_name = name.encode('utf-8')
        parts.append(struct.pack('<H', len(encoded_name)))
        parts.append(encoded_name)
        parts.append(struct.pack('<B', value.ndim))
        parts.append(struct.pack('<{}I'.format(value.ndim), *value.shape))
        parts.append(np.ascontiguousarray(value, dtype='<f8').tobytes())

    return b''.join(parts)


def _decode_tensors(data: bytes, section: str) -> "collections.OrderedDict[str, Tensor]":
    reader = _Reader(data=data, section=section)

    result = collections.OrderedDict()  # type: collections.OrderedDict[str, Tensor]
    (count, ) = reader.unpack('<I')
    for _ in range(count):
        (name_length, ) = reader.unpack('<H')
        try:
            name = reader.take(name_length).decode('utf-8')
        except UnicodeDecodeError as err:
            raise CorruptCheckpointError("A tensor name in the section {} is not valid UTF-8: {}".format(
                section, err)) from err

        (rank, ) = reader.unpack('<B')
        shape = reader.unpack('<{}I'.format(rank))
        size = int(np.prod(shape)) if rank > 0 else 1
        values = np.frombuffer(reader.take(8 * size), dtype='<f8').astype(np.float64).reshape(shape)

        if name in result:
            raise CorruptCheckpointError("The tensor {} is duplicated in the section {}".format(name, section))
        result[name] = values

    if not reader.at_end():
        raise CorruptCheckpointError("The section {} has {} trailing byte(s)".format(
            section, len(data) - reader.offset))

    return result


_COUNTER = struct.Struct('<QBdQ')


def _encode_counter(state: model.TrainingState) -> bytes:
    if state.best_crr is None or state.best_iteration is None:
        return _COUNTER.pack(state.iteration, 0, 0.0, 0)

    return _COUNTER.pack(state.iteration, 1, state.best_crr, state.best_iteration)


def _decode_counter(data: bytes) -> Tuple[int, Optional[float], Optional[int]]:
    """Parse the iteration counter, the best validation CRR and its iteration."""
    reader = _Reader(data=data, section='counter')
    iteration, flag, best_crr, best_iteration = reader.unpack(_COUNTER.format)
    if not reader.at_end():
        raise CorruptCheckpointError("The section counter has trailing bytes")

    if flag == 0:
        return iteration, None, None

    if flag != 1 or not math.isfinite(best_crr) or best_iteration > iteration:
        raise CorruptCheckpointError(
            "The section counter records an invalid best validation CRR {} at the iteration {} (flag {})".format(
                best_crr, best_iteration, flag))

    return iteration, best_crr, best_iteration


def serialize_checkpoint(state: model.TrainingState) -> bytes:
    """Serialize the training state to the bytes of a checkpoint file."""
    config = collections.OrderedDict([
        ('model', state.config.to_mapping()),
        ('hyperparameters', state.hyperparameters.to_mapping()),
        ('seed', state.seed),
    ])

    sections = [
        ('config', json.dumps(config, indent=2).encode('utf-8')),
        ('vocabulary', serialize_vocabulary(state.vocabulary).encode('utf-8')),
        ('tensors', _encode_tensors(state.params.tensors())),
        ('optimizer', _encode_tensors(state.accumulators)),
        ('counter', _encode_counter(state)),
    ]

    parts = [MAGIC, struct.pack('<H', VERSION)]
    for name, payload in sections:
        encoded_name = name.encode('utf-8')
        parts.append(struct.pack('<H', len(encoded_name)))
        parts.append(encoded_name)
        parts.append(struct.pack('<Q', len(payload)))
        parts.append(payload)
        parts.append(struct.pack('<I', zlib.crc32(payload) & 0xFFFFFFFF))

    return b''.join(parts)


def _split_sections(data: bytes) -> Dict[str, bytes]:
    if data[:len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError("The file does not start with the magic {!r}".format(MAGIC))

    reader = _Reader(data=data[len(MAGIC):], section='header')
    (version, ) = reader.unpack('<H')
    if version != VERSION:
        raise CheckpointVersionError("Expected the checkpoint format version {}, but got {}".format(VERSION, version))

    sections = dict()  # type: Dict[str, bytes]
    while not reader.at_end():
        (name_length, ) = reader.unpack('<H')
        try:
            name = reader.take(name_length).decode('utf-8')
        except UnicodeDecodeError as err:
            raise CorruptCheckpointError("A section name is not valid UTF-8: {}".format(err)) from err

        reader.section = name
        (payload_length, ) = reader.unpack('<Q')
        payload = reader.take(payload_length)
        (crc, ) = reader.unpack('<I')

        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise CorruptCheckpointError("The checksum of the section {} does not match its payload".format(name))

        if name in sections:
            raise CorruptCheckpointError("The section {} is duplicated".format(name))

        sections[name] = payload

    missing = [name for name in SECTION_NAMES if name not in sections]
    if missing:
        raise CorruptCheckpointError("The checkpoint misses the section(s): {}".format(', '.join(missing)))

    return sections


def _assign_all(target: Mapping[str, Tensor], values: Mapping[str, Tensor], section: str) -> List[Tuple[str, Tensor]]:
    """Match the stored tensors against the expected ones by name and shape."""
    missing = sorted(set(target.keys()) - set(values.keys()))
    unexpected = sorted(set(values.keys()) - set(target.keys()))
    if missing or unexpected:
        raise CheckpointMismatchError(
            "The section {} does not match the configuration; missing: {}, unexpected: {}".format(
                section, missing, unexpected))

    pairs = []  # type: List[Tuple[str, Tensor]]
    for name, expected in target.items():
        value = values[name]
        if value.shape != expected.shape:
            raise CheckpointMismatchError("The tensor {} in the section {} has the shape {}, but the configuration "
                                          "implies {}".format(name, section, list(value.shape),
                                                              list(expected.shape)))
        pairs.append((name, value))

    return pairs


def deserialize_checkpoint(data: bytes) -> model.TrainingState:
    """
    Parse the training state from the bytes of a checkpoint file.

    :raise CheckpointVersionError: if the format version is not supported
    :raise CorruptCheckpointError: if a section is truncated, malformed or missing
    :raise CheckpointMismatchError: if the vocabulary or the tensors do not match the configuration
    """
    sections = _split_sections(data)

    try:
        config_mapping = json.loads(sections['config'].decode('utf-8'))
        config = model.config_from_mapping(config_mapping['model'])
        hyper_mapping = config_mapping['hyperparameters']
        hyperparameters = model.Hyperparameters(
            learning_rate=float(hyper_mapping['learning_rate']),
            decay=float(hyper_mapping['decay']),
            epsilon=float(hyper_mapping['epsilon']),
            batch_size=int(hyper_mapping['batch_size']))
        seed = int(config_mapping['seed'])
    except (UnicodeDecodeError, ValueError, KeyError, TypeError, icontract.ViolationError) as err:
        raise CorruptCheckpointError("The section config is malformed: {}".format(err)) from err
    except QocrError as err:
        raise CorruptCheckpointError("The section config describes an invalid model: {}".format(
            err.description)) from err

    try:
        vocabulary = parse_vocabulary(sections['vocabulary'].decode('utf-8'), filename='vocabulary')
    except (UnicodeDecodeError, QocrError) as err:
        raise CorruptCheckpointError("The section vocabulary is malformed: {}".format(err)) from err

    if len(vocabulary) != config.vocabulary_size:
        raise CheckpointMismatchError("The configuration expects {} symbols, but the vocabulary has {}".format(
            config.vocabulary_size, len(vocabulary)))

    iteration, best_crr, best_iteration = _decode_counter(sections['counter'])

    state = model.build_model(config=config, seed=seed, vocabulary=vocabulary, hyperparameters=hyperparameters)

    tensors = _decode_tensors(sections['tensors'], section='tensors')
    for name, value in _assign_all(state.params.tensors(), tensors, section='tensors'):
        state.params.assign(name, value)

    accumulators = _decode_tensors(sections['optimizer'], section='optimizer')
    for name, value in _assign_all(state.accumulators, accumulators, section='optimizer'):
        if not bool(np.all(value >= 0.0)):
            raise CorruptCheckpointError("The accumulator {} has negative values".format(name))
        state.accumulators[name] = value

    state.iteration = iteration
    state.best_crr = best_crr
    state.best_iteration = best_iteration
    return state


def save_checkpoint(state: model.TrainingState, path: pathlib.Path) -> None:
    """Write the training state to the file."""
    path.write_bytes(serialize_checkpoint(state))


def load_checkpoint(path: pathlib.Path) -> model.TrainingState:
    """
    Read the training state from the file.

    :raise CheckpointVersionError: if the format version is not supported
    :raise CorruptCheckpointError: if a section is truncated, malformed or missing
    :raise CheckpointMismatchError: if the vocabulary or the tensors do not match the configuration
    """
    try:
        return deserialize_checkpoint(path.read_bytes())
    except (CheckpointVersionError, CorruptCheckpointError, CheckpointMismatchError) as err:
        if err.filename is None:
            err.filename = str(path)
        raise
