"""
Store, generate, perturb, split and preprocess the word images.

A dataset consists of two files: a text labels file and a binary blob with the concatenated image payloads. Every
line of the labels file gives the word, the font, the style, the size and the byte range of its image in the blob.

All the random operations draw from :class:`qocr.prng.SplitMix64` streams keyed by the master seed and the record
index, so the results do not depend on the order in which the records are processed.
"""
import collections
import enum
import json
import math
import pathlib
import struct
from typing import List, Sequence, Set, Tuple

import icontract
import numpy as np
import numpy.typing as npt
import PIL.Image

from qocr.errors import EmptyDatasetError, InvalidArgumentError, ParseError
from qocr.prng import SplitMix64, derive_seed
from qocr.tensor import Tensor
from qocr.vocabulary import Vocabulary, read_vocabulary, write_vocabulary

LABELS_HEADER = "AMFDS\t1"
LABELS_FILENAME = "labels.txt"
BLOB_FILENAME = "images.bin"
VOCABULARY_FILENAME = "vocab.txt"

INPUT_WIDTH = 128
INPUT_HEIGHT = 32

_PAYLOAD_HEADER = struct.Struct('<II')

# Keys of the sub-streams derived from the master seed
_GLYPH_KEY = 1
_FONT_KEY = 2
_JITTER_KEY = 3
_SALT_PEPPER_KEY = 4
_SPECKLE_KEY = 5
_WORDS_KEY = 6

GLYPH_ROWS = 7
GLYPH_COLUMNS = 5


class Style(enum.Enum):
    """Enumerate the font styles."""

    REGULAR = "regular"
    BOLD = "bold"


@icontract.invariant(lambda self: self.pixels.ndim == 2 and self.pixels.shape[0] >= 1 and self.pixels.shape[1] >= 1)
@icontract.invariant(lambda self: self.pixels.dtype == np.uint8)
class GrayImage:
    """Represent a grayscale image as rows of bytes where 0 is ink and 255 is background."""

    def __init__(self, pixels: npt.NDArray[np.uint8]) -> None:
        """Initialize with the pixels given as a height × width array."""
        self.pixels = pixels

    @property
    def width(self) -> int:
        """Give the number of columns."""
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        """Give the number of rows."""
        return int(self.pixels.shape[0])

    def to_payload(self) -> bytes:
        """Serialize as the little-endian width and height followed by the row-major pixels."""
        return _PAYLOAD_HEADER.pack(self.width, self.height) + self.pixels.tobytes()

    def __eq__(self, other: object) -> bool:
        """Compare the pixels."""
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


def parse_payload(payload: bytes) -> GrayImage:
    """
    Parse the image payload.

    :raise ValueError: if the payload is truncated or its length does not match the extents
    """
    if len(payload) < _PAYLOAD_HEADER.size:
        raise ValueError("The payload of {} byte(s) is shorter than its header".format(len(payload)))

    width, height = _PAYLOAD_HEADER.unpack_from(payload)
    if width == 0 or height == 0:
        raise ValueError("The payload declares a degenerate image of {}×{}".format(width, height))

    if len(payload) != _PAYLOAD_HEADER.size + width * height:
        raise ValueError("The payload declares {}×{} pixels, but has {} byte(s) in total".format(
            width, height, len(payload)))

    pixels = np.frombuffer(payload, dtype=np.uint8, offset=_PAYLOAD_HEADER.size).reshape(height, width).copy()
    return GrayImage(pixels=pixels)


# region Repository


@icontract.invariant(lambda self: len(self.word) > 0)
@icontract.invariant(lambda self: self.font_id >= 0 and self.size_pt >= 1)
@icontract.invariant(lambda self: self.start_offset >= 0 and self.byte_length > _PAYLOAD_HEADER.size)
class SampleRecord:
    """Describe one labeled word image and locate its payload in the blob."""

    def __init__(self, word: str, font_id: int, style: Style, size_pt: int, start_offset: int,
                 byte_length: int) -> None:
        """Initialize with the given values."""
        self.word = word
        self.font_id = font_id
        self.style = style
        self.size_pt = size_pt
        self.start_offset = start_offset
        self.byte_length = byte_length

    def __eq__(self, other: object) -> bool:
        """Compare all the fields."""
        return isinstance(other, SampleRecord) and (self.word, self.font_id, self.style, self.size_pt,
                                                    self.start_offset, self.byte_length) == (
                                                        other.word, other.font_id, other.style, other.size_pt,
                                                        other.start_offset, other.byte_length)

    def __repr__(self) -> str:
        """Represent the record for debugging."""
        return "SampleRecord(word={!r}, font_id={}, style={}, size_pt={}, start_offset={}, byte_length={})".format(
            self.word, self.font_id, self.style.value, self.size_pt, self.start_offset, self.byte_length)


class Sample:
    """Represent a labeled image before it is packed into a repository."""

    def __init__(self, word: str, font_id: int, style: Style, size_pt: int, image: GrayImage) -> None:
        """Initialize with the given values."""
        self.word = word
        self.font_id = font_id
        self.style = style
        self.size_pt = size_pt
        self.image = image


def _sequentially_packed(records: Sequence[SampleRecord]) -> bool:
    offset = 0
    for record in records:
        if record.start_offset != offset:
            return False
        offset += record.byte_length

    return True


@icontract.invariant(lambda self: _sequentially_packed(self.records))
@icontract.invariant(lambda self: sum(record.byte_length for record in self.records) == len(self.blob))
class Repository:
    """Represent the packed dataset: the records and the blob of their concatenated image payloads."""

    def __init__(self, records: List[SampleRecord], blob: bytes) -> None:
        """Initialize with the given values."""
        self.records = records
        self.blob = blob

    def __len__(self) -> int:
        """Give the number of records."""
        return len(self.records)

    @icontract.require(lambda self, index: 0 <= index < len(self.records))
    def image(self, index: int) -> GrayImage:
        """Decode the image of the record at ``index`` without touching the other payloads."""
        record = self.records[index]
        return parse_payload(self.blob[record.start_offset:record.start_offset + record.byte_length])

    def sample(self, index: int) -> Sample:
        """Give the record at ``index`` together with its decoded image."""
        record = self.records[index]
        return Sample(
            word=record.word,
            font_id=record.font_id,
            style=record.style,
            size_pt=record.size_pt,
            image=self.image(index))


def pack(samples: Sequence[Sample]) -> Repository:
    """Concatenate the image payloads and compute the offsets of the records."""
    records = []  # type: List[SampleRecord]
    payloads = []  # type: List[bytes]
    offset = 0
    for sample in samples:
        if len(sample.word) == 0:
            raise InvalidArgumentError("Expected a non-empty word for the sample {}".format(len(records)))

        if any(symbol in '\t\n\r' for symbol in sample.word):
            raise InvalidArgumentError("The word {!r} contains a tab or a line break".format(sample.word))

        payload = sample.image.to_payload()
        records.append(
            SampleRecord(
                word=sample.word,
                font_id=sample.font_id,
                style=sample.style,
                size_pt=sample.size_pt,
                start_offset=offset,
                byte_length=len(payload)))
        payloads.append(payload)
        offset += len(payload)

    return Repository(records=records, blob=b''.join(payloads))


def serialize_labels(records: Sequence[SampleRecord]) -> str:
    """Serialize the records as the text of the labels file."""
    parts = [LABELS_HEADER + "\n"]
    for record in records:
        parts.append("{}\t{}\t{}\t{}\t{}\t{}\n".format(record.word, record.font_id, record.style.value, record.size_pt,
                                                     record.start_offset, record.byte_length))
    return ''.join(parts)


def _parse_int(text: str, name: str, filename: str, lineno: int) -> int:
    if not (text.isascii() and text.isdigit()):
        raise ParseError(
            "Expected a non-negative integer for {}, but got: {!r}".format(name, text),
            filename=filename,
            lineno=lineno)
    return int(text)


def parse_labels(text: str, filename: str = '<labels>') -> List[SampleRecord]:
    """
    Parse the labels file.

    :raise ParseError: if the header or a record line is malformed
    """
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines = lines[:-1]

    if not lines or lines[0] != LABELS_HEADER:
        raise ParseError(
            "Expected the header {!r}, but got: {!r}".format(LABELS_HEADER, lines[0] if lines else ''),
            filename=filename,
            lineno=1)

    style_values = {style.value: style for style in Style}

    records = []  # type: List[SampleRecord]
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split('\t')
        if len(fields) != 6:
            raise ParseError(
                "Expected 6 tab-separated fields, but got {}: {!r}".format(len(fields), line),
                filename=filename,
                lineno=lineno)

        word, font_id, style, size_pt, start_offset, byte_length = fields

        if word == '':
            raise ParseError("Expected a non-empty word", filename=filename, lineno=lineno)

        if style not in style_values:
            raise ParseError(
                "Expected a style in {}, but got: {!r}".format(sorted(style_values), style),
                filename=filename,
                lineno=lineno)

        size = _parse_int(size_pt, 'size_pt', filename, lineno)
        length = _parse_int(byte_length, 'byte_length', filename, lineno)
        if size < 1 or length <= _PAYLOAD_HEADER.size:
            raise ParseError(
                "Expected a positive size and a byte length above {}, but got {} and {}".format(
                    _PAYLOAD_HEADER.size, size, length),
                filename=filename,
                lineno=lineno)

        records.append(
            SampleRecord(
                word=word,
                font_id=_parse_int(font_id, 'font_id', filename, lineno),
                style=style_values[style],
                size_pt=size,
                start_offset=_parse_int(start_offset, 'start_offset', filename, lineno),
                byte_length=length))

    return records


def verify_blob(records: Sequence[SampleRecord], blob: bytes, labels_filename: str = '<labels>',
                blob_filename: str = '<blob>') -> None:
    """
    Check that the records are sequentially packed and that every payload parses.

    The errors point to the line of the offending record in the labels file (the header is line 1).

    :raise ParseError: if an offset is out of range, the packing is broken or a payload is malformed
    """
    expected_offset = 0
    for i, record in enumerate(records):
        lineno = i + 2
        if record.start_offset != expected_offset:
            raise ParseError(
                "Expected the record to start at {} after its predecessor, but it starts at {}".format(
                    expected_offset, record.start_offset),
                filename=labels_filename,
                lineno=lineno)

        end = record.start_offset + record.byte_length
        if end > len(blob):
            raise ParseError(
                "The record spans the bytes [{}, {}), but the blob {} has only {} byte(s); is it truncated?".format(
                    record.start_offset, end, blob_filename, len(blob)),
                filename=labels_filename,
                lineno=lineno)

        try:
            parse_payload(blob[record.start_offset:end])
        except ValueError as err:
            raise ParseError(
                "The payload in {} is malformed: {}".format(blob_filename, err), filename=labels_filename,
                lineno=lineno) from err

        expected_offset = end

    if expected_offset != len(blob):
        raise ParseError(
            "The blob has {} trailing byte(s) not addressed by any record".format(len(blob) - expected_offset),
            filename=blob_filename)


def write_repository(repository: Repository, labels_path: pathlib.Path, blob_path: pathlib.Path) -> None:
    """Write the labels file and the blob file of the repository."""
    labels_path.write_bytes(serialize_labels(repository.records).encode('utf-8'))
    blob_path.write_bytes(repository.blob)


def read_repository(labels_path: pathlib.Path, blob_path: pathlib.Path) -> Repository:
    """
    Read and verify the repository from its labels file and its blob file.

    :raise ParseError: if the labels are malformed, the blob is truncated or a payload does not parse
    """
    try:
        text = labels_path.read_bytes().decode('utf-8')
    except UnicodeDecodeError as err:
        raise ParseError("The labels file is not valid UTF-8: {}".format(err), filename=str(labels_path)) from err

    records = parse_labels(text=text, filename=str(labels_path))
    blob = blob_path.read_bytes()
    verify_blob(records=records, blob=blob, labels_filename=str(labels_path), blob_filename=str(blob_path))

    return Repository(records=records, blob=blob)


def save_dataset(repository: Repository, vocabulary: Vocabulary, directory: pathlib.Path) -> None:
    """Write the repository and its vocabulary into the dataset directory."""
    directory.mkdir(parents=True, exist_ok=True)
    write_repository(repository, labels_path=directory / LABELS_FILENAME, blob_path=directory / BLOB_FILENAME)
    write_vocabulary(vocabulary, path=directory / VOCABULARY_FILENAME)


def load_dataset(directory: pathlib.Path) -> Tuple[Repository, Vocabulary]:
    """Read the repository and its vocabulary from the dataset directory."""
    repository = read_repository(labels_path=directory / LABELS_FILENAME, blob_path=directory / BLOB_FILENAME)
    return repository, read_vocabulary(directory / VOCABULARY_FILENAME)


# endregion

# region Rendering


@icontract.invariant(lambda self: self.cell_gap >= 1 and self.margin >= 0)
@icontract.invariant(lambda self: 1 <= self.max_thickness <= 3)
@icontract.invariant(lambda self: 0.0 <= self.max_shear <= 0.3)
@icontract.invariant(lambda self: self.max_jitter >= 0)
class RendererConfig:
    """
    Configure the deterministic pseudo-glyph renderer.

    Every symbol is drawn as a 5×7 stroke bitmask scaled to the glyph cell; the scale follows from the font size
    (``round(size_pt / 9)``, so 26 pt gives cells of 15×21 pixels).
    """

    def __init__(self,
                 vocabulary: Vocabulary,
                 seed: int = 0,
                 cell_gap: int = 2,
                 margin: int = 4,
                 max_thickness: int = 3,
                 max_shear: float = 0.3,
                 max_jitter: int = 2) -> None:
        """Initialize with the given values."""
        self.vocabulary = vocabulary
        self.seed = seed
        self.cell_gap = cell_gap
        self.margin = margin
        self.max_thickness = max_thickness
        self.max_shear = max_shear
        self.max_jitter = max_jitter


class FontParameters:
    """Represent the perturbation of the glyphs that distinguishes one synthetic font from another."""

    def __init__(self, thickness: int, shear: float, jitter: int) -> None:
        """Initialize with the given values."""
        self.thickness = thickness
        self.shear = shear
        self.jitter = jitter


@icontract.require(lambda symbol_index: symbol_index >= 0)
@icontract.ensure(lambda result: result.shape == (GLYPH_ROWS, GLYPH_COLUMNS))
def glyph_bitmask(symbol_index: int, seed: int) -> npt.NDArray[np.bool_]:
    """
    Derive the stroke bitmask of the symbol from its index and the master seed alone.

    The 35 low bits of the stream give the mask (row-major); draws with fewer than 8 or more than 27 strokes are
    rejected so that every glyph is visible and none is a solid block.
    """
    stream = SplitMix64(seed=derive_seed(seed, _GLYPH_KEY, symbol_index))
    size = GLYPH_ROWS * GLYPH_COLUMNS
    while True:
        bits = stream.next_u64() & ((1 << size) - 1)
        if 8 <= bin(bits).count('1') <= 27:
            break

    mask = np.array([(bits >> k) & 1 for k in range(size)], dtype=bool)
    return mask.reshape(GLYPH_ROWS, GLYPH_COLUMNS)


@icontract.require(lambda font_id: font_id >= 0)
def font_parameters(font_id: int, config: RendererConfig) -> FontParameters:
    """Draw the stroke thickness, the shear and the jitter amplitude of the font from its own stream."""
    stream = SplitMix64(seed=derive_seed(config.seed, _FONT_KEY, font_id))
    thickness = 1 + stream.below(config.max_thickness)
    shear = (2.0 * float(stream.uniform(1)[0]) - 1.0) * config.max_shear
    jitter = stream.below(config.max_jitter + 1)
    return FontParameters(thickness=thickness, shear=shear, jitter=jitter)


def glyph_scale(size_pt: int) -> int:
    """Give the number of pixels per bitmask cell for the font size."""
    return max(1, int(math.floor(size_pt / 9.0 + 0.5)))


@icontract.require(lambda word: len(word) > 0)
@icontract.require(lambda font_id: font_id >= 0)
@icontract.require(lambda size_pt: size_pt >= 1)
def render_word(word: str,
                font_id: int,
                config: RendererConfig,
                style: Style = Style.BOLD,
                size_pt: int = 26) -> GrayImage:
    """
    Render the word as a row of pseudo-glyphs written from right to left.

    Adjacent glyph cells are joined by a one-pixel connector on the baseline. The font determines the stroke
    thickness (bold adds one pixel), the shear of the rows and the amplitude of the vertical jitter of each glyph.

    :raise VocabularyError: if a symbol of the word is not in the vocabulary
    """
    indices = config.vocabulary.encode(word)
    font = font_parameters(font_id, config)
    thickness = font.thickness + (1 if style == Style.BOLD else 0)

    scale = glyph_scale(size_pt)
    cell_w, cell_h = GLYPH_COLUMNS * scale, GLYPH_ROWS * scale
    count = len(indices)

    height = 2 * config.margin + cell_h + 2 * font.jitter + thickness - 1
    plain_width = 2 * config.margin + count * cell_w + (count - 1) * config.cell_gap + thickness - 1
    shear_extent = int(math.floor(abs(font.shear) * (height - 1) + 0.5))
    width = plain_width + shear_extent

    ink = np.zeros((height, plain_width), dtype=bool)
    baseline = config.margin + font.jitter + cell_h - 1

    for position, index in enumerate(indices):
        # The first symbol sits in the rightmost cell.
        left = config.margin + (count - 1 - position) * (cell_w + config.cell_gap)

        offset = 0
        if font.jitter > 0:
            jitter_stream = SplitMix64(seed=derive_seed(config.seed, _JITTER_KEY, font_id, position, index))
            offset = jitter_stream.below(2 * font.jitter + 1) - font.jitter

        top = config.margin + font.jitter + offset
        glyph = np.kron(glyph_bitmask(index, config.seed), np.ones((scale, scale), dtype=bool)).astype(bool)
        ink[top:top + cell_h, left:left + cell_w] |= glyph

        if position + 1 < count:
            # Connect to the next glyph on the left, overlapping one pixel of each cell.
            ink[baseline, left - config.cell_gap - 1:left + 1] = True

    stroked = ink.copy()
    for dy in range(thickness):
        for dx in range(thickness):
            stroked[dy:, dx:] |= ink[:height - dy, :plain_width - dx]

    sheared = np.zeros((height, width), dtype=bool)
    shifts = [int(math.floor(font.shear * (height - 1 - y) + 0.5)) for y in range(height)]
    smallest = min(shifts)
    for y in range(height):
        shift = shifts[y] - smallest
        sheared[y, shift:shift + plain_width] = stroked[y]

    return GrayImage(pixels=np.where(sheared, 0, 255).astype(np.uint8))


def generate_samples(words: Sequence[str],
                     fonts: Sequence[int],
                     config: RendererConfig,
                     style: Style = Style.BOLD,
                     size_pt: int = 26) -> Repository:
    """
    Render every word in every font; the records are ordered word-major.

    :raise VocabularyError: if a word contains a symbol outside of the vocabulary
    :raise InvalidArgumentError: if a word is empty or a font identifier is negative
    """
    for word in words:
        if len(word) == 0:
            raise InvalidArgumentError("Expected non-empty words, but got an empty word.")
        config.vocabulary.encode(word)

    for font_id in fonts:
        if font_id < 0:
            raise InvalidArgumentError("Expected non-negative font identifiers, but got: {}".format(font_id))

    samples = [
        Sample(
            word=word,
            font_id=font_id,
            style=style,
            size_pt=size_pt,
            image=render_word(word=word, font_id=font_id, config=config, style=style, size_pt=size_pt))
        for word in words for font_id in fonts
    ]

    return pack(samples)


@icontract.require(lambda count: count >= 0)
@icontract.require(lambda min_length, max_length: 1 <= min_length <= max_length)
@icontract.ensure(lambda count, result: len(result) == count)
@icontract.ensure(lambda unique, result: not unique or len(set(result)) == len(result))
def sample_words(vocabulary: Vocabulary,
                 count: int,
                 min_length: int = 7,
                 max_length: int = 10,
                 seed: int = 0,
                 unique: bool = True) -> List[str]:
    """
    Draw random words over the vocabulary with lengths uniformly in [min_length, max_length].

    :raise InvalidArgumentError: if more unique words are requested than there are words of the given lengths
    """
    if unique:
        available = sum(len(vocabulary)**length for length in range(min_length, max_length + 1))
        if count > available:
            raise InvalidArgumentError("Requested {} unique words, but only {} exist with lengths {}-{}".format(
                count, available, min_length, max_length))

    stream = SplitMix64(seed=derive_seed(seed, _WORDS_KEY))
    result = []  # type: List[str]
    seen = set()  # type: Set[str]
    while len(result) < count:
        length = min_length + stream.below(max_length - min_length + 1)
        word = ''.join(vocabulary.symbols[stream.below(len(vocabulary))] for _ in range(length))

        if unique and word in seen:
            continue

        seen.add(word)
        result.append(word)

    return result


# endregion

# region Noise


@icontract.ensure(lambda image, result: result.pixels.shape == image.pixels.shape)
def add_salt_pepper(image: GrayImage, density: float, seed: int) -> GrayImage:
    """
    Force each pixel independently to 0 with probability density/2 and to 255 with probability density/2.

    :raise InvalidArgumentError: if the density is outside [0, 1]
    """
    if not 0.0 <= density <= 1.0:
        raise InvalidArgumentError("Expected the salt-and-pepper density in [0, 1], but got: {}".format(density))

    uniforms = SplitMix64(seed=seed).uniform(image.pixels.size).reshape(image.pixels.shape)

    pixels = image.pixels.copy()
    pixels[uniforms < density / 2.0] = 0
    pixels[(uniforms >= density / 2.0) & (uniforms < density)] = 255
    return GrayImage(pixels=pixels)


@icontract.ensure(lambda image, result: result.pixels.shape == image.pixels.shape)
def add_speckle(image: GrayImage, variance: float = 0.04, seed: int = 0) -> GrayImage:
    """
    Multiply each pixel by (1 + n) where n is zero-mean Gaussian with the given variance.

    The result is rounded half up and clamped to [0, 255].

    :raise InvalidArgumentError: if the variance is negative
    """
    if variance < 0.0:
        raise InvalidArgumentError("Expected a non-negative speckle variance, but got: {}".format(variance))

    if variance == 0.0:
        return GrayImage(pixels=image.pixels.copy())

    noise = math.sqrt(variance) * SplitMix64(seed=seed).normal(image.pixels.size).reshape(image.pixels.shape)
    values = np.floor(image.pixels.astype(np.float64) * (1.0 + noise) + 0.5)
    return GrayImage(pixels=np.clip(values, 0, 255).astype(np.uint8))


def noise_repository(repository: Repository, sp_density: float, speckle_variance: float, seed: int) -> Repository:
    """
    Apply salt-and-pepper and then speckle noise to every image of the repository.

    Each record draws from its own sub-streams keyed by the record index.
    """
    if not 0.0 <= sp_density <= 1.0:
        raise InvalidArgumentError("Expected the salt-and-pepper density in [0, 1], but got: {}".format(sp_density))

    if speckle_variance < 0.0:
        raise InvalidArgumentError("Expected a non-negative speckle variance, but got: {}".format(speckle_variance))

    samples = []  # type: List[Sample]
    for index in range(len(repository)):
        sample = repository.sample(index)
        image = add_salt_pepper(sample.image, density=sp_density, seed=derive_seed(seed, _SALT_PEPPER_KEY, index))
        image = add_speckle(image, variance=speckle_variance, seed=derive_seed(seed, _SPECKLE_KEY, index))
        sample.image = image
        samples.append(sample)

    return pack(samples)


# endregion

# region Splitting


class Split:
    """Partition the record indices into the training, the validation and the test set."""

    def __init__(self, train: List[int], validate: List[int], test: List[int]) -> None:
        """Initialize with the given values."""
        self.train = train
        self.validate = validate
        self.test = test

    def subset(self, name: str) -> List[int]:
        """Give the indices of the named subset (``train``, ``validate``, ``test`` or ``all``)."""
        if name == 'train':
            return list(self.train)
        elif name == 'validate':
            return list(self.validate)
        elif name == 'test':
            return list(self.test)
        elif name == 'all':
            return sorted(self.train + self.validate + self.test)
        else:
            raise InvalidArgumentError("Unknown subset {!r}; expected train, validate, test or all".format(name))


DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@icontract.ensure(
    lambda count, result: sorted(result.train + result.validate + result.test) == list(range(count)),
    "the subsets partition the records")
def split_dataset(count: int, ratios: Tuple[float, float, float] = DEFAULT_RATIOS, seed: int = 0) -> Split:
    """
    Shuffle the record indices and cut them into contiguous training, validation and test subsets.

    The validation and test sizes are floored; the remainder goes to training.

    :raise EmptyDatasetError: if there are no records
    :raise InvalidArgumentError: if the ratios are not positive or do not sum to 1
    """
    if count == 0:
        raise EmptyDatasetError("Can not split an empty repository.")

    if any(ratio <= 0.0 for ratio in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidArgumentError("Expected positive ratios summing to 1, but got: {}".format(list(ratios)))

    order = SplitMix64(seed=seed).permutation(count)
    validate_size = int(math.floor(count * ratios[1] + 1e-9))
    test_size = int(math.floor(count * ratios[2] + 1e-9))
    train_size = count - validate_size - test_size

    return Split(
        train=order[:train_size],
        validate=order[train_size:train_size + validate_size],
        test=order[train_size + validate_size:])


def serialize_split(split: Split) -> str:
    """Serialize the split as JSON."""
    return json.dumps(
        collections.OrderedDict([('train', split.train), ('validate', split.validate), ('test', split.test)]),
        indent=2) + '\n'


def parse_split(text: str, count: int, filename: str = '<split>') -> Split:
    """
    Parse the split serialized by :func:`serialize_split` and check it against the number of records.

    :raise ParseError: if the JSON is malformed or the subsets do not partition the records
    """
    try:
        mapping = json.loads(text)
        split = Split(
            train=[int(index) for index in mapping['train']],
            validate=[int(index) for index in mapping['validate']],
            test=[int(index) for index in mapping['test']])
    except (ValueError, KeyError, TypeError) as err:
        raise ParseError("The split is malformed: {}".format(err), filename=filename) from err

    if sorted(split.train + split.validate + split.test) != list(range(count)):
        raise ParseError(
            "The split does not partition the {} record(s) of the repository".format(count), filename=filename)

    return split


# endregion

# region Preprocessing


def resize_bilinear(values: Tensor, new_width: int, new_height: int) -> Tensor:
    """
    Resample the height × width array with bilinear interpolation.

    Pixel centers are aligned: the output pixel x samples the input at ``(x + 0.5) · width / new_width - 0.5``,
    clamped to the valid range.
    """
    height, width = values.shape

    def coordinates(new_size: int, size: int) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.int64], Tensor]:
        source = (np.arange(new_size, dtype=np.float64) + 0.5) * (size / new_size) - 0.5
        source = np.clip(source, 0.0, size - 1)
        lower = np.floor(source).astype(np.int64)
        upper = np.minimum(lower + 1, size - 1)
        return lower, upper, source - lower

    x0, x1, fx = coordinates(new_width, width)
    y0, y1, fy = coordinates(new_height, height)

    top = values[y0][:, x0] * (1.0 - fx) + values[y0][:, x1] * fx
    bottom = values[y1][:, x0] * (1.0 - fx) + values[y1][:, x1] * fx
    return top * (1.0 - fy)[:, np.newaxis] + bottom * fy[:, np.newaxis]


def fit_to_canvas(image: GrayImage, width: int = INPUT_WIDTH, height: int = INPUT_HEIGHT) -> Tensor:
    """
    Scale the image preserving its aspect ratio so that it fits the canvas and place it at the left edge.

    The result is a height × width array of gray levels in [0, 255] on a white background.
    """
    scale = min(width / image.width, height / image.height)
    new_width = min(width, max(1, int(math.floor(image.width * scale + 0.5))))
    new_height = min(height, max(1, int(math.floor(image.height * scale + 0.5))))

    canvas = np.full((height, width), 255.0, dtype=np.float64)
    canvas[:new_height, :new_width] = resize_bilinear(image.pixels.astype(np.float64), new_width, new_height)
    return canvas


@icontract.ensure(lambda width, height, result: result.shape == (width, height))
def preprocess_resize(image: GrayImage, width: int = INPUT_WIDTH, height: int = INPUT_HEIGHT) -> Tensor:
    """
    Prepare the image as the network input of shape width × height.

    The image is fitted to the canvas with :func:`fit_to_canvas`, mapped to [0, 1] and standardized to zero mean
    and unit variance; a blank image becomes all zeros.

    :raise InvalidArgumentError: if the image has a zero extent
    """
    if image.pixels.ndim != 2 or image.pixels.shape[0] == 0 or image.pixels.shape[1] == 0:
        raise InvalidArgumentError("Expected an image with positive extents, but got the shape {}".format(
            list(image.pixels.shape)))

    values = fit_to_canvas(image, width=width, height=height) / 255.0
    values = (values - np.mean(values)) / max(float(np.std(values)), 1e-8)
    return np.ascontiguousarray(values.T)


# endregion

# region Image files


def export_images(repository: Repository, directory: pathlib.Path) -> List[pathlib.Path]:
    """
    Write every image as a separate PNG file together with a ``labels.tsv`` listing the file names and the words.

    :return: paths to the written images in record order
    """
    directory.mkdir(parents=True, exist_ok=True)

    paths = []  # type: List[pathlib.Path]
    lines = []  # type: List[str]
    for index, record in enumerate(repository.records):
        path = directory / "{:06d}.png".format(index)
        PIL.Image.fromarray(repository.image(index).pixels).save(str(path))
        paths.append(path)
        lines.append("{}\t{}\t{}\t{}\t{}\n".format(path.name, record.word, record.font_id, record.style.value,
                                                   record.size_pt))

    (directory / "labels.tsv").write_bytes(''.join(lines).encode('utf-8'))
    return paths


def load_image_file(path: pathlib.Path) -> GrayImage:
    """Read a raster image file and convert it to grayscale."""
    with PIL.Image.open(str(path)) as image:
        pixels = np.asarray(image.convert('L'), dtype=np.uint8)

    return GrayImage(pixels=np.ascontiguousarray(pixels))


def parse_image_list(text: str, base_directory: pathlib.Path, filename: str = '<image list>') -> List[Sample]:
    """
    Parse a list of externally rendered images and load them as samples.

    Every line is ``path<TAB>word`` optionally followed by ``<TAB>font_id<TAB>style<TAB>size_pt``; relative paths
    are resolved against ``base_directory``. This is the format :func:`export_images` writes.

    :raise ParseError: if a line is malformed
    """
    style_values = {style.value: style for style in Style}

    samples = []  # type: List[Sample]
    for lineno, line in enumerate(text.split('\n'), start=1):
        if line.strip() == '':
            continue

        fields = line.split('\t')
        if len(fields) not in (2, 5):
            raise ParseError(
                "Expected 2 or 5 tab-separated fields, but got {}: {!r}".format(len(fields), line),
                filename=filename,
                lineno=lineno)

        font_id, style, size_pt = 0, Style.BOLD, 26
        if len(fields) == 5:
            font_id = _parse_int(fields[2], 'font_id', filename, lineno)
            if fields[3] not in style_values:
                raise ParseError(
                    "Expected a style in {}, but got: {!r}".format(sorted(style_values), fields[3]),
                    filename=filename,
                    lineno=lineno)
            style = style_values[fields[3]]
            size_pt = _parse_int(fields[4], 'size_pt', filename, lineno)

        if fields[1] == '':
            raise ParseError("Expected a non-empty word", filename=filename, lineno=lineno)

        path = pathlib.Path(fields[0])
        if not path.is_absolute():
            path = base_directory / path

        samples.append(
            Sample(word=fields[1], font_id=font_id, style=style, size_pt=max(1, size_pt), image=load_image_file(path)))

    return samples


# endregion
