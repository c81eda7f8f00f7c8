"""Map the symbols of the text to the class indices of the network and back."""
import pathlib
from typing import List, Sequence, Set

import icontract

from qocr.errors import ParseError, VocabularyError

# Arabic letters, their hamza and final forms, tatweel and the lam-alef ligature.
DEFAULT_SYMBOLS = (
    'ا', 'ب', 'ت', 'ث', 'ج', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'س', 'ش', 'ص', 'ض', 'ط', 'ظ', 'ع', 'غ', 'ف', 'ق', 'ك', 'ل',
    'م', 'ن', 'ه', 'و', 'ي', 'ء', 'آ', 'أ', 'ؤ', 'إ', 'ئ', 'ة', 'ى', 'ـ', 'ﻻ')


@icontract.invariant(lambda self: len(self.symbols) == len(set(self.symbols)), "no duplicate symbols")
@icontract.invariant(lambda self: all(len(symbol) == 1 for symbol in self.symbols))
class Vocabulary:
    """
    Represent the ordered set of recognizable symbols.

    The blank of the CTC layer is not a symbol; its class index is ``len(symbols)``.

    >>> vocabulary = Vocabulary(symbols=['a', 'b'])
    >>> vocabulary.encode('ba')
    [1, 0]
    >>> vocabulary.blank
    2
    """

    def __init__(self, symbols: Sequence[str]) -> None:
        """
        Initialize with the symbols in the order of their class indices.

        :raise VocabularyError: if the symbols are empty, duplicated, not single characters or whitespace
        """
        if len(symbols) == 0:
            raise VocabularyError("The vocabulary must contain at least one symbol.")

        seen = set()  # type: Set[str]
        for symbol in symbols:
            if len(symbol) != 1 or symbol.isspace():
                raise VocabularyError(
                    "Expected every symbol to be a single non-whitespace character, but got: {!r}".format(symbol))
            if symbol in seen:
                raise VocabularyError("The symbol {!r} is duplicated in the vocabulary.".format(symbol))
            seen.add(symbol)

        self.symbols = tuple(symbols)
        self._index = {symbol: i for i, symbol in enumerate(self.symbols)}

    @property
    def blank(self) -> int:
        """Give the class index of the CTC blank."""
        return len(self.symbols)

    def __len__(self) -> int:
        """Give the number of symbols V (without the blank)."""
        return len(self.symbols)

    def __eq__(self, other: object) -> bool:
        """Compare the symbols in order."""
        return isinstance(other, Vocabulary) and self.symbols == other.symbols

    def contains(self, symbol: str) -> bool:
        """Check whether the symbol is part of the vocabulary."""
        return symbol in self._index

    def encode(self, word: str) -> List[int]:
        """
        Translate the word to the class indices.

        :raise VocabularyError: if a symbol of the word is not in the vocabulary
        """
        result = []  # type: List[int]
        for symbol in word:
            index = self._index.get(symbol, None)
            if index is None:
                raise VocabularyError("The symbol {!r} of the word {!r} is not in the vocabulary.".format(symbol, word))
            result.append(index)

        return result

    @icontract.require(lambda self, indices: all(0 <= index < len(self.symbols) for index in indices))
    def decode(self, indices: Sequence[int]) -> str:
        """Translate the class indices to a word."""
        return ''.join(self.symbols[index] for index in indices)


def default_vocabulary() -> Vocabulary:
    """Give the default vocabulary of 38 symbols."""
    return Vocabulary(symbols=DEFAULT_SYMBOLS)


def parse_vocabulary(text: str, filename: str = '<vocabulary>') -> Vocabulary:
    """
    Parse the vocabulary from the text with one symbol per line; the order defines the class indices.

    :raise ParseError: if a line does not contain exactly one symbol
    """
    symbols = []  # type: List[str]
    for lineno, line in enumerate(text.split('\n'), start=1):
        if line == '':
            continue

        if len(line) != 1:
            raise ParseError(
                "Expected a single symbol on the line, but got: {!r}".format(line), filename=filename, lineno=lineno)

        symbols.append(line)

    return Vocabulary(symbols=symbols)


def read_vocabulary(path: pathlib.Path) -> Vocabulary:
    """Read the vocabulary from a UTF-8 file with one symbol per line."""
    return parse_vocabulary(text=path.read_text(encoding='utf-8'), filename=str(path))


def write_vocabulary(vocabulary: Vocabulary, path: pathlib.Path) -> None:
    """Write the vocabulary as a UTF-8 file with one symbol per line."""
    path.write_bytes(serialize_vocabulary(vocabulary).encode('utf-8'))


def serialize_vocabulary(vocabulary: Vocabulary) -> str:
    """Serialize the vocabulary with one symbol per line."""
    return ''.join(symbol + '\n' for symbol in vocabulary.symbols)
