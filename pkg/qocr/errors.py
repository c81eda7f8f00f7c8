"""Define the errors raised by the recognition engine."""
import collections
import enum
from typing import Optional, TypedDict, cast

import icontract


class ErrorID(enum.Enum):
    """Enumerate error identifiers."""

    DIMENSION = "dimension"
    INFEASIBLE_LABEL = "infeasible-label"
    PARSE = "parse"
    VOCABULARY = "vocabulary"
    INVALID_ARGUMENT = "invalid-argument"
    CONSTRUCTION = "construction"
    CHECKPOINT_VERSION = "checkpoint-version"
    CHECKPOINT_CORRUPT = "checkpoint-corrupt"
    CHECKPOINT_MISMATCH = "checkpoint-mismatch"
    EMPTY_DATASET = "empty-dataset"


class _ErrorMappingRequired(TypedDict):
    """Represent the required fields of an error given as a mapping."""

    identifier: str  #: identifier of the error
    description: str  #: verbose description of the error


class ErrorMapping(_ErrorMappingRequired, total=False):
    """Represent an error given as a mapping."""

    filename: str
    lineno: int


class QocrError(Exception):
    """
    Represent an error of the recognition engine.

    The string representation is a single line so that it can be parsed by the callers of the command-line tool.
    """

    #: identifier of the error; overridden by the subclasses
    identifier = ErrorID.INVALID_ARGUMENT

    @icontract.require(lambda description: len(description) > 0)
    @icontract.require(lambda filename: filename is None or len(filename) > 0)
    @icontract.require(lambda lineno: lineno is None or lineno >= 1)
    def __init__(self, description: str, filename: Optional[str] = None, lineno: Optional[int] = None) -> None:
        """Initialize with the given values."""
        super().__init__(description)
        self.description = description
        self.filename = filename
        self.lineno = lineno

    def as_mapping(self) -> ErrorMapping:
        """Transform the error to a mapping that can be converted to JSON and similar formats."""
        # yapf: disable
        result: ErrorMapping = cast(
            ErrorMapping,
            collections.OrderedDict([
                ('identifier', str(self.identifier.value)),
                ('description', self.description)
            ]))
        # yapf: enable

        if self.filename is not None:
            result['filename'] = self.filename

        if self.lineno is not None:
            result['lineno'] = self.lineno

        return result

    def __str__(self) -> str:
        """Render the error as a single line."""
        prefix = ''
        if self.filename is not None and self.lineno is not None:
            prefix = "{}:{}: ".format(self.filename, self.lineno)
        elif self.filename is not None:
            prefix = "{}: ".format(self.filename)

        description = ' '.join(self.description.splitlines())
        return "{}{} ({})".format(prefix, description, self.identifier.value)


class DimensionError(QocrError):
    """Signal that the shapes of the operands are incompatible."""

    identifier = ErrorID.DIMENSION


class InfeasibleLabelError(QocrError):
    """Signal that a label can not be aligned to the given number of time steps."""

    identifier = ErrorID.INFEASIBLE_LABEL

    def __init__(self, description: str, record_index: Optional[int] = None) -> None:
        """Initialize with the description and the offending record, if known."""
        super().__init__(description=description)
        self.record_index = record_index


class ParseError(QocrError):
    """Signal that a file could not be parsed."""

    identifier = ErrorID.PARSE


class VocabularyError(QocrError):
    """Signal that a symbol is missing in the vocabulary or the vocabulary is invalid."""

    identifier = ErrorID.VOCABULARY


class InvalidArgumentError(QocrError):
    """Signal that an argument is out of its valid range."""

    identifier = ErrorID.INVALID_ARGUMENT


class ConstructionError(QocrError):
    """Signal that a model configuration does not produce a valid network."""

    identifier = ErrorID.CONSTRUCTION


class CheckpointVersionError(QocrError):
    """Signal that the checkpoint was written in an unsupported format version."""

    identifier = ErrorID.CHECKPOINT_VERSION


class CorruptCheckpointError(QocrError):
    """Signal that a checkpoint section is truncated or malformed."""

    identifier = ErrorID.CHECKPOINT_CORRUPT


class CheckpointMismatchError(QocrError):
    """Signal that the checkpoint sections are inconsistent with each other."""

    identifier = ErrorID.CHECKPOINT_MISMATCH


class EmptyDatasetError(QocrError):
    """Signal that an operation received no samples to work with."""

    identifier = ErrorID.EMPTY_DATASET
