"""
Measure the recognition quality.

The character recognition rate (CRR) is one minus the total edit distance over the total number of ground-truth
characters; the word recognition rate (WRR) is the fraction of exactly recognized words.

>>> levenshtein("kitten", "sitting")
3
>>> crr([("abcd", "abcd"), ("ab", "ax")])
0.8333333333333334
>>> wrr([("abcd", "abcd"), ("ab", "ax")])
0.5
"""
import collections
import csv
import io
import pathlib
from typing import Any, List, Optional, Sequence, TextIO, Tuple

import icontract
import numpy as np

from qocr import model
from qocr.dataset import Repository
from qocr.errors import EmptyDatasetError, ParseError

Pair = Tuple[str, str]
"""Represent a ground truth and its prediction."""


@icontract.ensure(lambda a, b, result: abs(len(a) - len(b)) <= result <= max(len(a), len(b)))
def levenshtein(a: str, b: str) -> int:
    """Compute the minimal number of unit-cost insertions, deletions and substitutions turning ``a`` into ``b``."""
    if len(a) < len(b):
        a, b = b, a

    previous = list(range(len(b) + 1))
    for i, symbol_a in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, symbol_b in enumerate(b, start=1):
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (symbol_a != symbol_b))
        previous = current

    return previous[-1]


def _totals(pairs: Sequence[Pair]) -> Tuple[int, int]:
    total_chars = sum(len(truth) for truth, _ in pairs)
    total_distance = sum(levenshtein(prediction, truth) for truth, prediction in pairs)
    return total_chars, total_distance


def crr_raw(pairs: Sequence[Pair]) -> float:
    """
    Compute the unclamped character recognition rate; it is negative if the predictions are much longer.

    :raise EmptyDatasetError: if the ground truth contains no characters
    """
    total_chars, total_distance = _totals(pairs)
    if total_chars == 0:
        raise EmptyDatasetError("The character recognition rate needs at least one ground-truth character.")

    return 1.0 - total_distance / total_chars


@icontract.ensure(lambda result: 0.0 <= result <= 1.0)
def crr(pairs: Sequence[Pair]) -> float:
    """
    Compute the character recognition rate over the (ground truth, prediction) pairs clamped below at 0.

    The distances are aggregated over the whole corpus, so longer words weigh more.

    :raise EmptyDatasetError: if the ground truth contains no characters
    """
    return max(0.0, crr_raw(pairs))


@icontract.ensure(lambda result: 0.0 <= result <= 1.0)
def wrr(pairs: Sequence[Pair]) -> float:
    """
    Compute the word recognition rate: the fraction of pairs whose prediction equals the ground truth.

    :raise EmptyDatasetError: if there are no pairs
    """
    if len(pairs) == 0:
        raise EmptyDatasetError("The word recognition rate needs at least one sample.")

    return sum(1 for truth, prediction in pairs if truth == prediction) / len(pairs)


class SampleResult:
    """Represent the recognition of a single sample."""

    def __init__(self, index: int, truth: str, prediction: str, distance: int) -> None:
        """Initialize with the given values."""
        self.index = index
        self.truth = truth
        self.prediction = prediction
        self.distance = distance


CSV_HEADER = ['dataset', 'samples', 'total_chars', 'total_distance', 'crr', 'wrr']


@icontract.invariant(lambda self: 0.0 <= self.crr <= 1.0 and 0.0 <= self.wrr <= 1.0)
@icontract.invariant(lambda self: self.samples >= 1 and self.total_chars >= 1)
class EvalReport:
    """Summarize the recognition quality on a set of samples."""

    # pylint: disable=too-many-arguments
    def __init__(self,
                 dataset: str,
                 samples: int,
                 total_chars: int,
                 total_distance: int,
                 crr: float,
                 wrr: float,
                 crr_raw: Optional[float] = None,
                 details: Optional[List[SampleResult]] = None) -> None:
        """Initialize with the given values; ``crr_raw`` defaults to ``crr``."""
        # pylint: disable=redefined-outer-name
        self.dataset = dataset
        self.samples = samples
        self.total_chars = total_chars
        self.total_distance = total_distance
        self.crr = crr
        self.wrr = wrr
        self.crr_raw = crr_raw if crr_raw is not None else crr
        self.details = details

    def to_row(self) -> List[str]:
        """Represent the report as a CSV row in the order of :data:`CSV_HEADER`."""
        return [
            self.dataset,
            str(self.samples),
            str(self.total_chars),
            str(self.total_distance), "{:.6f}".format(self.crr), "{:.6f}".format(self.wrr)
        ]


def report_from_pairs(dataset: str, pairs: Sequence[Pair], indices: Optional[Sequence[int]] = None,
                      keep_details: bool = False) -> EvalReport:
    """
    Aggregate the (ground truth, prediction) pairs into a report.

    :raise EmptyDatasetError: if there are no pairs or no ground-truth characters
    """
    if len(pairs) == 0:
        raise EmptyDatasetError("Can not evaluate the empty set {!r}.".format(dataset))

    total_chars, total_distance = _totals(pairs)
    raw = crr_raw(pairs)

    details = None  # type: Optional[List[SampleResult]]
    if keep_details:
        details = [
            SampleResult(
                index=indices[i] if indices is not None else i,
                truth=truth,
                prediction=prediction,
                distance=levenshtein(prediction, truth)) for i, (truth, prediction) in enumerate(pairs)
        ]

    return EvalReport(
        dataset=dataset,
        samples=len(pairs),
        total_chars=total_chars,
        total_distance=total_distance,
        crr=max(0.0, raw),
        wrr=wrr(pairs),
        crr_raw=raw,
        details=details)


def evaluate_dataset(state: model.TrainingState,
                     repository: Repository,
                     indices: Sequence[int],
                     dataset: str = '',
                     keep_details: bool = False,
                     batch_size: int = 32) -> EvalReport:
    """
    Recognize the selected samples of the repository and aggregate their CRR and WRR.

    The network runs in inference mode, so evaluating does not change the state.

    :raise EmptyDatasetError: if no indices are given
    """
    if len(indices) == 0:
        raise EmptyDatasetError("Can not evaluate the empty set {!r}.".format(dataset))

    pairs = []  # type: List[Pair]
    for start in range(0, len(indices), batch_size):
        chunk = indices[start:start + batch_size]
        batch = np.stack([model.preprocess(state, repository.image(index)) for index in chunk])
        predictions = model.recognize_batch(state, batch)
        pairs.extend((repository.records[index].word, prediction) for index, prediction in zip(chunk, predictions))

    return report_from_pairs(dataset=dataset, pairs=pairs, indices=indices, keep_details=keep_details)


def write_reports(reports: Sequence[EvalReport], stream: TextIO) -> None:
    """Write the reports as CSV with a header."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for report in reports:
        writer.writerow(report.to_row())


def write_details(report: EvalReport, stream: TextIO) -> None:
    """Write the per-sample results of the report as CSV."""
    assert report.details is not None, "Expected the report to keep the details"
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(['index', 'truth', 'prediction', 'distance'])
    for result in report.details:
        writer.writerow([str(result.index), result.truth, result.prediction, str(result.distance)])


def _parse_field(value: str, kind: Any, name: str, filename: str, lineno: int) -> Any:
    try:
        return kind(value)
    except ValueError as err:
        raise ParseError(
            "Expected the column {} to be a {}, but got: {!r}".format(name, kind.__name__, value),
            filename=filename,
            lineno=lineno) from err


def parse_reports(text: str, filename: str = '<reports>') -> List[EvalReport]:
    """
    Parse the reports written by :func:`write_reports`.

    :raise ParseError: if the header or a row is malformed
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise ParseError(
            "Expected the header {}, but got: {}".format(','.join(CSV_HEADER), ','.join(rows[0]) if rows else ''),
            filename=filename,
            lineno=1)

    reports = []  # type: List[EvalReport]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue

        if len(row) != len(CSV_HEADER):
            raise ParseError(
                "Expected {} columns, but got {}".format(len(CSV_HEADER), len(row)), filename=filename, lineno=lineno)

        values = collections.OrderedDict(zip(CSV_HEADER, row))
        samples = _parse_field(values['samples'], int, 'samples', filename, lineno)
        total_chars = _parse_field(values['total_chars'], int, 'total_chars', filename, lineno)
        total_distance = _parse_field(values['total_distance'], int, 'total_distance', filename, lineno)
        crr_value = _parse_field(values['crr'], float, 'crr', filename, lineno)
        wrr_value = _parse_field(values['wrr'], float, 'wrr', filename, lineno)

        if samples < 1 or total_chars < 1 or total_distance < 0:
            raise ParseError(
                "Expected positive counts and a non-negative distance", filename=filename, lineno=lineno)

        if not 0.0 <= crr_value <= 1.0 or not 0.0 <= wrr_value <= 1.0:
            raise ParseError("Expected the rates in [0, 1]", filename=filename, lineno=lineno)

        reports.append(
            EvalReport(
                dataset=values['dataset'],
                samples=samples,
                total_chars=total_chars,
                total_distance=total_distance,
                crr=crr_value,
                wrr=wrr_value))

    return reports


def read_reports(path: pathlib.Path) -> List[EvalReport]:
    """Read the reports from a CSV file."""
    return parse_reports(text=path.read_text(encoding='utf-8'), filename=str(path))
