"""
Compute the connectionist temporal classification (CTC) loss, its gradient and the best-path decoding.

The logits are given as a matrix of time steps × (V + 1) classes where the last class is the blank. The recursions
run in log space over the extended label (the label with blanks interleaved).

>>> result = ctc_loss(np.zeros((1, 2)), label=[0])
>>> round(result.loss, 6)
0.693147
>>> best_path_decode(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
[0, 0]
"""
from typing import List, Sequence

import icontract
import numpy as np

from qocr.errors import DimensionError, InfeasibleLabelError, InvalidArgumentError
from qocr.tensor import Tensor

LabelSequence = List[int]
"""Represent a label as the indices of its symbols in the vocabulary; the blank never occurs."""


class CtcResult:
    """Represent the loss (negative log-probability of the label) and its gradient with respect to the logits."""

    @icontract.require(lambda loss: loss >= 0.0)
    def __init__(self, loss: float, grad_logits: Tensor) -> None:
        """Initialize with the given values."""
        self.loss = loss
        self.grad_logits = grad_logits


def count_repeats(label: Sequence[int]) -> int:
    """Count the adjacent repeated symbols; each of them needs a separating blank."""
    return sum(1 for previous, current in zip(label, label[1:]) if previous == current)


@icontract.require(lambda steps: steps >= 0)
def is_feasible(steps: int, label: Sequence[int]) -> bool:
    """Check that the label can be emitted in ``steps`` time steps."""
    return steps >= len(label) + count_repeats(label)


@icontract.require(lambda blank: blank >= 0)
def collapse(path: Sequence[int], blank: int) -> LabelSequence:
    """Merge the adjacent repeats of the path and delete the blanks."""
    result = []  # type: LabelSequence
    previous = None
    for index in path:
        if index != previous and index != blank:
            result.append(int(index))
        previous = index

    return result


def log_softmax(logits: Tensor) -> Tensor:
    """Normalize each row of the logits to log-probabilities."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _extend(label: Sequence[int], blank: int) -> List[int]:
    """Interleave the label with blanks: (blank, l1, blank, l2, ..., blank)."""
    extended = [blank] * (2 * len(label) + 1)
    extended[1::2] = list(label)
    return extended


@icontract.ensure(lambda logits, result: result.grad_logits.shape == logits.shape)
def ctc_loss(logits: Tensor, label: Sequence[int]) -> CtcResult:
    """
    Compute the negative log-probability of ``label`` summed over all the alignments that collapse to it.

    The gradient is taken with respect to the pre-softmax logits and obtained from the forward (α) and the backward
    (β) variables.

    :raise InfeasibleLabelError: if the label can not be aligned in the given number of time steps
    """
    if logits.ndim != 2 or logits.shape[0] < 1 or logits.shape[1] < 2:
        raise DimensionError("Expected logits of shape time × (V + 1) with time >= 1 and V >= 1, but got {}".format(
            list(logits.shape)))

    steps, classes = logits.shape
    blank = classes - 1

    for symbol in label:
        if not 0 <= symbol < blank:
            raise InvalidArgumentError("Expected the label symbols in [0, {}), but got: {}".format(blank, list(label)))

    if not is_feasible(steps=steps, label=label):
        raise InfeasibleLabelError(
            "The label of length {} with {} adjacent repeat(s) can not be aligned in {} time step(s)".format(
                len(label), count_repeats(label), steps))

    log_probs = log_softmax(logits)

    extended = np.array(_extend(label, blank), dtype=np.int64)
    size = len(extended)

    can_skip = np.zeros(size, dtype=bool)
    if size > 2:
        can_skip[2:] = (extended[2:] != blank) & (extended[2:] != extended[:-2])

    emissions = log_probs[:, extended]  # steps × size

    alpha = np.full((steps, size), -np.inf)
    alpha[0, 0] = emissions[0, 0]
    if size > 1:
        alpha[0, 1] = emissions[0, 1]

    for t in range(1, steps):
        previous = alpha[t - 1]
        summed = previous.copy()
        summed[1:] = np.logaddexp(summed[1:], previous[:-1])
        summed[2:] = np.where(can_skip[2:], np.logaddexp(summed[2:], previous[:-2]), summed[2:])
        alpha[t] = summed + emissions[t]

    beta = np.full((steps, size), -np.inf)
    beta[steps - 1, size - 1] = emissions[steps - 1, size - 1]
    if size > 1:
        beta[steps - 1, size - 2] = emissions[steps - 1, size - 2]

    for t in range(steps - 2, -1, -1):
        following = beta[t + 1]
        summed = following.copy()
        summed[:-1] = np.logaddexp(summed[:-1], following[1:])
        summed[:-2] = np.where(can_skip[2:], np.logaddexp(summed[:-2], following[2:]), summed[:-2])
        beta[t] = summed + emissions[t]

    if size > 1:
        log_likelihood = float(np.logaddexp(alpha[steps - 1, size - 1], alpha[steps - 1, size - 2]))
    else:
        log_likelihood = float(alpha[steps - 1, 0])

    # Both α and β include the emission at t, hence it is subtracted once.
    log_occupation = alpha + beta - emissions - log_likelihood
    occupation = np.exp(log_occupation)

    one_hot = np.zeros((size, classes), dtype=np.float64)
    one_hot[np.arange(size), extended] = 1.0

    grad_logits = np.exp(log_probs) - occupation @ one_hot

    return CtcResult(loss=max(0.0, -log_likelihood), grad_logits=grad_logits)


def best_path_decode(logits: Tensor) -> LabelSequence:
    """
    Take the most probable class at each step, merge the adjacent repeats and delete the blanks.

    Ties go to the lowest class index. The blank is the last class.
    """
    if logits.ndim != 2 or logits.shape[1] < 1:
        raise DimensionError("Expected logits of shape time × (V + 1), but got {}".format(list(logits.shape)))

    path = np.argmax(logits, axis=1)
    return collapse(path=[int(index) for index in path], blank=logits.shape[1] - 1)
