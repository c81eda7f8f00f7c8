"""
Train the network on a repository with shuffled mini-batches and select the best state on the validation set.

The order of the samples is a function of the seed and the iteration counter only: the training indices are
shuffled once per epoch with a sub-stream keyed by the epoch. Hence a run resumed from a checkpoint continues
exactly where the interrupted run would have been.
"""
import logging
import math
from typing import Callable, Dict, List, Optional

import icontract
import numpy as np

from qocr import model
from qocr.dataset import Repository, Split
from qocr.errors import EmptyDatasetError
from qocr.metrics import EvalReport, evaluate_dataset
from qocr.prng import SplitMix64, derive_seed
from qocr.tensor import Tensor

LOGGER = logging.getLogger(__name__)

_EPOCH_KEY = 11


class Schedule:
    """Specify how long to train and how often to report."""

    @icontract.require(lambda iterations: iterations >= 0)
    @icontract.require(lambda log_every: log_every >= 1)
    def __init__(self, iterations: int, shuffle_seed: int = 0, log_every: int = 50,
                 evaluate_training: bool = False) -> None:
        """
        Initialize with the given values.

        :param iterations: total number of iterations; a resumed state continues up to this count
        :param shuffle_seed: seed of the per-epoch shuffling
        :param log_every: number of iterations between the progress messages
        :param evaluate_training: if set, the training CRR and WRR are reported at the end of every epoch as well
        """
        self.iterations = iterations
        self.shuffle_seed = shuffle_seed
        self.log_every = log_every
        self.evaluate_training = evaluate_training


class EpochReport:
    """Summarize one epoch of training."""

    def __init__(self, epoch: int, iteration: int, mean_loss: float, validation: Optional[EvalReport],
                 training: Optional[EvalReport]) -> None:
        """
        Initialize with the given values.

        :param epoch: zero-based index of the epoch
        :param iteration: value of the iteration counter at the end of the epoch
        :param mean_loss: mean of the batch losses during the epoch
        :param validation: evaluation on the validation set, if there is one
        :param training: evaluation on the training set, if requested
        """
        self.epoch = epoch
        self.iteration = iteration
        self.mean_loss = mean_loss
        self.validation = validation
        self.training = training


EPOCH_CSV_HEADER = ['epoch', 'iteration', 'mean_loss', 'validation_crr', 'validation_wrr', 'training_crr',
                    'training_wrr']


def epoch_row(report: EpochReport) -> List[str]:
    """Represent the epoch report as a CSV row in the order of :data:`EPOCH_CSV_HEADER`."""

    def rate(value: Optional[float]) -> str:
        return '' if value is None else "{:.6f}".format(value)

    return [
        str(report.epoch),
        str(report.iteration), "{:.6f}".format(report.mean_loss),
        rate(report.validation.crr if report.validation is not None else None),
        rate(report.validation.wrr if report.validation is not None else None),
        rate(report.training.crr if report.training is not None else None),
        rate(report.training.wrr if report.training is not None else None)
    ]


class TrainingReport:
    """Represent the outcome of a training run."""

    def __init__(self, state: model.TrainingState, best: model.TrainingState, epochs: List[EpochReport],
                 losses: List[float]) -> None:
        """
        Initialize with the given values.

        :param state: state after the last iteration
        :param best: snapshot with the highest validation CRR (the last state if there is no validation set)
        :param epochs: per-epoch reports
        :param losses: batch loss of every iteration run in this call
        """
        self.state = state
        self.best = best
        self.epochs = epochs
        self.losses = losses


@icontract.require(lambda count, batch_size: count >= 1 and batch_size >= 1)
def batch_indices(iteration: int, count: int, batch_size: int, seed: int) -> List[int]:
    """
    Determine the positions in the training subset of the batch at the given iteration.

    Every epoch covers all the positions exactly once; the last batch of an epoch may be smaller.
    """
    batches_per_epoch = int(math.ceil(count / batch_size))
    epoch, position = divmod(iteration, batches_per_epoch)
    order = SplitMix64(seed=derive_seed(seed, _EPOCH_KEY, epoch)).permutation(count)
    return order[position * batch_size:(position + 1) * batch_size]


class _PreprocessedCache:
    """Preprocess each image and encode each label only once."""

    def __init__(self, state: model.TrainingState, repository: Repository) -> None:
        """Initialize with the state defining the input extents and the vocabulary."""
        self.state = state
        self.repository = repository
        self.images = dict()  # type: Dict[int, Tensor]
        self.labels = dict()  # type: Dict[int, List[int]]

    def batch(self, indices: List[int]) -> Tensor:
        """Stack the preprocessed images of the records."""
        for index in indices:
            if index not in self.images:
                self.images[index] = model.preprocess(self.state, self.repository.image(index))

        return np.stack([self.images[index] for index in indices])

    def encoded(self, indices: List[int]) -> List[List[int]]:
        """Give the encoded labels of the records."""
        for index in indices:
            if index not in self.labels:
                self.labels[index] = self.state.vocabulary.encode(self.repository.records[index].word)

        return [self.labels[index] for index in indices]


def train(state: model.TrainingState,
          repository: Repository,
          split: Split,
          schedule: Schedule,
          on_epoch: Optional[Callable[[EpochReport, model.TrainingState], None]] = None,
          best: Optional[model.TrainingState] = None) -> TrainingReport:
    """
    Train the state in place until its iteration counter reaches ``schedule.iterations``.

    At the end of every epoch (and at the end of the run) the validation set is evaluated and the state with the
    best validation CRR so far is kept as a snapshot. The comparison starts from ``state.best_crr`` so that a
    resumed run replaces the earlier best only with a strictly better epoch.

    :param state: state to be trained; a state loaded from a checkpoint resumes at its iteration counter
    :param repository: samples
    :param split: partition of the samples; only ``split.train`` is used for the updates
    :param schedule: how long to train
    :param on_epoch: called after every epoch report, *e.g.*, to write the checkpoints
    :param best: snapshot of the best state of an earlier run, if resuming
    :raise EmptyDatasetError: if the training set is empty
    :raise InfeasibleLabelError: if a label can not be aligned to the time steps of the network
    :raise VocabularyError: if a word contains a symbol outside of the vocabulary
    """
    if len(split.train) == 0:
        raise EmptyDatasetError("The training set is empty.")

    cache = _PreprocessedCache(state=state, repository=repository)

    # All the labels are checked before the first update.
    model.check_feasible(state, cache.encoded(split.train), record_indices=split.train)

    batch_size = state.hyperparameters.batch_size
    batches_per_epoch = int(math.ceil(len(split.train) / batch_size))

    if best is None:
        if state.best_crr is not None:
            LOGGER.warning("The state reached its best validation CRR %.4f at iteration %d, but that snapshot is not "
                           "available; the state at iteration %d stands in for it.", state.best_crr,
                           state.best_iteration, state.iteration)
        best_snapshot = state.snapshot()
    else:
        best_snapshot = best.snapshot()

    best_crr = state.best_crr if state.best_crr is not None else -math.inf
    epochs = []  # type: List[EpochReport]
    losses = []  # type: List[float]
    epoch_losses = []  # type: List[float]

    def close_epoch() -> None:
        nonlocal best_snapshot, best_crr

        validation = None  # type: Optional[EvalReport]
        if len(split.validate) > 0:
            validation = evaluate_dataset(state, repository, split.validate, dataset='validate')

        training = None  # type: Optional[EvalReport]
        if schedule.evaluate_training:
            training = evaluate_dataset(state, repository, split.train, dataset='train')

        report = EpochReport(
            epoch=(state.iteration - 1) // batches_per_epoch,
            iteration=state.iteration,
            mean_loss=float(np.mean(epoch_losses)) if epoch_losses else math.nan,
            validation=validation,
            training=training)
        epochs.append(report)

        if validation is None:
            best_snapshot = state.snapshot()
        elif validation.crr > best_crr:
            best_crr = validation.crr
            state.record_best(best_crr)
            best_snapshot = state.snapshot()

        LOGGER.info("Epoch %d ended at iteration %d: mean loss %.4f, validation CRR %s, WRR %s", report.epoch,
                    report.iteration, report.mean_loss,
                    "{:.4f}".format(validation.crr) if validation is not None else "n/a",
                    "{:.4f}".format(validation.wrr) if validation is not None else "n/a")

        if on_epoch is not None:
            on_epoch(report, state)

        epoch_losses.clear()

    LOGGER.info("Training from iteration %d to %d on %d sample(s) in batches of %d", state.iteration,
                schedule.iterations, len(split.train), batch_size)

    while state.iteration < schedule.iterations:
        positions = batch_indices(
            iteration=state.iteration, count=len(split.train), batch_size=batch_size, seed=schedule.shuffle_seed)
        indices = [split.train[position] for position in positions]

        loss = model.train_step(state, cache.batch(indices), cache.encoded(indices), record_indices=indices)
        losses.append(loss)
        epoch_losses.append(loss)

        if state.iteration % schedule.log_every == 0:
            LOGGER.debug("Iteration %d: loss %.6f", state.iteration, loss)

        if state.iteration % batches_per_epoch == 0:
            close_epoch()

    if epoch_losses:
        close_epoch()

    return TrainingReport(state=state, best=best_snapshot, epochs=epochs, losses=losses)
