"""Provide common functionality for the tests."""
import os
from typing import Callable, List, Tuple

import numpy as np

from qocr import model
from qocr.vocabulary import Vocabulary

FD_STEP = 1e-5


def slow_tests_enabled() -> bool:
    """Check whether the long-running acceptance tests should run."""
    return os.environ.get('QOCR_SLOW', '').lower() in ('1', 'true', 'yes', 'on')


def numeric_gradient(func: Callable[[], float], array: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Estimate the gradient of ``func`` with respect to ``array`` by central differences, perturbing it in place."""
    result = np.zeros_like(array)
    for index in np.ndindex(*array.shape):
        original = array[index]
        array[index] = original + step
        plus = func()
        array[index] = original - step
        minus = func()
        array[index] = original
        result[index] = (plus - minus) / (2.0 * step)

    return result


def numeric_gradient_at(func: Callable[[], float], array: np.ndarray, indices: List[Tuple[int, ...]],
                        step: float = FD_STEP) -> np.ndarray:
    """Estimate only the given entries of the gradient by central differences."""
    result = np.zeros(len(indices), dtype=np.float64)
    for i, index in enumerate(indices):
        original = array[index]
        array[index] = original + step
        plus = func()
        array[index] = original - step
        minus = func()
        array[index] = original
        result[i] = (plus - minus) / (2.0 * step)

    return result


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Compute the norm-based relative error between two gradient estimates."""
    difference = float(np.linalg.norm(np.ravel(analytic) - np.ravel(numeric)))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return difference / max(scale, 1e-12)


def tiny_vocabulary() -> Vocabulary:
    """Give a vocabulary of three symbols."""
    return Vocabulary(symbols=['a', 'b', 'c'])


def tiny_config(vocabulary_size: int = 3) -> model.ModelConfig:
    """Give a network on 8×4 inputs with two small blocks, 4 time steps and two recurrent layers of 3 units."""
    return model.ModelConfig(
        conv_specs=[
            model.ConvSpec(kernel=(3, 3), filters=2, pool=(2, 2)),
            model.ConvSpec(kernel=(3, 3), filters=3, pool=(1, 2)),
        ],
        hidden_size=3,
        lstm_layers=2,
        vocabulary_size=vocabulary_size,
        input_width=8,
        input_height=4)


def small_config(vocabulary_size: int) -> model.ModelConfig:
    """Give a network on 32×16 inputs with 8 time steps, small enough to train in a unit test."""
    return model.ModelConfig(
        conv_specs=[
            model.ConvSpec(kernel=(3, 3), filters=4, pool=(2, 2)),
            model.ConvSpec(kernel=(3, 3), filters=8, pool=(2, 2)),
            model.ConvSpec(kernel=(3, 3), filters=8, pool=(1, 4)),
        ],
        hidden_size=8,
        lstm_layers=1,
        vocabulary_size=vocabulary_size,
        input_width=32,
        input_height=16)
