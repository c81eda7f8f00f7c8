"""
Provide the dense array primitives consumed by the layers.

Tensors are double-precision, row-major ``numpy`` arrays. The functions check the shapes explicitly and raise
:class:`qocr.errors.DimensionError` naming the offending shapes.

>>> a = np.array([[1.0, 2.0], [3.0, 4.0]])
>>> b = np.array([[5.0, 6.0], [7.0, 8.0]])
>>> matmul(a, b).tolist()
[[19.0, 22.0], [43.0, 50.0]]
"""
import enum
from typing import Optional, Tuple

import icontract
import numpy as np
import numpy.typing as npt

from qocr.errors import DimensionError, InvalidArgumentError

Tensor = npt.NDArray[np.float64]
"""Represent an N-dimensional real-valued array of double precision."""

Shape = Tuple[int, ...]


class ElementwiseOp(enum.Enum):
    """Enumerate the point-wise binary operations."""

    ADD = "add"
    SUB = "sub"
    MUL = "mul"


class ReduceOp(enum.Enum):
    """Enumerate the reductions along an axis."""

    SUM = "sum"
    MAX = "max"
    MEAN = "mean"


class Reduction:
    """Represent the result of a reduction; ``indices`` are set only for the maximum."""

    def __init__(self, values: Tensor, indices: Optional[npt.NDArray[np.int64]] = None) -> None:
        """Initialize with the given values."""
        self.values = values
        self.indices = indices


def is_finite(tensor: Tensor) -> bool:
    """Check that all the values are neither NaN nor infinite."""
    return bool(np.all(np.isfinite(tensor)))


@icontract.require(lambda shape: all(extent > 0 for extent in shape))
@icontract.ensure(lambda shape, result: result.shape == tuple(shape))
def zeros(shape: Shape) -> Tensor:
    """Create a tensor of zeros."""
    return np.zeros(shape, dtype=np.float64)


def as_tensor(values: npt.ArrayLike) -> Tensor:
    """Convert ``values`` to a contiguous double-precision tensor."""
    return np.ascontiguousarray(values, dtype=np.float64)


@icontract.ensure(lambda result: is_finite(result))
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Multiply the matrices ``a`` (m×k) and ``b`` (k×n)."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("Expected matrices m×k and k×n, but got the shapes {} and {}".format(
            list(a.shape), list(b.shape)))

    return np.matmul(a, b)


@icontract.ensure(lambda result: is_finite(result))
def elementwise(a: Tensor, b: Tensor, op: ElementwiseOp) -> Tensor:
    """
    Apply ``op`` point-wise.

    The operand ``b`` is either of the same shape as ``a`` or a vector along the last axis of ``a`` which is then
    repeated along the leading axes (*e.g.*, a bias).
    """
    same_shape = a.shape == b.shape
    bias_broadcast = b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]

    if not same_shape and not bias_broadcast:
        raise DimensionError("Expected equal shapes or a bias along the last axis, but got the shapes {} and {}".format(
            list(a.shape), list(b.shape)))

    if op == ElementwiseOp.ADD:
        return a + b
    elif op == ElementwiseOp.SUB:
        return a - b
    elif op == ElementwiseOp.MUL:
        return a * b
    else:
        raise NotImplementedError("Unhandled op: {}".format(op))


@icontract.ensure(lambda a, result: result.values.ndim == a.ndim - 1)
@icontract.ensure(lambda op, result: (op == ReduceOp.MAX) == (result.indices is not None))
def reduce(a: Tensor, axis: int, op: ReduceOp) -> Reduction:
    """
    Reduce ``a`` along ``axis``.

    The maximum also returns the index of the winning element in each slot; ties go to the lowest index.
    """
    if not 0 <= axis < a.ndim:
        raise InvalidArgumentError("Expected an axis in [0, {}), but got: {}".format(a.ndim, axis))

    if op == ReduceOp.SUM:
        return Reduction(values=np.sum(a, axis=axis))
    elif op == ReduceOp.MEAN:
        return Reduction(values=np.mean(a, axis=axis))
    elif op == ReduceOp.MAX:
        indices = np.argmax(a, axis=axis)
        values = np.take_along_axis(a, np.expand_dims(indices, axis=axis), axis=axis)
        return Reduction(values=np.squeeze(values, axis=axis), indices=indices.astype(np.int64))
    else:
        raise NotImplementedError("Unhandled op: {}".format(op))
