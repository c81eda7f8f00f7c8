"""
Implement the forward and backward passes of the network layers.

All layers accept a batch as the leading axis. Images are laid out as (width, height, channels) and sequences as
(time, features); a single image or sequence without the batch axis is accepted as well.

The backward passes return the exact gradients of the forward passes. The sub-gradient of ReLU at 0 is 0 and the
ties in max pooling go to the first scanned element of the window (width offset major, height offset minor).
"""
import enum
from typing import Optional, Tuple

import icontract
import numpy as np
import numpy.typing as npt

from qocr import tensor
from qocr.errors import DimensionError
from qocr.prng import SplitMix64
from qocr.tensor import Tensor


class Mode(enum.Enum):
    """Distinguish training from inference where the layers behave differently."""

    TRAIN = "train"
    INFER = "infer"


class Direction(enum.Enum):
    """Specify the direction in which a recurrent layer traverses the sequence."""

    FORWARD = "forward"
    BACKWARD = "backward"


def _batched(inputs: Tensor, rank: int) -> Tuple[Tensor, bool]:
    """Add the batch axis if ``inputs`` has only ``rank`` axes; return whether it was added."""
    if inputs.ndim == rank:
        return inputs[np.newaxis], True

    if inputs.ndim == rank + 1:
        return inputs, False

    raise DimensionError("Expected {} or {} axes, but got the shape {}".format(rank, rank + 1, list(inputs.shape)))


def _unbatched(outputs: Tensor, squeeze: bool) -> Tensor:
    return outputs[0] if squeeze else outputs


def sigmoid(values: Tensor) -> Tensor:
    """Compute the logistic function without overflow."""
    return 0.5 * (1.0 + np.tanh(0.5 * values))


# region Convolution


@icontract.invariant(lambda self: self.kernels.ndim == 4)
@icontract.invariant(lambda self: self.bias.shape == (self.kernels.shape[3], ))
class ConvParams:
    """Hold kernels (kernel height × kernel width × input channels × output channels) and per-channel biases."""

    def __init__(self, kernels: Tensor, bias: Tensor) -> None:
        """Initialize with the given values."""
        self.kernels = kernels
        self.bias = bias


class ConvGrads:
    """Hold the gradients of a convolution."""

    def __init__(self, grad_input: Tensor, grad_kernels: Tensor, grad_bias: Tensor) -> None:
        """Initialize with the given values."""
        self.grad_input = grad_input
        self.grad_kernels = grad_kernels
        self.grad_bias = grad_bias


def _check_conv(inputs: Tensor, params: ConvParams) -> None:
    if inputs.shape[-1] != params.kernels.shape[2]:
        raise DimensionError(
            "The input has {} channels, but the kernels expect {} (input shape {}, kernel shape {})".format(
                inputs.shape[-1], params.kernels.shape[2], list(inputs.shape), list(params.kernels.shape)))


def _pad_for(inputs: Tensor, params: ConvParams) -> Tensor:
    kernel_h, kernel_w = params.kernels.shape[0], params.kernels.shape[1]
    pad_w, pad_h = (kernel_w - 1) // 2, (kernel_h - 1) // 2
    return np.pad(inputs, ((0, 0), (pad_w, pad_w), (pad_h, pad_h), (0, 0)))


@icontract.require(
    lambda params: params.kernels.shape[0] % 2 == 1 and params.kernels.shape[1] % 2 == 1, "odd kernel extents")
@icontract.ensure(lambda inputs, params, result: result.shape[:-1] == inputs.shape[:-1])
@icontract.ensure(lambda params, result: result.shape[-1] == params.kernels.shape[3])
def conv2d_forward(inputs: Tensor, params: ConvParams) -> Tensor:
    """
    Convolve ``inputs`` (width × height × channels) with zero padding so that the spatial extents are preserved.

    The output at (x, y, co) is ``bias[co] + Σ_{i, j, ci} input[x + j - pw, y + i - ph, ci] · kernels[i, j, ci, co]``
    where pw and ph are the half-widths of the kernel.
    """
    batch, squeeze = _batched(inputs, rank=3)
    _check_conv(batch, params)

    count, width, height, _ = batch.shape
    kernel_h, kernel_w, _, channels_out = params.kernels.shape
    padded = _pad_for(batch, params)

    result = np.empty((count, width, height, channels_out), dtype=np.float64)
    result[...] = params.bias

    # Accumulate one kernel offset at a time so that no im2col buffer is needed.
    for i in range(kernel_h):
        for j in range(kernel_w):
            result += padded[:, j:j + width, i:i + height, :] @ params.kernels[i, j]

    return _unbatched(result, squeeze)


def conv2d_backward(inputs: Tensor, params: ConvParams, upstream: Tensor) -> ConvGrads:
    """Compute the gradients of :func:`conv2d_forward` given the gradient of its output."""
    batch, squeeze = _batched(inputs, rank=3)
    _check_conv(batch, params)

    upstream_batch, _ = _batched(upstream, rank=3)
    expected_shape = batch.shape[:-1] + (params.kernels.shape[3], )
    if upstream_batch.shape != expected_shape:
        raise DimensionError("Expected the upstream gradient of shape {}, but got {}".format(
            list(expected_shape), list(upstream_batch.shape)))

    _, width, height, _ = batch.shape
    kernel_h, kernel_w = params.kernels.shape[0], params.kernels.shape[1]
    pad_w, pad_h = (kernel_w - 1) // 2, (kernel_h - 1) // 2
    padded = _pad_for(batch, params)

    grad_padded = np.zeros_like(padded)
    grad_kernels = np.empty_like(params.kernels)
    for i in range(kernel_h):
        for j in range(kernel_w):
            window = padded[:, j:j + width, i:i + height, :]
            grad_kernels[i, j] = np.tensordot(window, upstream_batch, axes=([0, 1, 2], [0, 1, 2]))
            grad_padded[:, j:j + width, i:i + height, :] += upstream_batch @ params.kernels[i, j].T

    grad_input = grad_padded[:, pad_w:pad_w + width, pad_h:pad_h + height, :]

    return ConvGrads(
        grad_input=_unbatched(np.ascontiguousarray(grad_input), squeeze),
        grad_kernels=grad_kernels,
        grad_bias=np.sum(upstream_batch, axis=(0, 1, 2)))


# endregion

# region Batch normalization


@icontract.invariant(lambda self: bool(np.all(self.running_var >= 0.0)))
@icontract.invariant(lambda self: 0.0 < self.momentum < 1.0)
@icontract.invariant(lambda self: self.epsilon > 0.0)
class BatchNormParams:
    """Hold the scale, the shift and the running statistics of a per-channel batch normalization."""

    def __init__(self,
                 gamma: Tensor,
                 beta: Tensor,
                 running_mean: Tensor,
                 running_var: Tensor,
                 momentum: float = 0.9,
                 epsilon: float = 1e-5) -> None:
        """Initialize with the given values."""
        self.gamma = gamma
        self.beta = beta
        self.running_mean = running_mean
        self.running_var = running_var
        self.momentum = momentum
        self.epsilon = epsilon


class BatchNormCache:
    """Keep what the backward pass of a training-mode batch normalization needs."""

    def __init__(self, normalized: Tensor, inv_std: Tensor, gamma: Tensor) -> None:
        """Initialize with the given values."""
        self.normalized = normalized
        self.inv_std = inv_std
        self.gamma = gamma


class BatchNormOutput:
    """Represent the output of a batch normalization; the cache is only available in training mode."""

    def __init__(self, output: Tensor, cache: Optional[BatchNormCache]) -> None:
        """Initialize with the given values."""
        self.output = output
        self.cache = cache


class BatchNormGrads:
    """Hold the gradients of a batch normalization."""

    def __init__(self, grad_input: Tensor, grad_gamma: Tensor, grad_beta: Tensor) -> None:
        """Initialize with the given values."""
        self.grad_input = grad_input
        self.grad_gamma = grad_gamma
        self.grad_beta = grad_beta


@icontract.ensure(lambda mode, result: (mode == Mode.TRAIN) == (result.cache is not None))
def batchnorm(inputs: Tensor, params: BatchNormParams, mode: Mode) -> BatchNormOutput:
    """
    Normalize ``inputs`` per channel (the last axis) and apply the scale and the shift.

    In training mode the batch statistics over all the leading axes are used and the running statistics are updated
    in place with the momentum of ``params``. In inference mode the running statistics are used.
    """
    if inputs.ndim < 2 or inputs.shape[-1] != params.gamma.shape[0]:
        raise DimensionError("Expected {} channels along the last axis, but got the shape {}".format(
            params.gamma.shape[0], list(inputs.shape)))

    if mode == Mode.INFER:
        inv_std = 1.0 / np.sqrt(params.running_var + params.epsilon)
        output = (inputs - params.running_mean) * inv_std * params.gamma + params.beta
        return BatchNormOutput(output=output, cache=None)

    axes = tuple(range(inputs.ndim - 1))
    mean = np.mean(inputs, axis=axes)
    var = np.var(inputs, axis=axes)

    inv_std = 1.0 / np.sqrt(var + params.epsilon)
    normalized = (inputs - mean) * inv_std

    params.running_mean = params.momentum * params.running_mean + (1.0 - params.momentum) * mean
    params.running_var = params.momentum * params.running_var + (1.0 - params.momentum) * var

    return BatchNormOutput(
        output=normalized * params.gamma + params.beta,
        cache=BatchNormCache(normalized=normalized, inv_std=inv_std, gamma=params.gamma.copy()))


def batchnorm_backward(cache: BatchNormCache, upstream: Tensor) -> BatchNormGrads:
    """Compute the gradients of a training-mode :func:`batchnorm` given the gradient of its output."""
    if upstream.shape != cache.normalized.shape:
        raise DimensionError("Expected the upstream gradient of shape {}, but got {}".format(
            list(cache.normalized.shape), list(upstream.shape)))

    axes = tuple(range(upstream.ndim - 1))
    count = upstream.size // upstream.shape[-1]

    grad_beta = np.sum(upstream, axis=axes)
    grad_gamma = np.sum(upstream * cache.normalized, axis=axes)

    grad_input = (cache.gamma * cache.inv_std / count) * (
        count * upstream - grad_beta - cache.normalized * grad_gamma)

    return BatchNormGrads(grad_input=grad_input, grad_gamma=grad_gamma, grad_beta=grad_beta)


# endregion

# region Activation and pooling


def relu(inputs: Tensor) -> Tensor:
    """Compute max(0, x) point-wise."""
    return np.maximum(inputs, 0.0)


def relu_backward(inputs: Tensor, upstream: Tensor) -> Tensor:
    """Pass the upstream gradient where the input is strictly positive."""
    if inputs.shape != upstream.shape:
        raise DimensionError("Expected the upstream gradient of shape {}, but got {}".format(
            list(inputs.shape), list(upstream.shape)))

    return np.where(inputs > 0.0, upstream, 0.0)


class PoolOutput:
    """Represent the output of max pooling together with the positions of the maxima within the windows."""

    def __init__(self, output: Tensor, argmax: npt.NDArray[np.int64], input_shape: Tuple[int, ...],
                 window: Tuple[int, int]) -> None:
        """Initialize with the given values."""
        self.output = output
        self.argmax = argmax
        self.input_shape = input_shape
        self.window = window


@icontract.require(lambda window: window[0] >= 1 and window[1] >= 1)
def maxpool(inputs: Tensor, window: Tuple[int, int]) -> PoolOutput:
    """
    Take the maximum over non-overlapping windows (along width, along height); the stride equals the window.

    >>> pooled = maxpool(np.array([[1.0, 3.0], [2.0, 4.0]])[:, :, np.newaxis], window=(1, 2))
    >>> pooled.output[:, :, 0].tolist()
    [[3.0], [4.0]]
    """
    batch, squeeze = _batched(inputs, rank=3)
    count, width, height, channels = batch.shape
    window_x, window_y = window

    if width % window_x != 0 or height % window_y != 0:
        raise DimensionError("The extents (width {}, height {}) are not divisible by the pooling window {}".format(
            width, height, list(window)))

    out_w, out_h = width // window_x, height // window_y
    blocks = batch.reshape(count, out_w, window_x, out_h, window_y, channels)
    blocks = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(count, out_w, out_h, channels, window_x * window_y)

    reduction = tensor.reduce(blocks, axis=4, op=tensor.ReduceOp.MAX)
    assert reduction.indices is not None

    return PoolOutput(
        output=_unbatched(reduction.values, squeeze),
        argmax=_unbatched(reduction.indices, squeeze),
        input_shape=inputs.shape,
        window=window)


def maxpool_backward(pooled: PoolOutput, upstream: Tensor) -> Tensor:
    """Route the upstream gradient to the maximum of each window."""
    if upstream.shape != pooled.output.shape:
        raise DimensionError("Expected the upstream gradient of shape {}, but got {}".format(
            list(pooled.output.shape), list(upstream.shape)))

    upstream_batch, squeeze = _batched(upstream, rank=3)
    argmax, _ = _batched(pooled.argmax, rank=3)
    count, out_w, out_h, channels = upstream_batch.shape
    window_x, window_y = pooled.window

    grad_blocks = np.zeros((count, out_w, out_h, channels, window_x * window_y), dtype=np.float64)
    np.put_along_axis(grad_blocks, argmax[..., np.newaxis], upstream_batch[..., np.newaxis], axis=4)

    grad_input = grad_blocks.reshape(count, out_w, out_h, channels, window_x, window_y)
    grad_input = grad_input.transpose(0, 1, 4, 2, 5, 3).reshape(count, out_w * window_x, out_h * window_y, channels)

    return _unbatched(grad_input, squeeze)


# endregion

# region Recurrent layers


@icontract.invariant(lambda self: self.w.ndim == 2 and self.u.ndim == 2 and self.b.ndim == 1)
@icontract.invariant(lambda self: self.w.shape[0] == self.u.shape[0] == self.b.shape[0] == 4 * self.u.shape[1])
class LstmParams:
    """
    Hold the weights of an LSTM cell.

    The gates are stacked in the order (input, forget, cell candidate, output) along the first axis of ``w``
    (4H × D), ``u`` (4H × H) and ``b`` (4H).
    """

    def __init__(self, w: Tensor, u: Tensor, b: Tensor) -> None:
        """Initialize with the given values."""
        self.w = w
        self.u = u
        self.b = b

    @property
    def hidden_size(self) -> int:
        """Give the number of hidden units H."""
        return int(self.u.shape[1])

    @property
    def input_size(self) -> int:
        """Give the number of input features D."""
        return int(self.w.shape[1])


class LstmGrads:
    """Hold the gradients of an LSTM layer."""

    def __init__(self, grad_input: Tensor, grad_w: Tensor, grad_u: Tensor, grad_b: Tensor) -> None:
        """Initialize with the given values."""
        self.grad_input = grad_input
        self.grad_w = grad_w
        self.grad_u = grad_u
        self.grad_b = grad_b


class LstmCache:
    """Keep the activations of a forward pass through time for the backward pass."""

    # pylint: disable=too-many-instance-attributes
    def __init__(self, params: LstmParams, direction: Direction, squeeze: bool, inputs: Tensor, h_prev: Tensor,
                 c_prev: Tensor, gates: Tensor, tanh_c: Tensor, output: Tensor) -> None:
        """Initialize with the given values."""
        self.params = params
        self.direction = direction
        self.squeeze = squeeze
        self.inputs = inputs
        self.h_prev = h_prev
        self.c_prev = c_prev
        self.gates = gates
        self.tanh_c = tanh_c
        self.output = output


def lstm_forward_cached(seq: Tensor, params: LstmParams, direction: Direction) -> LstmCache:
    """Run :func:`lstm_forward` and keep the activations needed by :func:`lstm_backward`."""
    batch, squeeze = _batched(seq, rank=2)
    count, steps, features = batch.shape
    if steps < 1:
        raise DimensionError("Expected at least one time step, but got the shape {}".format(list(seq.shape)))

    if features != params.input_size:
        raise DimensionError("Expected {} input features, but got the shape {}".format(
            params.input_size, list(seq.shape)))

    hidden = params.hidden_size

    # The backward direction runs over the reversed sequence; all the cached arrays live in the traversal order.
    inputs = batch[:, ::-1, :] if direction == Direction.BACKWARD else batch
    inputs = np.ascontiguousarray(inputs)

    projected = tensor.matmul(inputs.reshape(count * steps, features), params.w.T)
    projected = tensor.elementwise(projected, params.b, tensor.ElementwiseOp.ADD).reshape(count, steps, 4 * hidden)

    h_prev = np.empty((count, steps, hidden), dtype=np.float64)
    c_prev = np.empty((count, steps, hidden), dtype=np.float64)
    gates = np.empty((count, steps, 4 * hidden), dtype=np.float64)
    tanh_c = np.empty((count, steps, hidden), dtype=np.float64)
    output = np.empty((count, steps, hidden), dtype=np.float64)

    h = np.zeros((count, hidden), dtype=np.float64)
    c = np.zeros((count, hidden), dtype=np.float64)

    for t in range(steps):
        h_prev[:, t] = h
        c_prev[:, t] = c

        z = projected[:, t] + tensor.matmul(h, params.u.T)
        gate_i = sigmoid(z[:, :hidden])
        gate_f = sigmoid(z[:, hidden:2 * hidden])
        gate_g = np.tanh(z[:, 2 * hidden:3 * hidden])
        gate_o = sigmoid(z[:, 3 * hidden:])

        c = gate_f * c + gate_i * gate_g
        tanh_c[:, t] = np.tanh(c)
        h = gate_o * tanh_c[:, t]

        gates[:, t, :hidden] = gate_i
        gates[:, t, hidden:2 * hidden] = gate_f
        gates[:, t, 2 * hidden:3 * hidden] = gate_g
        gates[:, t, 3 * hidden:] = gate_o
        output[:, t] = h

    return LstmCache(
        params=params,
        direction=direction,
        squeeze=squeeze,
        inputs=inputs,
        h_prev=h_prev,
        c_prev=c_prev,
        gates=gates,
        tanh_c=tanh_c,
        output=output)


def _aligned_output(cache: LstmCache) -> Tensor:
    """Give the output of the cache so that the index t aligns with the input step t."""
    output = cache.output[:, ::-1, :] if cache.direction == Direction.BACKWARD else cache.output
    return _unbatched(np.ascontiguousarray(output), cache.squeeze)


def lstm_forward(seq: Tensor, params: LstmParams, direction: Direction) -> Tensor:
    """
    Run an LSTM over ``seq`` (time × features) starting from zero hidden and cell states.

    The backward direction processes the reversed sequence and re-reverses its outputs, so the output at index t
    always aligns with the input step t.
    """
    return _aligned_output(lstm_forward_cached(seq=seq, params=params, direction=direction))


def lstm_backward(cache: LstmCache, upstream: Tensor) -> LstmGrads:
    """Back-propagate through time the gradient of the aligned output of :func:`lstm_forward`."""
    upstream_batch, _ = _batched(upstream, rank=2)
    if upstream_batch.shape != cache.output.shape:
        raise DimensionError("Expected the upstream gradient of shape {}, but got {}".format(
            list(cache.output.shape), list(upstream_batch.shape)))

    if cache.direction == Direction.BACKWARD:
        upstream_batch = upstream_batch[:, ::-1, :]

    params = cache.params
    count, steps, hidden = cache.output.shape

    grad_z = np.empty((count, steps, 4 * hidden), dtype=np.float64)
    grad_h_next = np.zeros((count, hidden), dtype=np.float64)
    grad_c_next = np.zeros((count, hidden), dtype=np.float64)

    for t in range(steps - 1, -1, -1):
        gate_i = cache.gates[:, t, :hidden]
        gate_f = cache.gates[:, t, hidden:2 * hidden]
        gate_g = cache.gates[:, t, 2 * hidden:3 * hidden]
        gate_o = cache.gates[:, t, 3 * hidden:]
        tanh_c = cache.tanh_c[:, t]

        grad_h = upstream_batch[:, t] + grad_h_next
        grad_c = grad_h * gate_o * (1.0 - tanh_c**2) + grad_c_next

        grad_z[:, t, :hidden] = grad_c * gate_g * gate_i * (1.0 - gate_i)
        grad_z[:, t, hidden:2 * hidden] = grad_c * cache.c_prev[:, t] * gate_f * (1.0 - gate_f)
        grad_z[:, t, 2 * hidden:3 * hidden] = grad_c * gate_i * (1.0 - gate_g**2)
        grad_z[:, t, 3 * hidden:] = grad_h * tanh_c * gate_o * (1.0 - gate_o)

        grad_h_next = tensor.matmul(grad_z[:, t], params.u)
        grad_c_next = grad_c * gate_f

    flat_grad_z = grad_z.reshape(count * steps, 4 * hidden)
    grad_w = tensor.matmul(flat_grad_z.T, cache.inputs.reshape(count * steps, params.input_size))
    grad_u = tensor.matmul(flat_grad_z.T, cache.h_prev.reshape(count * steps, hidden))
    grad_b = np.sum(flat_grad_z, axis=0)

    grad_input = tensor.matmul(flat_grad_z, params.w).reshape(count, steps, params.input_size)
    if cache.direction == Direction.BACKWARD:
        grad_input = grad_input[:, ::-1, :]

    return LstmGrads(
        grad_input=_unbatched(np.ascontiguousarray(grad_input), cache.squeeze),
        grad_w=grad_w,
        grad_u=grad_u,
        grad_b=grad_b)


class BiLstmCache:
    """Keep the caches of both directions of a bidirectional layer."""

    def __init__(self, forward: LstmCache, backward: LstmCache, output: Tensor) -> None:
        """Initialize with the given values."""
        self.forward = forward
        self.backward = backward
        self.output = output


class BiLstmGrads:
    """Hold the gradients of a bidirectional layer."""

    def __init__(self, grad_input: Tensor, forward: LstmGrads, backward: LstmGrads) -> None:
        """Initialize with the given values."""
        self.grad_input = grad_input
        self.forward = forward
        self.backward = backward


def bidirectional_lstm_cached(seq: Tensor, fwd: LstmParams, bwd: LstmParams) -> BiLstmCache:
    """Run :func:`bidirectional_lstm` and keep the activations of both directions."""
    if fwd.hidden_size != bwd.hidden_size:
        raise DimensionError("The forward cell has {} hidden units, but the backward cell has {}".format(
            fwd.hidden_size, bwd.hidden_size))

    forward_cache = lstm_forward_cached(seq=seq, params=fwd, direction=Direction.FORWARD)
    backward_cache = lstm_forward_cached(seq=seq, params=bwd, direction=Direction.BACKWARD)

    output = np.concatenate([_aligned_output(forward_cache), _aligned_output(backward_cache)], axis=-1)
    return BiLstmCache(forward=forward_cache, backward=backward_cache, output=output)


def bidirectional_lstm(seq: Tensor, fwd: LstmParams, bwd: LstmParams) -> Tensor:
    """Concatenate per step the outputs of a forward and a backward LSTM over ``seq`` (time × 2H result)."""
    return bidirectional_lstm_cached(seq=seq, fwd=fwd, bwd=bwd).output


def bidirectional_lstm_backward(cache: BiLstmCache, upstream: Tensor) -> BiLstmGrads:
    """Back-propagate the gradient of the concatenated output through both directions."""
    if upstream.shape != cache.output.shape:
        raise DimensionError("Expected the upstream gradient of shape {}, but got {}".format(
            list(cache.output.shape), list(upstream.shape)))

    hidden = cache.forward.params.hidden_size
    forward_grads = lstm_backward(cache.forward, upstream[..., :hidden])
    backward_grads = lstm_backward(cache.backward, upstream[..., hidden:])

    return BiLstmGrads(
        grad_input=forward_grads.grad_input + backward_grads.grad_input,
        forward=forward_grads,
        backward=backward_grads)


# endregion

# region Projection


@icontract.invariant(lambda self: self.weight.ndim == 2 and self.bias.shape == (self.weight.shape[0], ))
class DenseParams:
    """Hold the per-step affine map from the recurrent features to the logits (outputs × inputs)."""

    def __init__(self, weight: Tensor, bias: Tensor) -> None:
        """Initialize with the given values."""
        self.weight = weight
        self.bias = bias


class DenseGrads:
    """Hold the gradients of the projection."""

    def __init__(self, grad_input: Tensor, grad_weight: Tensor, grad_bias: Tensor) -> None:
        """Initialize with the given values."""
        self.grad_input = grad_input
        self.grad_weight = grad_weight
        self.grad_bias = grad_bias


def _check_project(seq: Tensor, params: DenseParams) -> None:
    if seq.ndim < 1 or seq.shape[-1] != params.weight.shape[1]:
        raise DimensionError("Expected {} features along the last axis, but got the shape {}".format(
            params.weight.shape[1], list(seq.shape)))


@icontract.ensure(lambda seq, params, result: result.shape == seq.shape[:-1] + (params.weight.shape[0], ))
def project(seq: Tensor, params: DenseParams) -> Tensor:
    """Apply the affine map at every time step."""
    _check_project(seq, params)

    flat = seq.reshape(-1, seq.shape[-1])
    result = tensor.elementwise(tensor.matmul(flat, params.weight.T), params.bias, tensor.ElementwiseOp.ADD)
    return result.reshape(seq.shape[:-1] + (params.weight.shape[0], ))


def project_backward(seq: Tensor, params: DenseParams, upstream: Tensor) -> DenseGrads:
    """Compute the gradients of :func:`project` given the gradient of its output."""
    _check_project(seq, params)
    expected_shape = seq.shape[:-1] + (params.weight.shape[0], )
    if upstream.shape != expected_shape:
        raise DimensionError("Expected the upstream gradient of shape {}, but got {}".format(
            list(expected_shape), list(upstream.shape)))

    flat_seq = seq.reshape(-1, seq.shape[-1])
    flat_upstream = upstream.reshape(-1, upstream.shape[-1])

    return DenseGrads(
        grad_input=tensor.matmul(flat_upstream, params.weight).reshape(seq.shape),
        grad_weight=tensor.matmul(flat_upstream.T, flat_seq),
        grad_bias=np.sum(flat_upstream, axis=0))


# endregion

# region Initialization


def _uniform(stream: SplitMix64, shape: Tuple[int, ...], fan_in: int) -> Tensor:
    """Draw from the zero-mean uniform distribution scaled by 1/√fan-in."""
    bound = 1.0 / np.sqrt(fan_in)
    values = stream.uniform(int(np.prod(shape)))
    return ((2.0 * values - 1.0) * bound).reshape(shape)


@icontract.require(lambda kernel: kernel[0] % 2 == 1 and kernel[1] % 2 == 1)
@icontract.require(lambda channels_in, channels_out: channels_in >= 1 and channels_out >= 1)
def init_conv_params(kernel: Tuple[int, int], channels_in: int, channels_out: int, seed: int) -> ConvParams:
    """Initialize the kernels of a convolution uniformly and its biases with zeros."""
    kernel_h, kernel_w = kernel
    stream = SplitMix64(seed=seed)
    return ConvParams(
        kernels=_uniform(
            stream, (kernel_h, kernel_w, channels_in, channels_out), fan_in=kernel_h * kernel_w * channels_in),
        bias=np.zeros(channels_out, dtype=np.float64))


@icontract.require(lambda channels: channels >= 1)
def init_batchnorm_params(channels: int, momentum: float = 0.9, epsilon: float = 1e-5) -> BatchNormParams:
    """Initialize an identity batch normalization with zero running mean and unit running variance."""
    return BatchNormParams(
        gamma=np.ones(channels, dtype=np.float64),
        beta=np.zeros(channels, dtype=np.float64),
        running_mean=np.zeros(channels, dtype=np.float64),
        running_var=np.ones(channels, dtype=np.float64),
        momentum=momentum,
        epsilon=epsilon)


@icontract.require(lambda input_size, hidden_size: input_size >= 1 and hidden_size >= 1)
def init_lstm_params(input_size: int, hidden_size: int, seed: int, forget_bias: float = 1.0) -> LstmParams:
    """Initialize the weights of an LSTM cell uniformly, the biases with zeros and the forget-gate bias to +1."""
    stream = SplitMix64(seed=seed)
    bias = np.zeros(4 * hidden_size, dtype=np.float64)
    bias[hidden_size:2 * hidden_size] = forget_bias

    return LstmParams(
        w=_uniform(stream, (4 * hidden_size, input_size), fan_in=input_size),
        u=_uniform(stream, (4 * hidden_size, hidden_size), fan_in=hidden_size),
        b=bias)


@icontract.require(lambda input_size, output_size: input_size >= 1 and output_size >= 1)
def init_dense_params(input_size: int, output_size: int, seed: int) -> DenseParams:
    """Initialize the projection weights uniformly and its biases with zeros."""
    stream = SplitMix64(seed=seed)
    return DenseParams(
        weight=_uniform(stream, (output_size, input_size), fan_in=input_size),
        bias=np.zeros(output_size, dtype=np.float64))


# endregion
