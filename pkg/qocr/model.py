"""
Assemble the convolutional and the bidirectional recurrent layers into a single word recognizer.

The network consumes a batch of preprocessed images (batch × width × height) and emits per-step logits over the
vocabulary plus the blank (batch × time × (V + 1)). Each convolution block is conv → batch norm → ReLU → max pool.
The output of the last block must have the height 1 so that it can be read as a sequence along the width.
"""
import collections
import copy
from typing import Any, Dict, List, Mapping, MutableMapping, Optional, Sequence, Tuple

import icontract
import numpy as np

from qocr import ctc, nn
from qocr.dataset import GrayImage, preprocess_resize
from qocr.errors import ConstructionError, DimensionError, InfeasibleLabelError, InvalidArgumentError
from qocr.prng import derive_seed
from qocr.tensor import Tensor
from qocr.vocabulary import Vocabulary, default_vocabulary

# Keys of the initialization sub-streams derived from the master seed
_CONV_KEY = 1
_LSTM_KEY = 2
_DENSE_KEY = 3


class ConvSpec:
    """Specify one convolution block: the kernel extents (height, width), the filters and the pooling window."""

    def __init__(self, kernel: Tuple[int, int], filters: int, pool: Tuple[int, int]) -> None:
        """
        Initialize with the given values.

        :param kernel: kernel extents as (height, width)
        :param filters: number of output channels
        :param pool: max-pooling window as (along width, along height)
        """
        self.kernel = kernel
        self.filters = filters
        self.pool = pool

    def __eq__(self, other: object) -> bool:
        """Compare all the fields."""
        return isinstance(other, ConvSpec) and (self.kernel, self.filters, self.pool) == (other.kernel, other.filters,
                                                                                          other.pool)


def _shape_chain(conv_specs: Sequence[ConvSpec], input_width: int, input_height: int) -> List[Tuple[int, int, int]]:
    """Propagate the input extents through the blocks; raise ConstructionError naming the first offending block."""
    if input_width < 1 or input_height < 1:
        raise ConstructionError("Expected positive input extents, but got {}×{}".format(input_width, input_height))

    if len(conv_specs) == 0:
        raise ConstructionError("Expected at least one convolution block.")

    shapes = []  # type: List[Tuple[int, int, int]]
    width, height = input_width, input_height
    for k, spec in enumerate(conv_specs):
        name = "conv{}".format(k)
        if spec.kernel[0] < 1 or spec.kernel[1] < 1 or spec.kernel[0] % 2 == 0 or spec.kernel[1] % 2 == 0:
            raise ConstructionError("The layer {} has the kernel {}, but odd positive extents are required".format(
                name, list(spec.kernel)))

        if spec.filters < 1:
            raise ConstructionError("The layer {} has {} filters, but at least one is required".format(
                name, spec.filters))

        pool_x, pool_y = spec.pool
        if pool_x < 1 or pool_y < 1 or width % pool_x != 0 or height % pool_y != 0:
            raise ConstructionError(
                "The layer {} pools the extents (width {}, height {}) with the window {} which does not divide them"
                .format(name, width, height, list(spec.pool)))

        width, height = width // pool_x, height // pool_y
        shapes.append((width, height, spec.filters))

    if height != 1:
        raise ConstructionError(
            "The layer conv{} outputs the height {}, but the recurrent layers need the height 1".format(
                len(conv_specs) - 1, height))

    return shapes


class ModelConfig:
    """
    Configure the architecture of the network.

    The constructor propagates the input extents through the convolution blocks and raises
    :class:`qocr.errors.ConstructionError` naming the offending block if the chain is invalid.
    """

    def __init__(self,
                 conv_specs: Sequence[ConvSpec],
                 hidden_size: int,
                 lstm_layers: int,
                 vocabulary_size: int,
                 input_width: int = 128,
                 input_height: int = 32) -> None:
        """Initialize with the given values and validate the shape chain."""
        if hidden_size < 1 or lstm_layers < 1:
            raise ConstructionError("Expected at least one recurrent layer with at least one hidden unit, "
                                    "but got {} layer(s) with {} unit(s)".format(lstm_layers, hidden_size))

        if vocabulary_size < 1:
            raise ConstructionError("Expected at least one symbol, but got the vocabulary size {}".format(
                vocabulary_size))

        self.conv_specs = list(conv_specs)
        self.hidden_size = hidden_size
        self.lstm_layers = lstm_layers
        self.vocabulary_size = vocabulary_size
        self.input_width = input_width
        self.input_height = input_height

        self.block_shapes = _shape_chain(self.conv_specs, input_width=input_width, input_height=input_height)

    @property
    def time_steps(self) -> int:
        """Give the length T of the sequence read by the recurrent layers."""
        return self.block_shapes[-1][0]

    @property
    def feature_count(self) -> int:
        """Give the number of features per time step of the sequence."""
        return self.block_shapes[-1][2]

    @property
    def class_count(self) -> int:
        """Give the number of output classes, V + 1 including the blank."""
        return self.vocabulary_size + 1

    def to_mapping(self) -> Dict[str, Any]:
        """Represent the configuration as a JSON-able mapping."""
        return collections.OrderedDict([
            ('conv_specs', [
                collections.OrderedDict([('kernel', list(spec.kernel)), ('filters', spec.filters),
                                         ('pool', list(spec.pool))]) for spec in self.conv_specs
            ]),
            ('hidden_size', self.hidden_size),
            ('lstm_layers', self.lstm_layers),
            ('vocabulary_size', self.vocabulary_size),
            ('input_width', self.input_width),
            ('input_height', self.input_height),
        ])

    def __eq__(self, other: object) -> bool:
        """Compare the mappings."""
        return isinstance(other, ModelConfig) and self.to_mapping() == other.to_mapping()


def config_from_mapping(mapping: Mapping[str, Any]) -> ModelConfig:
    """
    Parse the configuration from a mapping produced by :meth:`ModelConfig.to_mapping`.

    :raise ValueError: if a field is missing or has the wrong type
    """
    try:
        conv_specs = [
            ConvSpec(
                kernel=(int(entry['kernel'][0]), int(entry['kernel'][1])),
                filters=int(entry['filters']),
                pool=(int(entry['pool'][0]), int(entry['pool'][1]))) for entry in mapping['conv_specs']
        ]

        return ModelConfig(
            conv_specs=conv_specs,
            hidden_size=int(mapping['hidden_size']),
            lstm_layers=int(mapping['lstm_layers']),
            vocabulary_size=int(mapping['vocabulary_size']),
            input_width=int(mapping['input_width']),
            input_height=int(mapping['input_height']))
    except (KeyError, IndexError, TypeError) as err:
        raise ValueError("The model configuration is malformed: {!r}".format(err)) from err


def full_config(vocabulary_size: int = 38) -> ModelConfig:
    """Give the full configuration: five blocks with 32 to 256 filters and two recurrent layers of 256 units."""
    return ModelConfig(
        conv_specs=[
            ConvSpec(kernel=(5, 5), filters=32, pool=(2, 2)),
            ConvSpec(kernel=(5, 5), filters=64, pool=(2, 2)),
            ConvSpec(kernel=(3, 3), filters=128, pool=(1, 2)),
            ConvSpec(kernel=(3, 3), filters=128, pool=(1, 2)),
            ConvSpec(kernel=(3, 3), filters=256, pool=(1, 2)),
        ],
        hidden_size=256,
        lstm_layers=2,
        vocabulary_size=vocabulary_size)


def toy_config(vocabulary_size: int = 38) -> ModelConfig:
    """Give the reduced configuration with halved filters and 64 hidden units for fast runs."""
    return ModelConfig(
        conv_specs=[
            ConvSpec(kernel=(5, 5), filters=16, pool=(2, 2)),
            ConvSpec(kernel=(5, 5), filters=32, pool=(2, 2)),
            ConvSpec(kernel=(3, 3), filters=64, pool=(1, 2)),
            ConvSpec(kernel=(3, 3), filters=64, pool=(1, 2)),
            ConvSpec(kernel=(3, 3), filters=128, pool=(1, 2)),
        ],
        hidden_size=64,
        lstm_layers=2,
        vocabulary_size=vocabulary_size)


PRESETS = collections.OrderedDict([('paper', full_config), ('full', full_config), ('toy', toy_config)])

# region Parameters


class ConvBlock:
    """Hold the parameters of one convolution block."""

    def __init__(self, conv: nn.ConvParams, batchnorm: nn.BatchNormParams) -> None:
        """Initialize with the given values."""
        self.conv = conv
        self.batchnorm = batchnorm


class BiLstmLayer:
    """Hold the parameters of both directions of a recurrent layer."""

    def __init__(self, forward: nn.LstmParams, backward: nn.LstmParams) -> None:
        """Initialize with the given values."""
        self.forward = forward
        self.backward = backward


class ModelParams:
    """
    Hold all the parameters of the network.

    Every tensor is addressed by a stable name such as ``conv0.kernels``, ``bn2.running_var``, ``lstm1.bwd.u`` or
    ``dense.weight``. The running statistics of the batch normalizations are tensors, but not trainable.
    """

    def __init__(self, blocks: List[ConvBlock], lstm_layers: List[BiLstmLayer], dense: nn.DenseParams) -> None:
        """Initialize with the given values."""
        self.blocks = blocks
        self.lstm_layers = lstm_layers
        self.dense = dense

    def _slots(self) -> List[Tuple[str, Any, str, bool]]:
        """List (name, owner, attribute, trainable) for every tensor in a stable order."""
        slots = []  # type: List[Tuple[str, Any, str, bool]]
        for k, block in enumerate(self.blocks):
            slots.append(("conv{}.kernels".format(k), block.conv, 'kernels', True))
            slots.append(("conv{}.bias".format(k), block.conv, 'bias', True))
            slots.append(("bn{}.gamma".format(k), block.batchnorm, 'gamma', True))
            slots.append(("bn{}.beta".format(k), block.batchnorm, 'beta', True))
            slots.append(("bn{}.running_mean".format(k), block.batchnorm, 'running_mean', False))
            slots.append(("bn{}.running_var".format(k), block.batchnorm, 'running_var', False))

        for layer_index, layer in enumerate(self.lstm_layers):
            for direction, params in (('fwd', layer.forward), ('bwd', layer.backward)):
                for attribute in ('w', 'u', 'b'):
                    slots.append(("lstm{}.{}.{}".format(layer_index, direction, attribute), params, attribute, True))

        slots.append(("dense.weight", self.dense, 'weight', True))
        slots.append(("dense.bias", self.dense, 'bias', True))
        return slots

    def tensors(self) -> "collections.OrderedDict[str, Tensor]":
        """Map the names to all the tensors including the running statistics."""
        return collections.OrderedDict((name, getattr(owner, attribute)) for name, owner, attribute, _ in self._slots())

    def trainable(self) -> "collections.OrderedDict[str, Tensor]":
        """Map the names to the tensors updated by the optimizer."""
        return collections.OrderedDict(
            (name, getattr(owner, attribute)) for name, owner, attribute, trainable in self._slots() if trainable)

    def assign(self, name: str, value: Tensor) -> None:
        """
        Replace the named tensor with ``value``.

        :raise KeyError: if there is no tensor with the given name
        :raise DimensionError: if the shape of ``value`` differs from the current tensor
        """
        for slot_name, owner, attribute, _ in self._slots():
            if slot_name == name:
                current = getattr(owner, attribute)
                if current.shape != value.shape:
                    raise DimensionError("The tensor {} has the shape {}, but the value has the shape {}".format(
                        name, list(current.shape), list(value.shape)))
                setattr(owner, attribute, value)
                return

        raise KeyError(name)


class Hyperparameters:
    """Configure the RMSProp optimizer and the mini-batch size."""

    @icontract.require(lambda learning_rate: learning_rate >= 0.0)
    @icontract.require(lambda decay: 0.0 <= decay < 1.0)
    @icontract.require(lambda epsilon: epsilon > 0.0)
    @icontract.require(lambda batch_size: batch_size >= 1)
    def __init__(self,
                 learning_rate: float = 1e-3,
                 decay: float = 0.9,
                 epsilon: float = 1e-8,
                 batch_size: int = 32) -> None:
        """Initialize with the given values."""
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.batch_size = batch_size

    def to_mapping(self) -> Dict[str, Any]:
        """Represent the hyperparameters as a JSON-able mapping."""
        return collections.OrderedDict([('learning_rate', self.learning_rate), ('decay', self.decay),
                                        ('epsilon', self.epsilon), ('batch_size', self.batch_size)])


def _accumulators_non_negative(accumulators: Mapping[str, Tensor]) -> bool:
    return all(bool(np.all(value >= 0.0)) for value in accumulators.values())


@icontract.invariant(lambda self: _accumulators_non_negative(self.accumulators))
@icontract.invariant(lambda self: self.iteration >= 0)
@icontract.invariant(lambda self: len(self.vocabulary) == self.config.vocabulary_size)
class TrainingState:
    """
    Hold everything needed to continue the training: the parameters, the optimizer and the counter.

    ``best_crr`` and ``best_iteration`` record the highest validation CRR reached so far and the iteration it was
    reached at; both are None until a validation set has been evaluated.
    """

    # pylint: disable=too-many-arguments
    def __init__(self,
                 config: ModelConfig,
                 vocabulary: Vocabulary,
                 params: ModelParams,
                 accumulators: MutableMapping[str, Tensor],
                 iteration: int,
                 seed: int,
                 hyperparameters: Hyperparameters,
                 best_crr: Optional[float] = None,
                 best_iteration: Optional[int] = None) -> None:
        """Initialize with the given values."""
        self.config = config
        self.vocabulary = vocabulary
        self.params = params
        self.accumulators = accumulators
        self.iteration = iteration
        self.seed = seed
        self.hyperparameters = hyperparameters
        self.best_crr = best_crr
        self.best_iteration = best_iteration

    def record_best(self, crr: float) -> None:
        """Remember the validation CRR as the best one so far, reached at the current iteration."""
        self.best_crr = crr
        self.best_iteration = self.iteration

    def snapshot(self) -> 'TrainingState':
        """Copy the state so that further training does not affect the copy."""
        return copy.deepcopy(self)


@icontract.require(lambda seed: seed >= 0)
@icontract.ensure(lambda result: result.iteration == 0)
def build_model(config: ModelConfig,
                seed: int,
                vocabulary: Optional[Vocabulary] = None,
                hyperparameters: Optional[Hyperparameters] = None) -> TrainingState:
    """
    Initialize the parameters of the network deterministically from the seed.

    Each layer draws from its own sub-stream of the seed. The optimizer accumulators start at zero.

    :raise ConstructionError: if the vocabulary size differs from the configuration
    """
    vocabulary = vocabulary if vocabulary is not None else default_vocabulary()
    if len(vocabulary) != config.vocabulary_size:
        raise ConstructionError("The configuration expects {} symbols, but the vocabulary has {}".format(
            config.vocabulary_size, len(vocabulary)))

    blocks = []  # type: List[ConvBlock]
    channels = 1
    for k, spec in enumerate(config.conv_specs):
        blocks.append(
            ConvBlock(
                conv=nn.init_conv_params(
                    kernel=spec.kernel,
                    channels_in=channels,
                    channels_out=spec.filters,
                    seed=derive_seed(seed, _CONV_KEY, k)),
                batchnorm=nn.init_batchnorm_params(channels=spec.filters)))
        channels = spec.filters

    lstm_layers = []  # type: List[BiLstmLayer]
    features = config.feature_count
    for layer_index in range(config.lstm_layers):
        lstm_layers.append(
            BiLstmLayer(
                forward=nn.init_lstm_params(
                    input_size=features,
                    hidden_size=config.hidden_size,
                    seed=derive_seed(seed, _LSTM_KEY, layer_index, 0)),
                backward=nn.init_lstm_params(
                    input_size=features,
                    hidden_size=config.hidden_size,
                    seed=derive_seed(seed, _LSTM_KEY, layer_index, 1))))
        features = 2 * config.hidden_size

    dense = nn.init_dense_params(
        input_size=features, output_size=config.class_count, seed=derive_seed(seed, _DENSE_KEY))

    params = ModelParams(blocks=blocks, lstm_layers=lstm_layers, dense=dense)
    accumulators = collections.OrderedDict(
        (name, np.zeros_like(value)) for name, value in params.trainable().items())  # type: MutableMapping[str, Tensor]

    return TrainingState(
        config=config,
        vocabulary=vocabulary,
        params=params,
        accumulators=accumulators,
        iteration=0,
        seed=seed,
        hyperparameters=hyperparameters if hyperparameters is not None else Hyperparameters())


# endregion

# region Forward and backward passes


class BlockCache:
    """Keep the intermediate activations of one convolution block."""

    def __init__(self, inputs: Tensor, pre_activation: Tensor, batchnorm: Optional[nn.BatchNormCache],
                 pooled: nn.PoolOutput) -> None:
        """Initialize with the given values."""
        self.inputs = inputs
        self.pre_activation = pre_activation
        self.batchnorm = batchnorm
        self.pooled = pooled


class ForwardCache:
    """Keep all the intermediate activations of a forward pass."""

    def __init__(self, blocks: List[BlockCache], sequence: Tensor, lstm: List[nn.BiLstmCache], features: Tensor,
                 logits: Tensor) -> None:
        """Initialize with the given values."""
        self.blocks = blocks
        self.sequence = sequence
        self.lstm = lstm
        self.features = features
        self.logits = logits


def _forward_cached(state: TrainingState, batch: Tensor, mode: nn.Mode) -> ForwardCache:
    config = state.config
    if batch.ndim != 3 or batch.shape[1:] != (config.input_width, config.input_height) or batch.shape[0] < 1:
        raise DimensionError("Expected a batch of shape N × {} × {}, but got {}".format(
            config.input_width, config.input_height, list(batch.shape)))

    activation = batch[..., np.newaxis]

    block_caches = []  # type: List[BlockCache]
    for block, spec in zip(state.params.blocks, config.conv_specs):
        convolved = nn.conv2d_forward(activation, block.conv)
        normalized = nn.batchnorm(convolved, block.batchnorm, mode)
        pooled = nn.maxpool(nn.relu(normalized.output), window=spec.pool)

        block_caches.append(
            BlockCache(inputs=activation, pre_activation=normalized.output, batchnorm=normalized.cache, pooled=pooled))
        activation = pooled.output

    # Drop the singleton height; the time runs along the width.
    sequence = np.ascontiguousarray(activation[:, :, 0, :])

    lstm_caches = []  # type: List[nn.BiLstmCache]
    features = sequence
    for layer in state.params.lstm_layers:
        cache = nn.bidirectional_lstm_cached(features, fwd=layer.forward, bwd=layer.backward)
        lstm_caches.append(cache)
        features = cache.output

    logits = nn.project(features, state.params.dense)

    return ForwardCache(blocks=block_caches, sequence=sequence, lstm=lstm_caches, features=features, logits=logits)


@icontract.ensure(
    lambda state, batch, result: result.shape == (batch.shape[0], state.config.time_steps, state.config.class_count))
def forward(state: TrainingState, batch: Tensor, mode: nn.Mode) -> Tensor:
    """
    Compute the logits (N × T × (V + 1)) of a batch of preprocessed images (N × width × height).

    In training mode the batch normalizations use the batch statistics and update their running statistics.

    :raise DimensionError: if the images do not have the configured extents
    """
    return _forward_cached(state=state, batch=batch, mode=mode).logits


def _backward(state: TrainingState, cache: ForwardCache, grad_logits: Tensor) -> Dict[str, Tensor]:
    """Back-propagate the gradient of the logits through the whole network."""
    params = state.params
    grads = collections.OrderedDict()  # type: Dict[str, Tensor]

    dense_grads = nn.project_backward(cache.features, params.dense, grad_logits)
    grads["dense.weight"] = dense_grads.grad_weight
    grads["dense.bias"] = dense_grads.grad_bias

    upstream = dense_grads.grad_input
    for layer_index in range(len(params.lstm_layers) - 1, -1, -1):
        lstm_grads = nn.bidirectional_lstm_backward(cache.lstm[layer_index], upstream)
        for direction, direction_grads in (('fwd', lstm_grads.forward), ('bwd', lstm_grads.backward)):
            grads["lstm{}.{}.w".format(layer_index, direction)] = direction_grads.grad_w
            grads["lstm{}.{}.u".format(layer_index, direction)] = direction_grads.grad_u
            grads["lstm{}.{}.b".format(layer_index, direction)] = direction_grads.grad_b
        upstream = lstm_grads.grad_input

    upstream = upstream[:, :, np.newaxis, :]
    for k in range(len(params.blocks) - 1, -1, -1):
        block = params.blocks[k]
        block_cache = cache.blocks[k]
        assert block_cache.batchnorm is not None, "The backward pass needs a forward pass in the training mode"

        upstream = nn.maxpool_backward(block_cache.pooled, upstream)
        upstream = nn.relu_backward(block_cache.pre_activation, upstream)

        bn_grads = nn.batchnorm_backward(block_cache.batchnorm, upstream)
        grads["bn{}.gamma".format(k)] = bn_grads.grad_gamma
        grads["bn{}.beta".format(k)] = bn_grads.grad_beta

        conv_grads = nn.conv2d_backward(block_cache.inputs, block.conv, bn_grads.grad_input)
        grads["conv{}.kernels".format(k)] = conv_grads.grad_kernels
        grads["conv{}.bias".format(k)] = conv_grads.grad_bias
        upstream = conv_grads.grad_input

    return grads


def check_feasible(state: TrainingState, labels: Sequence[Sequence[int]],
                   record_indices: Optional[Sequence[int]] = None) -> None:
    """
    Check that every label can be aligned to the time steps of the network.

    :raise InfeasibleLabelError: naming the first offending record
    """
    steps = state.config.time_steps
    for i, label in enumerate(labels):
        if not ctc.is_feasible(steps=steps, label=label):
            record_index = record_indices[i] if record_indices is not None else i
            raise InfeasibleLabelError(
                "The label of the record {} has {} symbol(s) and {} adjacent repeat(s), "
                "but the network emits only {} time step(s)".format(record_index, len(label),
                                                                    ctc.count_repeats(label), steps),
                record_index=record_index)


class LossAndGradients:
    """Represent the mean CTC loss of a batch and its gradients with respect to the trainable parameters."""

    def __init__(self, loss: float, grads: Dict[str, Tensor]) -> None:
        """Initialize with the given values."""
        self.loss = loss
        self.grads = grads


def loss_and_gradients(state: TrainingState,
                       images: Tensor,
                       labels: Sequence[Sequence[int]],
                       record_indices: Optional[Sequence[int]] = None) -> LossAndGradients:
    """
    Run the training-mode forward pass, the CTC loss of every sample and the full backward pass.

    The loss is the mean over the batch.

    :raise InfeasibleLabelError: if a label can not be aligned to the time steps
    """
    if images.shape[0] != len(labels):
        raise DimensionError("Got {} image(s), but {} label(s)".format(images.shape[0], len(labels)))

    check_feasible(state, labels, record_indices)

    cache = _forward_cached(state=state, batch=images, mode=nn.Mode.TRAIN)

    count = len(labels)
    grad_logits = np.empty_like(cache.logits)
    total = 0.0
    for i, label in enumerate(labels):
        result = ctc.ctc_loss(cache.logits[i], label)
        total += result.loss
        grad_logits[i] = result.grad_logits / count

    return LossAndGradients(loss=total / count, grads=_backward(state, cache, grad_logits))


def apply_rmsprop(state: TrainingState, grads: Mapping[str, Tensor]) -> None:
    """
    Update every trainable parameter in place: s ← ρ·s + (1 − ρ)·g²; θ ← θ − lr·g / (√s + ε).

    :raise InvalidArgumentError: if a gradient is missing
    """
    hyper = state.hyperparameters
    for name, value in state.params.trainable().items():
        if name not in grads:
            raise InvalidArgumentError("The gradient of the parameter {} is missing".format(name))

        grad = grads[name]
        accumulator = hyper.decay * state.accumulators[name] + (1.0 - hyper.decay) * grad * grad
        state.accumulators[name] = accumulator
        value -= hyper.learning_rate * grad / (np.sqrt(accumulator) + hyper.epsilon)


def train_step(state: TrainingState,
               images: Tensor,
               labels: Sequence[Sequence[int]],
               record_indices: Optional[Sequence[int]] = None) -> float:
    """
    Run one RMSProp step on the batch, update the state in place and return the mean loss before the update.

    :param state: state to be updated
    :param images: preprocessed images (N × width × height)
    :param labels: encoded labels, one per image
    :param record_indices: indices of the records in the repository, used to identify infeasible labels
    :raise InfeasibleLabelError: if a label can not be aligned to the time steps
    """
    result = loss_and_gradients(state, images=images, labels=labels, record_indices=record_indices)
    apply_rmsprop(state, result.grads)
    state.iteration += 1
    return result.loss


# endregion

# region Inference


def preprocess(state: TrainingState, image: GrayImage) -> Tensor:
    """Resize and standardize the image to the input extents of the network."""
    return preprocess_resize(image, width=state.config.input_width, height=state.config.input_height)


def decode_logits(state: TrainingState, logits: Tensor) -> str:
    """Decode the best path of the logits (T × (V + 1)) to the text."""
    return state.vocabulary.decode(ctc.best_path_decode(logits))


def recognize_batch(state: TrainingState, batch: Tensor) -> List[str]:
    """Recognize a batch of preprocessed images in inference mode."""
    logits = forward(state, batch, mode=nn.Mode.INFER)
    return [decode_logits(state, logits[i]) for i in range(logits.shape[0])]


def recognize(state: TrainingState, image: GrayImage) -> str:
    """Transcribe the word image."""
    return recognize_batch(state, preprocess(state, image)[np.newaxis])[0]


class Activations:
    """Represent the intermediate activations of a single image."""

    def __init__(self, block_outputs: List[Tensor], sequence: Tensor, logits: Tensor) -> None:
        """
        Initialize with the given values.

        :param block_outputs: output of each convolution block (width × height × channels)
        :param sequence: input to the recurrent layers (time × features)
        :param logits: per-step logits (time × (V + 1))
        """
        self.block_outputs = block_outputs
        self.sequence = sequence
        self.logits = logits
        self.argmax = np.argmax(logits, axis=1)


def inspect_activations(state: TrainingState, image: GrayImage) -> Activations:
    """Run the inference on the image and expose the feature maps, the sequence and the logits."""
    cache = _forward_cached(state=state, batch=preprocess(state, image)[np.newaxis], mode=nn.Mode.INFER)

    return Activations(
        block_outputs=[block.pooled.output[0] for block in cache.blocks],
        sequence=cache.sequence[0],
        logits=cache.logits[0])


# endregion
