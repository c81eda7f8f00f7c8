"""
Provide the seeded pseudo-random stream shared by rendering, noise, splitting and initialization.

The stream is splitmix64, and normal deviates come from the Box–Muller transform. Both are fixed algorithms so that
the same seed produces the same bytes in any implementation of the data formats.

>>> stream = SplitMix64(seed=0)
>>> hex(stream.next_u64())
'0xe220a8397b1dcdaf'
"""
import math
from typing import List

import icontract
import numpy as np
import numpy.typing as npt

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def _mix(value: int) -> int:
    """Apply the splitmix64 finalizer on a 64-bit integer."""
    value = ((value ^ (value >> 30)) * _MUL1) & _MASK
    value = ((value ^ (value >> 27)) * _MUL2) & _MASK
    return value ^ (value >> 31)


def _mix_block(values: npt.NDArray[np.uint64]) -> npt.NDArray[np.uint64]:
    """Apply the splitmix64 finalizer element-wise; uint64 arithmetic wraps around."""
    values = (values ^ (values >> np.uint64(30))) * np.uint64(_MUL1)
    values = (values ^ (values >> np.uint64(27))) * np.uint64(_MUL2)
    return values ^ (values >> np.uint64(31))


@icontract.require(lambda master: master >= 0)
@icontract.require(lambda _ARGS: all(key >= 0 for key in _ARGS[1:]))
@icontract.ensure(lambda result: 0 <= result <= _MASK)
def derive_seed(master: int, *keys: int) -> int:
    """
    Derive an independent sub-stream seed from the master seed and the keys.

    Keys are, for example, the record index or the font identifier, so that results do not depend on the order in
    which the records are processed.
    """
    result = master & _MASK
    for key in keys:
        result = _mix((result + _GAMMA * (key + 1)) & _MASK)

    return result


class SplitMix64:
    """Generate a splitmix64 stream of 64-bit integers, uniform doubles and normal deviates."""

    @icontract.require(lambda seed: seed >= 0)
    def __init__(self, seed: int) -> None:
        """Initialize the stream state with the seed."""
        self._state = seed & _MASK

    def next_u64(self) -> int:
        """Draw the next 64-bit integer."""
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    @icontract.require(lambda count: count >= 0)
    @icontract.ensure(lambda count, result: result.shape == (count, ))
    def next_u64_block(self, count: int) -> npt.NDArray[np.uint64]:
        """Draw ``count`` integers at once; equivalent to ``count`` calls of :meth:`next_u64`."""
        # splitmix64 is counter based: the k-th state is seed + k * gamma.
        steps = np.arange(1, count + 1, dtype=np.uint64)
        states = np.uint64(self._state) + steps * np.uint64(_GAMMA)
        self._state = (self._state + count * _GAMMA) & _MASK
        return _mix_block(states)

    @icontract.require(lambda count: count >= 0)
    @icontract.ensure(lambda result: bool(np.all((result >= 0.0) & (result < 1.0))))
    def uniform(self, count: int) -> npt.NDArray[np.float64]:
        """Draw ``count`` doubles uniformly from [0, 1) using the top 53 bits of each integer."""
        return (self.next_u64_block(count) >> np.uint64(11)).astype(np.float64) * (2.0**-53)

    @icontract.require(lambda count: count >= 0)
    def normal(self, count: int) -> npt.NDArray[np.float64]:
        """Draw ``count`` standard normal deviates with the Box–Muller transform over consecutive uniform pairs."""
        pairs = (count + 1) // 2
        uniforms = self.uniform(2 * pairs)

        # 1 - u lies in (0, 1] so that the logarithm is finite.
        radius = np.sqrt(-2.0 * np.log(1.0 - uniforms[0::2]))
        angle = 2.0 * math.pi * uniforms[1::2]

        result = np.empty(2 * pairs, dtype=np.float64)
        result[0::2] = radius * np.cos(angle)
        result[1::2] = radius * np.sin(angle)
        return result[:count]

    @icontract.require(lambda bound: bound >= 1)
    @icontract.ensure(lambda bound, result: 0 <= result < bound)
    def below(self, bound: int) -> int:
        """Draw an integer from [0, bound)."""
        return self.next_u64() % bound

    @icontract.require(lambda count: count >= 0)
    @icontract.ensure(lambda count, result: sorted(result) == list(range(count)))
    def permutation(self, count: int) -> List[int]:
        """Shuffle ``range(count)`` with the Fisher–Yates algorithm."""
        result = list(range(count))
        for i in range(count - 1, 0, -1):
            j = self.below(i + 1)
            result[i], result[j] = result[j], result[i]

        return result
