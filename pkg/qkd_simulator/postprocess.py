"""Classical key distillation: block-parity error correction and Toeplitz privacy amplification."""
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from qkd_simulator.exceptions import LengthMismatchError, OutOfRangeError
from qkd_simulator.logging_config import get_logger
from qkd_simulator.quantum_core import Prng

logger = get_logger("postprocess")

# above this many key bits the Toeplitz product goes through the FFT
FFT_THRESHOLD = 4096


def binary_entropy(q: float) -> float:
    """
    h(q) = -q log2 q - (1-q) log2 (1-q), with h(0) = h(1) = 0.

    Raises:
        OutOfRangeError: q outside [0, 1]
    """
    if not 0.0 <= q <= 1.0:
        raise OutOfRangeError(f"binary entropy needs q in [0, 1], got {q}")
    if q in (0.0, 1.0):
        return 0.0
    return float(-q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q))


def bits_to_hex(bits: Sequence[int]) -> str:
    """Lowercase hex, most significant bit first, zero-padded to whole nibbles."""
    if not bits:
        return ""
    padded = list(bits) + [0] * (-len(bits) % 4)
    return "".join(f"{int(''.join(str(b) for b in padded[i:i + 4]), 2):x}"
                   for i in range(0, len(padded), 4))


@dataclass
class CorrectionResult:
    """
    Outcome of reconciling key_b against the reference key_a.

    `transcript` lists every disclosed parity as (pass, positions); its
    length is the leak.
    """
    key_a: List[int]
    key_b: List[int]
    leaked: int
    residual: int
    transcript: List[Tuple[int, Tuple[int, ...]]] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.residual == 0


class _ParityChannel:
    """Alice's side of the parity exchange; every query is a disclosed bit."""

    def __init__(self, reference: Sequence[int]):
        self.reference = reference
        self.transcript: List[Tuple[int, Tuple[int, ...]]] = []

    def disclose(self, pass_index: int, positions: Sequence[int]) -> int:
        self.transcript.append((pass_index, tuple(positions)))
        return _parity(self.reference, positions)


def _parity(key: Sequence[int], positions: Sequence[int]) -> int:
    return sum(key[p] for p in positions) & 1


class _Pass:
    def __init__(self, index: int, order: Sequence[int], size: int):
        self.index = index
        self.blocks = [list(order[i:i + size]) for i in range(0, len(order), size)]
        self.block_of = {p: k for k, block in enumerate(self.blocks) for p in block}
        self.reference_parity: Dict[int, int] = {}


def _bisect(channel: _ParityChannel, pass_index: int, key_b: Sequence[int],
            positions: List[int]) -> int:
    """Locate one error in a block of odd relative parity."""
    while len(positions) > 1:
        half = positions[:len(positions) // 2]
        if channel.disclose(pass_index, half) != _parity(key_b, half):
            positions = half
        else:
            positions = positions[len(positions) // 2:]
    return positions[0]


def error_correct(key_a: Sequence[int], key_b: Sequence[int], block: int,
                  passes: int = 4, rng: Optional[Prng] = None) -> CorrectionResult:
    """
    Reconcile key_b to key_a by block parities and bisection.

    Pass 1 uses contiguous blocks of `block` bits. Every later pass uses a
    fresh public shuffle and blocks of block/2 bits. A bit fixed in one pass
    flips the relative parity of its blocks in every other pass, and those
    blocks are queued again.

    Args:
        key_a: reference key (Alice)
        key_b: key to correct (Bob)
        block: first-pass block size
        passes: number of passes; four clear every error below 5% in practice
        rng: stream for the public shuffles

    Raises:
        LengthMismatchError: keys differ in length or are shorter than block
    """
    n = len(key_a)
    if len(key_b) != n:
        raise LengthMismatchError(f"keys differ in length: {n} vs {len(key_b)}")
    if block < 2 or n < block:
        raise LengthMismatchError(f"keys of length {n} cannot be split into blocks of {block}")
    if passes < 1:
        raise OutOfRangeError(f"at least one pass is needed, got {passes}")
    rng = rng or Prng(0)

    channel = _ParityChannel(key_a)
    corrected = [int(b) for b in key_b]
    done: List[_Pass] = []
    for index in range(passes):
        order = list(range(n)) if index == 0 else rng.permutation(n)
        current = _Pass(index, order, block if index == 0 else max(1, block // 2))
        done.append(current)
        queue: List[Tuple[_Pass, int]] = []
        for k, positions in enumerate(current.blocks):
            current.reference_parity[k] = channel.disclose(index, positions)
            if current.reference_parity[k] != _parity(corrected, positions):
                queue.append((current, k))

        while queue:
            owner, k = queue.pop()
            positions = owner.blocks[k]
            if owner.reference_parity[k] == _parity(corrected, positions):
                continue
            flipped = _bisect(channel, owner.index, corrected, positions)
            corrected[flipped] ^= 1
            for other in done:
                if other is owner:
                    continue
                j = other.block_of[flipped]
                if other.reference_parity[j] != _parity(corrected, other.blocks[j]):
                    queue.append((other, j))

    residual = sum(a != b for a, b in zip(key_a, corrected))
    result = CorrectionResult(list(key_a), corrected, len(channel.transcript), residual, channel.transcript)
    if not result.converged:
        logger.warning(f"Error correction left {residual} of {n} bits in disagreement")
    logger.debug(f"Error correction on {n} bits: {result.leaked} parity bits disclosed")
    return result


def disclosed_parities(results: Iterable[CorrectionResult]) -> int:
    """
    Parity bits disclosed by several reconciliations against one reference
    key. A query that two parties both make reveals the same bit and is
    counted once.
    """
    merged: Counter = Counter()
    for result in results:
        merged |= Counter(result.transcript)
    return sum(merged.values())


def final_key_length(n: int, leaked: int, qber: float, security_param: int) -> int:
    """m = max(0, floor(n (1 - h(qber))) - leaked - s)."""
    return max(0, math.floor(n * (1.0 - binary_entropy(qber))) - leaked - security_param)


@dataclass
class ToeplitzSeed:
    """Public seed of an m x n Toeplitz matrix, T[i][j] = bits[n - 1 + i - j]."""
    bits: List[int]
    input_length: int
    output_length: int

    def __post_init__(self):
        if self.output_length < 1:
            raise OutOfRangeError(f"Toeplitz output length must be at least 1, got {self.output_length}")
        if len(self.bits) != self.input_length + self.output_length - 1:
            raise OutOfRangeError(
                f"seed of {len(self.bits)} bits does not fit a "
                f"{self.output_length} x {self.input_length} matrix")

    @classmethod
    def draw(cls, input_length: int, output_length: int, rng: Prng) -> "ToeplitzSeed":
        return cls(rng.bits(input_length + output_length - 1), input_length, output_length)

    def hex(self) -> str:
        return bits_to_hex(self.bits)


def toeplitz_hash(key: Sequence[int], seed: ToeplitzSeed) -> List[int]:
    """Multiply the key by the seed's Toeplitz matrix over GF(2)."""
    n, m = seed.input_length, seed.output_length
    if len(key) != n:
        raise LengthMismatchError(f"key has {len(key)} bits, seed expects {n}")
    x = np.asarray(key, dtype=np.int64)
    t = np.asarray(seed.bits, dtype=np.int64)
    if n <= FFT_THRESHOLD:
        full = np.convolve(t, x)
    else:
        size = len(t) + n - 1
        full = np.rint(np.fft.irfft(np.fft.rfft(t, size) * np.fft.rfft(x, size), size)).astype(np.int64)
    return [int(v) & 1 for v in full[n - 1:n - 1 + m]]


def privacy_amplify(key: Sequence[int], leaked: int, qber: float, security_param: int = 64,
                    seed: Optional[ToeplitzSeed] = None, rng: Optional[Prng] = None) -> List[int]:
    """
    Compress a reconciled key to m = max(0, floor(n (1 - h(qber))) - leaked - s) bits.

    The seed is drawn from `rng` when not given; parties sharing a key and a
    seed derive the same output. m = 0 yields an empty key.

    Raises:
        OutOfRangeError: empty key or qber outside [0, 1]
    """
    n = len(key)
    if n < 1:
        raise OutOfRangeError("privacy amplification needs a non-empty key")
    m = final_key_length(n, leaked, qber, security_param)
    if m == 0:
        logger.info(f"Privacy amplification leaves no key (n={n}, leaked={leaked}, qber={qber:.4f})")
        return []
    if seed is None:
        seed = ToeplitzSeed.draw(n, m, rng or Prng(0))
    elif seed.input_length != n or seed.output_length != m:
        raise LengthMismatchError(
            f"seed is for {seed.output_length} x {seed.input_length}, need {m} x {n}")
    return toeplitz_hash(key, seed)
