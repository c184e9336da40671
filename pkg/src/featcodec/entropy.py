"""Truncated unary binarization and context-adaptive binary arithmetic coding.

Bin indices are binarized with a truncated unary code (``k`` ones then a
zero, the zero dropped for the largest index) and every bit is coded with a
32-bit binary range coder.  Bit position ``j`` of any codeword always uses
context ``j``, so an ``N``-bin alphabet needs ``N - 1`` contexts.

Coder definition (normative for the version-1 stream):

* range starts at ``0xFFFFFFFF``, probabilities of a one start at 32768/65536;
* split ``r1 = (range >> 16) * p_one``; a one keeps ``[low, low + r1)``,
  a zero takes the rest;
* renormalise one byte at a time while ``range < 2**24``, with carry
  propagation through a cached byte and a count of pending 0xFF bytes;
* adapt ``p_one += ((bit << 16) - p_one) >> 5`` (arithmetic shift), then
  clamp to ``[32, 65504]``;
* flush with five byte shifts.  The first emitted byte is always zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from numba import njit

from .errors import CorruptStreamError, QuantizerError, TruncatedStreamError

PROB_BITS = 16
PROB_INIT = 1 << (PROB_BITS - 1)
ADAPT_SHIFT = 5
PROB_MIN = 32
PROB_MAX = (1 << PROB_BITS) - 32
RANGE_TOP = 1 << 24
MAX_BINS = 255

_OK, _TRUNCATED, _STATE, _TRAILING, _LEAD = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class CodewordTable:
    n_bins: int
    lengths: tuple

    def __post_init__(self):
        if len(self.lengths) != self.n_bins:
            raise QuantizerError("codeword table needs one length per bin")
        if any(b < 1 for b in self.lengths):
            raise QuantizerError("codeword lengths must be positive")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.lengths, dtype=np.float64)


def _check_bins(n_bins: int):
    if int(n_bins) != n_bins or n_bins < 2:
        raise QuantizerError(f"need at least 2 bins, got {n_bins}")
    if n_bins > MAX_BINS:
        raise QuantizerError(f"at most {MAX_BINS} bins are supported, got {n_bins}")


def codeword_lengths(n_bins: int) -> CodewordTable:
    _check_bins(n_bins)
    return CodewordTable(n_bins, tuple(min(n + 1, n_bins - 1) for n in range(n_bins)))


def binarize(index: int, n_bins: int) -> list:
    _check_bins(n_bins)
    if not 0 <= index <= n_bins - 1:
        raise QuantizerError(f"index {index} out of range for {n_bins} bins")
    if index == n_bins - 1:
        return [1] * index
    return [1] * index + [0]


def debinarize(bits: Iterable[int] | Iterator[int], n_bins: int) -> int:
    """Read one truncated unary codeword from ``bits`` and return its index."""
    _check_bins(n_bins)
    it = iter(bits)
    k = 0
    while k < n_bins - 1:
        try:
            bit = next(it)
        except StopIteration:
            raise TruncatedStreamError("bit stream ended inside a codeword") from None
        if not bit:
            break
        k += 1
    return k


@njit(cache=True)
def _grow(out, pos, need):
    if pos + need <= out.size:
        return out
    bigger = np.empty(max(2 * out.size, pos + need + 16), np.uint8)
    bigger[:pos] = out[:pos]
    return bigger


@njit(cache=True)
def _shift_low(low, cache, cache_size, out, pos):
    if low < 0xFF000000 or low >= 0x100000000:
        carry = low >> 32
        out = _grow(out, pos, cache_size)
        temp = cache
        while True:
            out[pos] = (temp + carry) & 0xFF
            pos += 1
            temp = 0xFF
            cache_size -= 1
            if cache_size == 0:
                break
        cache = (low >> 24) & 0xFF
    cache_size += 1
    low = (low & 0x00FFFFFF) << 8
    return low, cache, cache_size, out, pos


@njit(cache=True)
def _encode(indices, n_bins):
    probs = np.full(n_bins - 1, PROB_INIT, np.int64)
    out = np.empty(64 + indices.size // 4, np.uint8)
    pos = 0
    low = 0
    rng = 0xFFFFFFFF
    cache = 0
    cache_size = 1
    last = n_bins - 1
    for i in range(indices.size):
        k = indices[i]
        n_bits = k + 1 if k < last else last
        for j in range(n_bits):
            bit = 1 if j < k else 0
            p = probs[j]
            r1 = (rng >> 16) * p
            if bit:
                rng = r1
            else:
                low += r1
                rng -= r1
            p += ((bit << 16) - p) >> ADAPT_SHIFT
            if p < PROB_MIN:
                p = PROB_MIN
            elif p > PROB_MAX:
                p = PROB_MAX
            probs[j] = p
            while rng < RANGE_TOP:
                rng <<= 8
                low, cache, cache_size, out, pos = _shift_low(low, cache, cache_size, out, pos)
    for _ in range(5):
        low, cache, cache_size, out, pos = _shift_low(low, cache, cache_size, out, pos)
    return out[:pos].copy()


@njit(cache=True)
def _decode(payload, count, n_bins):
    out = np.empty(count, np.int64)
    if payload.size < 5:
        return out, _TRUNCATED, 0
    if payload[0] != 0:
        return out, _LEAD, 0
    code = 0
    for i in range(1, 5):
        code = (code << 8) | np.int64(payload[i])
    pos = 5
    rng = 0xFFFFFFFF
    probs = np.full(n_bins - 1, PROB_INIT, np.int64)
    last = n_bins - 1
    for i in range(count):
        k = 0
        while k < last:
            p = probs[k]
            r1 = (rng >> 16) * p
            if code < r1:
                bit = 1
                rng = r1
            else:
                bit = 0
                code -= r1
                rng -= r1
            p += ((bit << 16) - p) >> ADAPT_SHIFT
            if p < PROB_MIN:
                p = PROB_MIN
            elif p > PROB_MAX:
                p = PROB_MAX
            probs[k] = p
            while rng < RANGE_TOP:
                if pos >= payload.size:
                    return out, _TRUNCATED, i
                rng <<= 8
                code = (code << 8) | np.int64(payload[pos])
                pos += 1
            if code >= rng:
                return out, _STATE, i
            if bit == 0:
                break
            k += 1
        out[i] = k
    if pos != payload.size:
        return out, _TRAILING, count
    return out, _OK, count


def encode_indices(indices, n_bins: int) -> bytes:
    """Entropy-code a sequence of bin indices with fresh contexts.

    The payload carries no symbol count; the decoder must be told how many
    indices to read.
    """
    _check_bins(n_bins)
    idx = np.ascontiguousarray(indices, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() > n_bins - 1):
        raise QuantizerError(f"indices must lie in [0, {n_bins - 1}]")
    return _encode(idx, int(n_bins)).tobytes()


def decode_indices(payload: bytes, count: int, n_bins: int) -> np.ndarray:
    _check_bins(n_bins)
    if count < 0:
        raise ValueError("count must be non-negative")
    buf = np.frombuffer(payload, dtype=np.uint8)
    out, status, at = _decode(buf, int(count), int(n_bins))
    if status == _TRUNCATED:
        raise TruncatedStreamError(f"payload exhausted while decoding symbol {at}")
    if status == _STATE:
        raise CorruptStreamError(f"range coder state violated at symbol {at}")
    if status == _TRAILING:
        raise CorruptStreamError("payload has bytes left over after the last symbol")
    if status == _LEAD:
        raise CorruptStreamError("payload does not start with the coder's zero byte")
    return out


def context_entropy_bits(indices, n_bins: int) -> float:
    """Empirical entropy in bits of the unary bit streams, summed over contexts.

    Context ``j`` sees one bit for every index ``>= j``, a one when the index
    exceeds ``j``.  This is the ideal static cost of the coded bit streams.
    """
    counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=n_bins)
    tail = np.cumsum(counts[::-1])[::-1]  # tail[j] = #(index >= j)
    total = 0.0
    for j in range(n_bins - 1):
        n = tail[j]
        ones = tail[j + 1]
        if n == 0 or ones == 0 or ones == n:
            continue
        p = ones / n
        total += n * -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return float(total)
