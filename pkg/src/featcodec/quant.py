"""Clipping, scalar quantization and inverse quantization of activations.

Two quantizer families are supported: a uniform ``N``-level quantizer over a
clip range, and an explicit codebook given by reconstruction levels and
decision thresholds.  All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import QuantizerError


@dataclass(frozen=True)
class ClipRange:
    c_min: float
    c_max: float

    def __post_init__(self):
        c_min, c_max = float(self.c_min), float(self.c_max)
        if not (np.isfinite(c_min) and np.isfinite(c_max)):
            raise QuantizerError(f"clip range must be finite, got [{c_min}, {c_max}]")
        if not c_min < c_max:
            raise QuantizerError(f"clip range needs c_min < c_max, got [{c_min}, {c_max}]")
        object.__setattr__(self, "c_min", c_min)
        object.__setattr__(self, "c_max", c_max)

    @property
    def width(self) -> float:
        return self.c_max - self.c_min


@dataclass(frozen=True)
class UniformQuantizer:
    range: ClipRange
    levels: int

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise QuantizerError(f"uniform quantizer needs at least 2 levels, got {self.levels}")
        object.__setattr__(self, "levels", int(self.levels))

    @property
    def n_bins(self) -> int:
        return self.levels

    @property
    def step(self) -> float:
        return self.range.width / (self.levels - 1)

    def reconstruction_levels(self) -> np.ndarray:
        return dequantize_uniform(np.arange(self.levels), self)


@dataclass(frozen=True, eq=False)
class Codebook:
    """Reconstruction levels plus the ``N - 1`` decision thresholds between them.

    Bin ``n`` covers ``[thresholds[n-1], thresholds[n])``; the first and last
    bins extend to infinity.
    """

    levels: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=np.float64).ravel()
        thresholds = np.array(self.thresholds, dtype=np.float64).ravel()
        if levels.size < 2:
            raise QuantizerError("codebook needs at least 2 levels")
        if thresholds.size != levels.size - 1:
            raise QuantizerError(
                f"codebook with {levels.size} levels needs {levels.size - 1} thresholds, "
                f"got {thresholds.size}"
            )
        if not (np.all(np.isfinite(levels)) and np.all(np.isfinite(thresholds))):
            raise QuantizerError("codebook values must be finite")
        if np.any(np.diff(levels) <= 0):
            raise QuantizerError("codebook levels must be strictly increasing")
        if np.any(np.diff(thresholds) < 0):
            raise QuantizerError("codebook thresholds must be non-decreasing")
        levels.setflags(write=False)
        thresholds.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "thresholds", thresholds)

    @classmethod
    def from_levels(cls, levels: Sequence[float]) -> "Codebook":
        """Nearest-level codebook: thresholds at the midpoints."""
        levels = np.asarray(levels, dtype=np.float64)
        return cls(levels, (levels[:-1] + levels[1:]) / 2)

    @property
    def n_bins(self) -> int:
        return int(self.levels.size)

    def as_float32(self) -> "Codebook":
        """The codebook as it survives a round trip through a 32-bit file."""
        return Codebook(
            self.levels.astype(np.float32).astype(np.float64),
            self.thresholds.astype(np.float32).astype(np.float64),
        )

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return np.array_equal(self.levels, other.levels) and np.array_equal(
            self.thresholds, other.thresholds
        )

    def __repr__(self):
        return f"Codebook(levels={self.levels.tolist()}, thresholds={self.thresholds.tolist()})"


def clip(x, rng: ClipRange):
    return np.minimum(np.maximum(x, rng.c_min), rng.c_max)


def round_half_away(v):
    """Round to nearest integer, halfway cases away from zero.

    Uses the fractional part directly instead of ``floor(v + 0.5)``, which
    misrounds values just below one half.
    """
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    fl = np.floor(a)
    r = fl + (a - fl >= 0.5)
    return np.copysign(r, v)


def quantize_uniform(x, q: UniformQuantizer):
    """Bin index of ``x`` under the uniform quantizer (clips first)."""
    c_min, c_max = q.range.c_min, q.range.c_max
    x_clp = clip(np.asarray(x, dtype=np.float64), q.range)
    scaled = (x_clp - c_min) / (c_max - c_min) * (q.levels - 1)
    idx = np.clip(round_half_away(scaled), 0, q.levels - 1).astype(np.int64)
    return idx if idx.ndim else int(idx)


def _check_index(n, n_bins: int):
    n = np.asarray(n)
    if not np.issubdtype(n.dtype, np.integer):
        if not np.all(np.mod(n, 1) == 0):
            raise QuantizerError("bin indices must be integers")
        n = n.astype(np.int64)
    if n.size and (n.min() < 0 or n.max() > n_bins - 1):
        raise QuantizerError(f"bin index out of range [0, {n_bins - 1}]")
    return n


def dequantize_uniform(n, q: UniformQuantizer):
    """Reconstruction value ``c_min + n * step``; endpoints land exactly on the clip bounds."""
    n = _check_index(n, q.levels)
    t = n / (q.levels - 1)
    # lerp form keeps both endpoints exact in floating point
    out = (1.0 - t) * q.range.c_min + t * q.range.c_max
    return out if out.ndim else float(out)


def quantize_codebook(x, cb: Codebook, rng: ClipRange):
    """Bin ``n`` with ``t_n <= clip(x) < t_{n+1}``; a sample on a threshold goes to the upper bin."""
    x_clp = clip(np.asarray(x, dtype=np.float64), rng)
    idx = np.searchsorted(cb.thresholds, x_clp, side="right").astype(np.int64)
    return idx if idx.ndim else int(idx)


def dequantize_codebook(n, cb: Codebook):
    n = _check_index(n, cb.n_bins)
    out = cb.levels[n]
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class CodebookQuantizer:
    """A designed codebook together with the clip range applied before it."""

    codebook: Codebook
    range: ClipRange

    @property
    def n_bins(self) -> int:
        return self.codebook.n_bins


def as_float32(q):
    """The quantizer with every parameter rounded to float32, as stored in files and streams."""
    f = lambda v: float(np.float32(v))
    rng = ClipRange(f(q.range.c_min), f(q.range.c_max))
    if isinstance(q, UniformQuantizer):
        return UniformQuantizer(rng, q.levels)
    return CodebookQuantizer(q.codebook.as_float32(), rng)


def quantize(x, q):
    if isinstance(q, UniformQuantizer):
        return quantize_uniform(x, q)
    return quantize_codebook(x, q.codebook, q.range)


def reconstruction_levels(q) -> np.ndarray:
    if isinstance(q, UniformQuantizer):
        return q.reconstruction_levels()
    return np.array(q.codebook.levels)


def dequantize(n, q):
    if isinstance(q, UniformQuantizer):
        return dequantize_uniform(n, q)
    return dequantize_codebook(n, q.codebook)
