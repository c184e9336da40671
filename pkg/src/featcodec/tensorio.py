"""Feature tensors, the ``.ftns`` tensor file, synthetic activations and histograms."""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, FormatError
from .quant import ClipRange

TENSOR_MAGIC = b"FTNS"
TENSOR_VERSION = 1
DTYPE_FLOAT32 = 0


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    """Immutable row-major float32 activations with their dimensions."""

    dims: tuple
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DataError("tensor needs at least one dimension")
        if any(d <= 0 for d in dims):
            raise DataError(f"tensor dimensions must be positive, got {dims}")
        data = np.array(self.data, dtype=np.float32).ravel()
        if data.size != math.prod(dims):
            raise DataError(f"dims {dims} need {math.prod(dims)} elements, got {data.size}")
        if not np.all(np.isfinite(data)):
            raise DataError("tensor contains NaN or infinite values")
        data.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, arr) -> "FeatureTensor":
        arr = np.asarray(arr)
        return cls(arr.shape, arr)

    @property
    def element_count(self) -> int:
        return int(self.data.size)

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.dims)

    def __eq__(self, other):
        if not isinstance(other, FeatureTensor):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"FeatureTensor(dims={self.dims})"


def tensor_to_bytes(t: FeatureTensor) -> bytes:
    if len(t.dims) > 255:
        raise FormatError("tensor files hold at most 255 dimensions")
    head = TENSOR_MAGIC + struct.pack("<BBB", TENSOR_VERSION, DTYPE_FLOAT32, len(t.dims))
    head += struct.pack(f"<{len(t.dims)}I", *t.dims)
    return head + t.data.astype("<f4").tobytes()


def tensor_from_bytes(data: bytes) -> FeatureTensor:
    if len(data) < 7 or data[:4] != TENSOR_MAGIC:
        raise FormatError("not a tensor file (bad magic)")
    version, dtype, ndim = struct.unpack_from("<BBB", data, 4)
    if version != TENSOR_VERSION:
        raise FormatError(f"unsupported tensor file version {version}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"unsupported tensor dtype code {dtype}")
    off = 7 + 4 * ndim
    if len(data) < off:
        raise FormatError("tensor file ends inside its header")
    dims = struct.unpack_from(f"<{ndim}I", data, 7)
    if len(data) - off != 4 * math.prod(dims):
        raise FormatError(f"tensor payload should be {4 * math.prod(dims)} bytes, got {len(data) - off}")
    return FeatureTensor(dims, np.frombuffer(data, "<f4", offset=off))


def save_tensor(t: FeatureTensor, path, overwrite: bool = True):
    if not overwrite and os.path.exists(path):
        raise FileExistsError(path)
    with open(path, "wb") as f:
        f.write(tensor_to_bytes(t))


def load_tensor(path) -> FeatureTensor:
    with open(path, "rb") as f:
        return tensor_from_bytes(f.read())


def load_raw_f32(path, dims: Sequence[int]) -> FeatureTensor:
    """Import a headerless little-endian float32 dump with caller-supplied dims."""
    with open(path, "rb") as f:
        raw = f.read()
    need = 4 * math.prod(dims)
    if len(raw) != need:
        raise DataError(f"raw file has {len(raw)} bytes but dims {tuple(dims)} need {need}")
    return FeatureTensor(dims, np.frombuffer(raw, "<f4"))


@dataclass(frozen=True)
class SyntheticSpec:
    dims: tuple
    zero_fraction: float = 0.6
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.zero_fraction < 1.0:
            raise DataError(f"zero_fraction must be in [0, 1), got {self.zero_fraction}")
        if not self.scale > 0:
            raise DataError(f"scale must be positive, got {self.scale}")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be an unsigned 64-bit integer")


def generate_synthetic(spec: SyntheticSpec) -> FeatureTensor:
    """Post-ReLU-like activations: a spike of exact zeros plus a half-normal tail."""
    n = math.prod(spec.dims)
    rng = np.random.default_rng(spec.seed)
    zero = rng.random(n) < spec.zero_fraction
    mag = np.abs(rng.standard_normal(n)) * spec.scale
    return FeatureTensor(spec.dims, np.where(zero, 0.0, mag))


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


def histogram(t: FeatureTensor, n_buckets: int, rng: ClipRange) -> Histogram:
    """Equal-width bucket counts over ``[c_min, c_max]``; ``c_max`` itself lands in the last bucket."""
    if int(n_buckets) != n_buckets or n_buckets < 1:
        raise DataError("need at least one bucket")
    x = t.data.astype(np.float64)
    under = int(np.count_nonzero(x < rng.c_min))
    over = int(np.count_nonzero(x > rng.c_max))
    inside = x[(x >= rng.c_min) & (x <= rng.c_max)]
    b = np.floor((inside - rng.c_min) / rng.width * n_buckets).astype(np.int64)
    b = np.minimum(b, n_buckets - 1)
    counts = np.bincount(b, minlength=n_buckets)
    edges = np.linspace(rng.c_min, rng.c_max, n_buckets + 1)
    return Histogram(edges, counts, under, over)
