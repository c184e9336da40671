"""The ``.lwfc`` coded-stream container.

Layout (little-endian, byte aligned)::

    magic "LWFC" | version u8 | flags u8 | n_bins u8 | ndim u8
    dims u32 x ndim | c_min f32 | c_max f32 | element_count u64
    payload_length u32 | [levels f32 x n_bins, if flags bit 0] | payload

Flags: bit 0 marks an inline codebook, bit 1 the uniform quantizer.  With
neither bit set the stream was coded with a codebook the decoder must get out
of band.  Thresholds never travel; the decoder only needs levels.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .entropy import decode_indices, encode_indices
from .errors import ConfigurationError, CorruptStreamError, FormatError, QuantizerError, TruncatedStreamError
from .quant import ClipRange, Codebook, CodebookQuantizer, UniformQuantizer, as_float32, quantize, reconstruction_levels
from .tensorio import FeatureTensor

STREAM_MAGIC = b"LWFC"
STREAM_VERSION = 1
FLAG_INLINE_CODEBOOK = 0x01
FLAG_UNIFORM = 0x02

_FIXED = struct.Struct("<4sBBBB")
_TAIL = struct.Struct("<ffQI")


def header_size(ndim: int) -> int:
    return _FIXED.size + 4 * ndim + _TAIL.size


@dataclass(frozen=True)
class StreamHeader:
    flags: int
    n_bins: int
    dims: tuple
    c_min: float
    c_max: float
    element_count: int
    payload_length: int
    version: int = STREAM_VERSION

    @property
    def uniform(self) -> bool:
        return bool(self.flags & FLAG_UNIFORM)

    @property
    def inline_codebook(self) -> bool:
        return bool(self.flags & FLAG_INLINE_CODEBOOK)

    @property
    def size(self) -> int:
        return header_size(len(self.dims))

    def pack(self) -> bytes:
        return (
            _FIXED.pack(STREAM_MAGIC, self.version, self.flags, self.n_bins, len(self.dims))
            + struct.pack(f"<{len(self.dims)}I", *self.dims)
            + _TAIL.pack(self.c_min, self.c_max, self.element_count, self.payload_length)
        )

    @classmethod
    def unpack(cls, data: bytes) -> "StreamHeader":
        if len(data) < _FIXED.size:
            raise TruncatedStreamError("stream ends inside its header")
        magic, version, flags, n_bins, ndim = _FIXED.unpack_from(data)
        if magic != STREAM_MAGIC:
            raise FormatError("not a coded feature stream (bad magic)")
        if version != STREAM_VERSION:
            raise FormatError(f"unsupported stream version {version}")
        if flags & ~(FLAG_INLINE_CODEBOOK | FLAG_UNIFORM):
            raise FormatError(f"unknown flag bits {flags:#04x}")
        if flags & FLAG_INLINE_CODEBOOK and flags & FLAG_UNIFORM:
            raise FormatError("stream cannot be both uniform and codebook coded")
        if n_bins < 2:
            raise FormatError(f"stream declares {n_bins} bins")
        if ndim < 1:
            raise FormatError("stream declares no dimensions")
        if len(data) < header_size(ndim):
            raise TruncatedStreamError("stream ends inside its header")
        dims = struct.unpack_from(f"<{ndim}I", data, _FIXED.size)
        c_min, c_max, count, plen = _TAIL.unpack_from(data, _FIXED.size + 4 * ndim)
        if any(d == 0 for d in dims) or count != math.prod(dims):
            raise CorruptStreamError(f"element count {count} does not match dims {dims}")
        if not (np.isfinite(c_min) and np.isfinite(c_max) and c_min < c_max):
            raise CorruptStreamError(f"bad clip range [{c_min}, {c_max}] in header")
        return cls(flags, n_bins, tuple(dims), c_min, c_max, count, plen, version)


@dataclass(frozen=True)
class CodedStream:
    header: StreamHeader
    levels: Optional[np.ndarray]
    payload: bytes

    @property
    def size(self) -> int:
        """Total stream size in bytes: header, inline levels and payload."""
        extra = 4 * self.header.n_bins if self.levels is not None else 0
        return self.header.size + extra + len(self.payload)

    @property
    def bits_per_element(self) -> float:
        return 8.0 * self.size / self.header.element_count

    def to_bytes(self) -> bytes:
        out = self.header.pack()
        if self.levels is not None:
            out += np.asarray(self.levels, dtype="<f4").tobytes()
        return out + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodedStream":
        h = StreamHeader.unpack(data)
        off = h.size
        levels = None
        if h.inline_codebook:
            end = off + 4 * h.n_bins
            if len(data) < end:
                raise TruncatedStreamError("stream ends inside its codebook")
            levels = np.frombuffer(data, "<f4", h.n_bins, off).astype(np.float64)
            off = end
        payload = data[off:]
        if len(payload) != h.payload_length:
            raise CorruptStreamError(
                f"header announces {h.payload_length} payload bytes, stream has {len(payload)}"
            )
        return cls(h, levels, bytes(payload))


def read_header(data: bytes) -> StreamHeader:
    """Parse only the header, without touching the payload."""
    return StreamHeader.unpack(data)


def encode_tensor(t: FeatureTensor, q, inline_codebook: bool = False) -> CodedStream:
    """Clip, quantize and entropy-code ``t`` in row-major order.

    ``q`` is a :class:`UniformQuantizer` or a :class:`CodebookQuantizer`.
    Quantizer parameters are rounded to float32 first, exactly as the decoder
    will see them.
    """
    if not isinstance(q, (UniformQuantizer, CodebookQuantizer)):
        raise QuantizerError(f"unsupported quantizer {type(q).__name__}")
    if t.element_count == 0:
        raise QuantizerError("cannot code an empty tensor")
    if q.n_bins > 255:
        raise QuantizerError("streams hold at most 255 bins")
    q32 = as_float32(q)
    idx = quantize(t.data, q32)
    payload = encode_indices(idx, q32.n_bins)
    if isinstance(q, UniformQuantizer):
        flags, levels = FLAG_UNIFORM, None
    elif inline_codebook:
        flags, levels = FLAG_INLINE_CODEBOOK, np.array(q32.codebook.levels)
    else:
        flags, levels = 0, None
    h = StreamHeader(flags, q32.n_bins, t.dims, q32.range.c_min, q32.range.c_max, t.element_count, len(payload))
    return CodedStream(h, levels, payload)


def stream_levels(s: CodedStream, codebook: Optional[Codebook] = None) -> np.ndarray:
    """Reconstruction levels the decoder uses for this stream."""
    h = s.header
    if h.uniform:
        return UniformQuantizer(ClipRange(h.c_min, h.c_max), h.n_bins).reconstruction_levels()
    if s.levels is not None:
        return s.levels
    if codebook is None:
        raise ConfigurationError("stream was coded with an out-of-band codebook; supply it to decode")
    if codebook.n_bins != h.n_bins:
        raise ConfigurationError(f"codebook has {codebook.n_bins} levels, stream needs {h.n_bins}")
    return codebook.levels.astype(np.float32).astype(np.float64)


def decode_tensor(s, codebook: Optional[Codebook] = None) -> FeatureTensor:
    if isinstance(s, (bytes, bytearray, memoryview)):
        s = CodedStream.from_bytes(bytes(s))
    levels = stream_levels(s, codebook)
    idx = decode_indices(s.payload, s.header.element_count, s.header.n_bins)
    return FeatureTensor(s.header.dims, levels[idx].astype(np.float32))


def reconstruct(t: FeatureTensor, q) -> FeatureTensor:
    """In-memory clip, quantize and dequantize with the stream's float32 conventions."""
    q32 = as_float32(q)
    levels = reconstruction_levels(q32)
    return FeatureTensor(t.dims, levels[quantize(t.data, q32)].astype(np.float32))


def save_stream(s: CodedStream, path):
    with open(path, "wb") as f:
        f.write(s.to_bytes())


def load_stream(path) -> CodedStream:
    with open(path, "rb") as f:
        return CodedStream.from_bytes(f.read())
