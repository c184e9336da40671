"""Lightweight lossy compression of neural-network feature tensors.

Clip, coarsely quantize (uniform or entropy-constrained with pinned outer
levels), binarize with truncated unary codes and code with a context-adaptive
binary range coder.
"""

from .bitstream import CodedStream, StreamHeader, decode_tensor, encode_tensor, reconstruct
from .ecq import (
    DesignConfig,
    DesignResult,
    brute_force_design_oracle,
    design_conventional,
    design_modified,
    lagrangian_cost,
    load_codebook,
    save_codebook,
)
from .entropy import binarize, codeword_lengths, debinarize, decode_indices, encode_indices
from .errors import (
    ConfigurationError,
    CorruptStreamError,
    DataError,
    DesignError,
    FeatcodecError,
    FormatError,
    QuantizerError,
    TruncatedStreamError,
)
from .metrics import RatePoint, clip_sweep, msqe, rate_sweep
from .quant import (
    ClipRange,
    Codebook,
    CodebookQuantizer,
    UniformQuantizer,
    clip,
    dequantize_codebook,
    dequantize_uniform,
    quantize_codebook,
    quantize_uniform,
)
from .tensorio import FeatureTensor, SyntheticSpec, generate_synthetic, histogram, load_tensor, save_tensor

__version__ = "0.1.0"
