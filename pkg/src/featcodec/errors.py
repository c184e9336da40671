class FeatcodecError(Exception):
    """Base class for all errors raised by featcodec."""


class QuantizerError(FeatcodecError, ValueError):
    """Invalid quantizer parameters or bin index."""


class DesignError(FeatcodecError, ValueError):
    """Quantizer design cannot proceed on the given training data."""


class FormatError(FeatcodecError, ValueError):
    """Bad magic, version or field value in a file or stream."""


class CorruptStreamError(FeatcodecError, ValueError):
    """Stream contents are inconsistent with its header or coder state."""


class TruncatedStreamError(CorruptStreamError):
    """Data ran out before a codeword or field was complete."""


class ConfigurationError(FeatcodecError, ValueError):
    """Decoder lacks information it needs, e.g. an out-of-band codebook."""


class DataError(FeatcodecError, ValueError):
    """Tensor data is not acceptable (non-finite values, shape mismatch)."""
