"""Distortion and rate measurement, clip-range sweeps and rate-distortion sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bitstream import decode_tensor, encode_tensor
from .ecq import DesignConfig, design_modified
from .errors import DataError
from .quant import ClipRange, CodebookQuantizer, UniformQuantizer, dequantize_uniform, quantize_uniform
from .tensorio import FeatureTensor

CSV_COLUMNS = ("lambda", "n_bins", "c_min", "c_max", "stream_bytes", "bits_per_element", "msqe")


def msqe(original: FeatureTensor, reconstructed: FeatureTensor) -> float:
    """Mean squared error against the unclipped original, so clipping loss counts."""
    if original.dims != reconstructed.dims:
        raise DataError(f"dims differ: {original.dims} vs {reconstructed.dims}")
    d = original.data.astype(np.float64) - reconstructed.data.astype(np.float64)
    return float(np.mean(d * d))


@dataclass(frozen=True)
class RatePoint:
    lam: float
    bits_per_element: float
    msqe: float
    n_bins: int
    clip: ClipRange
    stream_bytes: int

    def row(self) -> tuple:
        return (self.lam, self.n_bins, self.clip.c_min, self.clip.c_max, self.stream_bytes, self.bits_per_element, self.msqe)


def clip_sweep(t: FeatureTensor, n_bins: int, c_max_grid: Sequence[float], c_min: float = 0.0):
    """MSQE of uniform quantization at each ``c_max`` in the grid.

    Returns a list of ``(c_max, msqe)`` pairs.
    """
    grid = [float(c) for c in c_max_grid]
    if not grid:
        raise DataError("c_max grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DataError("c_max grid must be strictly ascending")
    if grid[0] <= c_min:
        raise DataError(f"every c_max must exceed c_min = {c_min}")
    x = t.data.astype(np.float64)
    out = []
    for c_max in grid:
        q = UniformQuantizer(ClipRange(c_min, c_max), n_bins)
        r = dequantize_uniform(quantize_uniform(x, q), q)
        out.append((c_max, float(np.mean((x - r) ** 2))))
    return out


def rate_sweep(samples, eval_tensor: FeatureTensor, template: DesignConfig, lambdas: Iterable[float]):
    """Design a pinned quantizer per lambda, code ``eval_tensor`` and measure it.

    Streams carry their codebook inline so the reported rate covers every byte
    the decoder needs.
    """
    lambdas = [float(v) for v in lambdas]
    if not lambdas:
        raise DataError("lambda list is empty")
    if any(v < 0 for v in lambdas) or any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise DataError("lambdas must be non-negative and ascending")
    points = []
    for lam in lambdas:
        cfg = dataclasses.replace(template, lam=lam)
        res = design_modified(samples, cfg)
        s = encode_tensor(eval_tensor, CodebookQuantizer(res.codebook, cfg.clip), inline_codebook=True)
        rec = decode_tensor(s)
        points.append(RatePoint(lam, s.bits_per_element, msqe(eval_tensor, rec), cfg.n_bins, cfg.clip, s.size))
    return points


def rate_points_csv(points: Sequence[RatePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in p.row()])
    return buf.getvalue()
